#include "fw.h"

uint8_t dispatch(uint16_t a, bool b)
{
    return over_limit(g(a, b));
}
