#include "fw.h"

uint8_t g(uint16_t a, bool b)
{
    return b ? (uint8_t)(a >> 8) : (uint8_t)(a & 0xFF);
}
