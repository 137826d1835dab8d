#include "fw.h"

uint8_t limit = 0x40;

uint8_t over_limit(uint8_t x)
{
    return x > limit;
}
