#include "fw.h"

uint8_t last_level;

uint8_t level(enum mode m, uint8_t x)
{
    uint8_t r;
    if (m == MODE_OFF)
        r = 0;
    else if (m == MODE_LOW)
        r = x >> 1;
    else
        r = x;
    last_level = r;
    return r;
}
