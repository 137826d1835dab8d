#include "fw.h"

void classify(uint16_t pin, uint8_t *pout)
{
    if (pin > 0x540)
        *pout = 1;
    else if (pin >= 0x21C && pin <= 0x2B0)
        *pout = 2;
    else
        *pout = 3;
}
