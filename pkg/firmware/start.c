#include "fw.h"

void _start(void)
{
    (void)level(MODE_LOW, dispatch(0x1234, true));
}
