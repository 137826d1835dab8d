#include <stdbool.h>
#include <stdint.h>

enum mode { MODE_OFF = 0, MODE_LOW = 1, MODE_HIGH = 2 };

extern uint8_t limit;
extern uint8_t last_level;

void classify(uint16_t pin, uint8_t *pout);
uint8_t g(uint16_t a, bool b);
uint8_t level(enum mode m, uint8_t x);
uint8_t over_limit(uint8_t x);
uint8_t dispatch(uint16_t a, bool b);
