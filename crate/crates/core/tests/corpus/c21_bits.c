#include <stdio.h>
#include <stdint.h>

unsigned popcount32(uint32_t x) {
  unsigned c = 0;
  while (x) {
    x &= x - 1;
    c++;
  }
  return c;
}

uint32_t rotl(uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

int main(void) {
  uint32_t h = 0x9e3779b9u;
  unsigned total = 0;
  for (int i = 0; i < 1000; i++) {
    h = rotl(h ^ (uint32_t)i, 5) * 2654435761u;
    total += popcount32(h);
  }
  printf("%u %08x\n", total, h);
  return 0;
}
