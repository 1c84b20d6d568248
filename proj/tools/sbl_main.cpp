#include <cstdio>

int main() {
  std::puts("sbl: CLI not wired up yet");
  return 0;
}
