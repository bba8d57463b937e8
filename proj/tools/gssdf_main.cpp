#include <cstdio>

int main() {
  std::puts("gssdf: command suite not wired up yet");
  return 1;
}
