#include <unistd.h>

#include <iostream>

#include "hoaexec/cli.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  hoaexec::RuntimeIo io;
  io.interactive = ::isatty(STDIN_FILENO) != 0;
  return hoaexec::run_cli(argc, argv, io);
}
