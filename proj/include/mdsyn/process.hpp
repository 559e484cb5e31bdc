#pragma once

#include <string>

namespace mdsyn {

struct ProcessResult {
  int exit_code = -1;  // -1 when killed by a signal or on timeout
  bool timed_out = false;
  std::string output;  // interleaved stdout and stderr
};

// Runs `command` through /bin/sh -c. On timeout the whole process group is killed.
ProcessResult run_shell(const std::string& command, double timeout_seconds);

}  // namespace mdsyn
