#pragma once

#include <string>

namespace cdm {

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;  // combined stdout+stderr, truncated
};

// Run a shell command with a wall-clock timeout (seconds). The child is
// placed in its own process group and killed as a group on timeout.
CommandResult run_command(const std::string& command, double timeout_s);

}  // namespace cdm
