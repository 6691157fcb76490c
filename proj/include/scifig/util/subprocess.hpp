#pragma once

#include <chrono>
#include <map>
#include <string>

namespace scifig {

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string stdout_text;
};

// Runs `command` through /bin/sh -c. The child is killed once `timeout`
// elapses. stdout is captured when requested, otherwise discarded.
ProcessResult run_shell(const std::string& command, std::chrono::milliseconds timeout, bool capture_stdout);

// Single-quotes `arg` for /bin/sh.
std::string shell_quote(const std::string& arg);

// Replaces `{name}` placeholders; values are inserted verbatim.
std::string expand_template(const std::string& tmpl, const std::map<std::string, std::string>& values);

}  // namespace scifig
