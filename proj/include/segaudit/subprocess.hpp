#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>

#include "segaudit/predictor.hpp"

namespace segaudit {

/// A child started through /bin/sh -c with its stdin/stdout connected to pipes.
/// Stderr is inherited so adapter diagnostics reach the terminal.
class ChildProcess {
public:
    explicit ChildProcess(const std::string& command);
    ~ChildProcess();

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    /// Writes `line` plus '\n'. Throws PredictorError if the child has closed its stdin.
    void write_line(const std::string& line);

    /// Next newline-terminated line (without the '\n'), or nullopt on timeout.
    /// Throws PredictorError when the child closes stdout.
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);

    void close_stdin();

    /// Waits for exit; escalates to SIGTERM then SIGKILL after `grace`.
    ShutdownStatus wait(std::chrono::milliseconds grace);

    /// Immediate SIGKILL and reap.
    void kill();

    bool running();
    pid_t pid() const noexcept { return pid_; }

private:
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    bool reaped_ = false;
    int status_ = 0;
};

}  // namespace segaudit
