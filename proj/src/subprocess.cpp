#include "segaudit/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

extern char** environ;

namespace segaudit {
namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

int exit_code_of(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

}  // namespace

ChildProcess::ChildProcess(const std::string& command) {
    if (command.empty()) throw ParameterError("empty predictor command");
    ignore_sigpipe();

    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw PredictorError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw PredictorError(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    // Own process group, so signals reach the whole command and not just the shell.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
        ::close(to_child[1]);
        ::close(from_child[0]);
        throw PredictorError("cannot spawn '" + command + "': " + std::strerror(rc));
    }
    stdin_fd_ = to_child[1];
    stdout_fd_ = from_child[0];
}

ChildProcess::~ChildProcess() {
    close_fd(stdin_fd_);
    close_fd(stdout_fd_);
    if (!reaped_ && pid_ > 0) kill();
}

void ChildProcess::write_line(const std::string& line) {
    if (stdin_fd_ < 0) throw PredictorError("predictor stdin already closed");
    std::string data = line + "\n";
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
        const ssize_t n = ::write(stdin_fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw PredictorError(std::string("write to predictor failed: ") + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

std::optional<std::string> ChildProcess::read_line(std::chrono::milliseconds timeout) {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + timeout;
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (stdout_fd_ < 0) throw PredictorError("predictor closed its output");
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
        if (remaining.count() <= 0) return std::nullopt;

        pollfd pfd{stdout_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1 << 30)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw PredictorError(std::string("poll failed: ") + std::strerror(errno));
        }
        if (ready == 0) return std::nullopt;

        char chunk[4096];
        const ssize_t n = ::read(stdout_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw PredictorError(std::string("read from predictor failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            close_fd(stdout_fd_);
            if (!buffer_.empty()) {
                std::string tail = std::move(buffer_);
                buffer_.clear();
                return tail;
            }
            throw PredictorError("predictor exited (end of output)");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void ChildProcess::close_stdin() { close_fd(stdin_fd_); }

bool ChildProcess::running() {
    if (reaped_) return false;
    const pid_t r = ::waitpid(pid_, &status_, WNOHANG);
    if (r == pid_) {
        reaped_ = true;
        return false;
    }
    return r == 0;
}

ShutdownStatus ChildProcess::wait(std::chrono::milliseconds grace) {
    using clock = std::chrono::steady_clock;
    ShutdownStatus st;
    auto wait_until = [&](clock::time_point deadline) {
        while (running()) {
            if (clock::now() >= deadline) return false;
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        return true;
    };
    if (!wait_until(clock::now() + grace)) {
        st.forced_kill = true;
        ::kill(-pid_, SIGTERM);
        if (!wait_until(clock::now() + std::chrono::seconds(1))) {
            ::kill(-pid_, SIGKILL);
            ::waitpid(pid_, &status_, 0);
            reaped_ = true;
            st.detail = "killed with SIGKILL after shutdown timeout";
        } else {
            st.detail = "terminated with SIGTERM after shutdown timeout";
        }
    }
    st.exit_code = exit_code_of(status_);
    close_fd(stdout_fd_);
    return st;
}

void ChildProcess::kill() {
    if (reaped_ || pid_ <= 0) return;
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, &status_, 0);
    reaped_ = true;
}

}  // namespace segaudit
