#include "scifig/util/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <thread>

#include "scifig/error.hpp"

namespace scifig {

ProcessResult run_shell(const std::string& command, std::chrono::milliseconds timeout, bool capture_stdout) {
    int pipefd[2] = {-1, -1};
    if (pipe2(pipefd, O_CLOEXEC) != 0) {
        throw Error(ErrorKind::Io, "pipe failed");
    }
    const pid_t pid = fork();
    if (pid < 0) {
        close(pipefd[0]);
        close(pipefd[1]);
        throw Error(ErrorKind::Io, "fork failed");
    }
    if (pid == 0) {
        setpgid(0, 0);
        if (capture_stdout) {
            dup2(pipefd[1], STDOUT_FILENO);
        } else {
            const int devnull = open("/dev/null", O_WRONLY);
            if (devnull >= 0) dup2(devnull, STDOUT_FILENO);
        }
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(pipefd[1]);

    ProcessResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    bool pipe_open = true;
    int status = 0;
    bool reaped = false;
    char buf[4096];
    while (!reaped) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timed_out = true;
            reaped = true;
            break;
        }
        if (pipe_open) {
            pollfd pfd{pipefd[0], POLLIN, 0};
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            const int rc = poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 50)));
            if (rc > 0) {
                const ssize_t n = read(pipefd[0], buf, sizeof buf);
                if (n > 0) {
                    result.stdout_text.append(buf, static_cast<std::size_t>(n));
                } else if (n == 0 || errno != EINTR) {
                    pipe_open = false;
                }
            }
        } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        const pid_t w = waitpid(pid, &status, WNOHANG);
        if (w == pid) reaped = true;
    }
    // Drain anything written between the last poll and exit.
    if (pipe_open && !result.timed_out) {
        fcntl(pipefd[0], F_SETFL, O_NONBLOCK);
        for (;;) {
            const ssize_t n = read(pipefd[0], buf, sizeof buf);
            if (n <= 0) break;
            result.stdout_text.append(buf, static_cast<std::size_t>(n));
        }
    }
    close(pipefd[0]);
    if (!result.timed_out) {
        result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    }
    return result;
}

std::string shell_quote(const std::string& arg) {
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

std::string expand_template(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close != std::string::npos) {
                const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

}  // namespace scifig
