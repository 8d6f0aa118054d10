#include "cdm/subprocess.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <thread>

namespace cdm {

CommandResult run_command(const std::string& command, double timeout_s) {
    CommandResult result;

    int pipefd[2];
    if (pipe(pipefd) != 0) return result;

    pid_t pid = fork();
    if (pid < 0) {
        close(pipefd[0]);
        close(pipefd[1]);
        return result;
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(pipefd[1], STDOUT_FILENO);
        dup2(pipefd[1], STDERR_FILENO);
        close(pipefd[0]);
        close(pipefd[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(pipefd[1]);
    fcntl(pipefd[0], F_SETFL, O_NONBLOCK);

    constexpr std::size_t kMaxOutput = 64 * 1024;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration<double>(timeout_s);
    int status = 0;
    bool done = false;
    while (!done) {
        char buf[4096];
        ssize_t n;
        while ((n = read(pipefd[0], buf, sizeof(buf))) > 0)
            if (result.output.size() < kMaxOutput)
                result.output.append(buf, static_cast<std::size_t>(n));

        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) {
            done = true;
            break;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timed_out = true;
            done = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    // drain whatever is left in the pipe
    char buf[4096];
    ssize_t n;
    while ((n = read(pipefd[0], buf, sizeof(buf))) > 0)
        if (result.output.size() < kMaxOutput)
            result.output.append(buf, static_cast<std::size_t>(n));
    close(pipefd[0]);

    if (!result.timed_out && WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    return result;
}

}  // namespace cdm
