#include "t1/sandbox.hpp"

#include "t1/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <system_error>

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

namespace t1::sandbox {
namespace {

namespace fs = std::filesystem;

struct Pipe {
    int read_fd = -1;
    int write_fd = -1;

    Pipe() {
        int fds[2];
        if (pipe(fds) != 0) {
            throw EnvironmentError(std::string("pipe() failed: ") + std::strerror(errno));
        }
        read_fd = fds[0];
        write_fd = fds[1];
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (read_fd >= 0) ::close(read_fd);
        read_fd = -1;
    }
    void close_write() {
        if (write_fd >= 0) ::close(write_fd);
        write_fd = -1;
    }
};

fs::path make_workdir(const SandboxPolicy& policy) {
    fs::path root = policy.workdir_root ? *policy.workdir_root : fs::temp_directory_path();
    fs::create_directories(root);
    std::string tmpl = (root / "t1-sbx-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) {
        throw EnvironmentError(std::string("mkdtemp failed: ") + std::strerror(errno));
    }
    return fs::path(buf.data());
}

[[noreturn]] void child_exec(const std::vector<std::string>& argv_strings,
                             const fs::path& workdir, const SandboxPolicy& policy,
                             int stdin_fd, int stdout_fd, int stderr_fd, int status_fd) {
    auto bail = [status_fd](int err) {
        ssize_t ignored = write(status_fd, &err, sizeof err);
        (void)ignored;
        _exit(127);
    };

    setsid();  // own process group: the parent kills the whole group on timeout

    rlimit mem{};
    mem.rlim_cur = mem.rlim_max = static_cast<rlim_t>(policy.memory_limit_mb) * 1024 * 1024;
    setrlimit(RLIMIT_AS, &mem);
    rlimit cpu{};
    cpu.rlim_cur = cpu.rlim_max = static_cast<rlim_t>(std::ceil(policy.wall_timeout_s)) + 1;
    setrlimit(RLIMIT_CPU, &cpu);
    rlimit fsize{};
    fsize.rlim_cur = fsize.rlim_max = 64ull * 1024 * 1024;
    setrlimit(RLIMIT_FSIZE, &fsize);
    rlimit core{};
    core.rlim_cur = core.rlim_max = 0;
    setrlimit(RLIMIT_CORE, &core);
    rlimit nproc{};
    nproc.rlim_cur = nproc.rlim_max = 64;
    setrlimit(RLIMIT_NPROC, &nproc);

    // Private network namespace: loopback-only, no interfaces up. Best
    // effort; unprivileged hosts fall back to rlimits alone.
    if (!policy.allow_network) unshare(CLONE_NEWNET);

    if (chdir(workdir.c_str()) != 0) bail(errno);

    if (dup2(stdin_fd, 0) < 0 || dup2(stdout_fd, 1) < 0 || dup2(stderr_fd, 2) < 0) {
        bail(errno);
    }

    std::vector<char*> argv;
    argv.reserve(argv_strings.size() + 1);
    for (const auto& s : argv_strings) argv.push_back(const_cast<char*>(s.c_str()));
    argv.push_back(nullptr);

    std::string home = "HOME=" + workdir.string();
    std::vector<std::string> env_strings = {
        "PATH=/usr/local/bin:/usr/bin:/bin",
        home,
        "LC_ALL=C",
        "PYTHONDONTWRITEBYTECODE=1",
        "PYTHONHASHSEED=0",
    };
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);

    execvpe(argv[0], argv.data(), envp.data());
    bail(errno);  // status_fd is CLOEXEC: reaching here means exec failed
    _exit(127);   // unreachable; keeps the noreturn contract visible to the compiler
}

} // namespace

std::string_view to_string(ExitClass e) {
    switch (e) {
        case ExitClass::ok: return "ok";
        case ExitClass::timeout: return "timeout";
        case ExitClass::error: return "error";
    }
    return "error";
}

std::string_view to_string(CodeVerdict v) {
    switch (v) {
        case CodeVerdict::pass: return "pass";
        case CodeVerdict::fail: return "fail";
        case CodeVerdict::unparseable: return "unparseable";
    }
    return "unparseable";
}

CodeVerdict parse_verdict(const std::string& stdout_text, ExitClass exit) {
    if (exit != ExitClass::ok) return CodeVerdict::unparseable;
    size_t end = stdout_text.size();
    while (end > 0) {
        size_t line_start = stdout_text.rfind('\n', end - 1);
        size_t begin = line_start == std::string::npos ? 0 : line_start + 1;
        std::string_view line(stdout_text.data() + begin, end - begin);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.remove_suffix(1);
        }
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) {
            line.remove_prefix(1);
        }
        if (!line.empty()) {
            if (line == "True") return CodeVerdict::pass;
            if (line == "False") return CodeVerdict::fail;
            return CodeVerdict::unparseable;
        }
        if (line_start == std::string::npos) break;
        end = line_start;
    }
    return CodeVerdict::unparseable;
}

CodeAttempt run_sandboxed(const std::string& code, const SandboxPolicy& policy) {
    if (policy.allow_network) {
        throw ContractViolation("SandboxPolicy.allow_network must be false");
    }
    if (policy.wall_timeout_s <= 0) {
        throw ContractViolation("SandboxPolicy.wall_timeout_s must be positive");
    }
    if (policy.interpreter_cmd.empty()) {
        throw ConfigError("SandboxPolicy.interpreter_cmd is empty");
    }

    CodeAttempt attempt;
    attempt.code = code;

    fs::path workdir = make_workdir(policy);
    attempt.workdir = workdir.string();

    bool uses_script_file = false;
    std::vector<std::string> argv;
    argv.reserve(policy.interpreter_cmd.size());
    fs::path script = workdir / "snippet.py";
    for (const auto& element : policy.interpreter_cmd) {
        if (element == "{script}") {
            uses_script_file = true;
            argv.push_back(script.string());
        } else {
            argv.push_back(element);
        }
    }
    if (uses_script_file) {
        std::ofstream out(script, std::ios::binary);
        out << code;
        if (!out) {
            std::error_code ec;
            fs::remove_all(workdir, ec);
            throw EnvironmentError("cannot write snippet file " + script.string());
        }
    }

    Pipe in_pipe, out_pipe, err_pipe, status_pipe;
    fcntl(status_pipe.write_fd, F_SETFD, FD_CLOEXEC);

    pid_t pid = fork();
    if (pid < 0) {
        std::error_code ec;
        fs::remove_all(workdir, ec);
        throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        // Drop the parent-side pipe ends: a surviving copy of the stdin write
        // end would starve interpreters that read the snippet until EOF.
        in_pipe.close_write();
        out_pipe.close_read();
        err_pipe.close_read();
        status_pipe.close_read();
        child_exec(argv, workdir, policy, in_pipe.read_fd, out_pipe.write_fd,
                   err_pipe.write_fd, status_pipe.write_fd);
    }

    in_pipe.close_read();
    out_pipe.close_write();
    err_pipe.close_write();
    status_pipe.close_write();

    if (!uses_script_file) {
        // Deliver the snippet on stdin. Snippets are far below PIPE_BUF-scale
        // limits where this could deadlock against a full stdout pipe.
        ssize_t ignored = write(in_pipe.write_fd, code.data(), code.size());
        (void)ignored;
    }
    in_pipe.close_write();

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(policy.wall_timeout_s);
    bool timed_out = false;
    bool exec_failed = false;
    int exec_errno = 0;

    struct Stream {
        int fd;
        std::string* sink;
        bool open = true;
    };
    Stream streams[] = {
        {out_pipe.read_fd, &attempt.stdout_text},
        {err_pipe.read_fd, &attempt.stderr_text},
        {status_pipe.read_fd, nullptr},
    };

    char buf[4096];
    while (std::any_of(std::begin(streams), std::end(streams),
                       [](const Stream& s) { return s.open; })) {
        pollfd fds[3];
        nfds_t nfds = 0;
        for (auto& s : streams) {
            if (s.open) fds[nfds++] = pollfd{s.fd, POLLIN, 0};
        }
        auto now = std::chrono::steady_clock::now();
        int wait_ms = timed_out ? 200
                                : static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                       deadline - now)
                                                       .count()) +
                                      1;
        if (wait_ms < 0) wait_ms = 0;
        int rc = poll(fds, nfds, wait_ms);
        if (rc < 0 && errno != EINTR) break;
        if (rc == 0) {
            if (!timed_out && std::chrono::steady_clock::now() >= deadline) {
                timed_out = true;
                kill(-pid, SIGKILL);  // whole process group
            } else if (timed_out) {
                break;  // group killed yet pipes held open: stop draining
            }
            continue;
        }
        for (nfds_t i = 0; i < nfds; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            auto it = std::find_if(std::begin(streams), std::end(streams),
                                   [&](const Stream& s) { return s.fd == fds[i].fd; });
            ssize_t n = read(it->fd, buf, sizeof buf);
            if (n > 0) {
                if (it->sink) {
                    if (it->sink->size() < (1u << 20)) it->sink->append(buf, n);
                } else {
                    exec_failed = true;
                    if (n >= static_cast<ssize_t>(sizeof exec_errno)) {
                        std::memcpy(&exec_errno, buf, sizeof exec_errno);
                    }
                }
            } else {
                it->open = false;
            }
        }
        if (!timed_out && std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            kill(-pid, SIGKILL);
        }
    }

    int status = 0;
    waitpid(pid, &status, 0);
    kill(-pid, SIGKILL);  // reap any stragglers in the group

    std::error_code ec;
    fs::remove_all(workdir, ec);

    if (exec_failed) {
        throw EnvironmentError("cannot execute interpreter '" + argv[0] +
                               "': " + std::strerror(exec_errno));
    }

    if (timed_out) attempt.exit = ExitClass::timeout;
    else if (WIFEXITED(status) && WEXITSTATUS(status) == 0) attempt.exit = ExitClass::ok;
    else attempt.exit = ExitClass::error;
    attempt.verdict = parse_verdict(attempt.stdout_text, attempt.exit);
    return attempt;
}

} // namespace t1::sandbox
