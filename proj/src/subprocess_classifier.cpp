#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>

#include "perturbeval/backends.hpp"
#include "perturbeval/error.hpp"
#include "perturbeval/protocol.hpp"

namespace perturbeval {

namespace {

class SubprocessClassifier final : public Classifier {
public:
    SubprocessClassifier(const std::string& command, const Preprocessor& g) : command_(command), g_(g) {
        int fds[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
            throw BackendError("socketpair failed: " + std::string(std::strerror(errno)));
        }
        pid_ = ::fork();
        if (pid_ < 0) {
            ::close(fds[0]);
            ::close(fds[1]);
            throw BackendError("fork failed: " + std::string(std::strerror(errno)));
        }
        if (pid_ == 0) {
            ::dup2(fds[1], STDIN_FILENO);
            ::dup2(fds[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(fds[1]);
        fd_ = fds[0];
        try {
            const auto hs = protocol::decode_handshake(read_line());
            num_classes_ = hs.num_classes;
            shape_ = hs.shape;
        } catch (...) {
            shutdown();
            throw;
        }
    }

    ~SubprocessClassifier() override { shutdown(); }

    SubprocessClassifier(const SubprocessClassifier&) = delete;
    SubprocessClassifier& operator=(const SubprocessClassifier&) = delete;

    std::size_t num_classes() const override { return num_classes_; }
    ImageShape input_shape() const override { return shape_; }
    const Preprocessor& preprocessor() const override { return g_; }
    Backend backend() const override { return Backend::Subprocess; }
    bool concurrent_safe() const override { return false; }

protected:
    std::vector<ProbabilityVector> predict_body(std::span<const ImageTensor> preprocessed) const override {
        std::lock_guard lock(mutex_);
        if (fd_ < 0) throw BackendError("subprocess classifier '" + command_ + "' is no longer running");
        protocol::Request request{next_id_++, {preprocessed.begin(), preprocessed.end()}};
        write_line(protocol::encode_request(request));
        auto response = protocol::decode_response(read_line());
        if (response.id != request.id) {
            throw BackendError("response id " + std::to_string(response.id) + " does not echo request id " +
                               std::to_string(request.id));
        }
        if (!response.error.empty()) throw BackendError("subprocess classifier: " + response.error);
        return std::move(response.probs);
    }

private:
    void write_line(const std::string& line) const {
        std::string payload = line + "\n";
        std::size_t sent = 0;
        while (sent < payload.size()) {
            const ssize_t n = ::send(fd_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw BackendError("write to subprocess classifier failed: " + std::string(std::strerror(errno)));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() const {
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            char chunk[65536];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw BackendError("read from subprocess classifier failed: " + std::string(std::strerror(errno)));
            }
            if (n == 0) throw BackendError("subprocess classifier '" + command_ + "' closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void shutdown() {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
        if (pid_ > 0) {
            int status = 0;
            while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
            }
            pid_ = -1;
        }
    }

    std::string command_;
    Preprocessor g_;
    std::size_t num_classes_ = 0;
    ImageShape shape_;
    pid_t pid_ = -1;
    int fd_ = -1;
    mutable std::mutex mutex_;
    mutable std::string buffer_;
    mutable std::int64_t next_id_ = 0;
};

}  // namespace

ClassifierHandle make_subprocess_classifier(const std::string& command, const Preprocessor& g) {
    return std::make_shared<const SubprocessClassifier>(command, g);
}

}  // namespace perturbeval
