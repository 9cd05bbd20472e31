#include "qudit_qkd/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

namespace qkd::net {

namespace {

struct Pipe {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::uint8_t> data;
    bool closed = false;
};

class LoopbackStream : public ByteStream {
public:
    LoopbackStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out) : in_(std::move(in)), out_(std::move(out)) {}
    ~LoopbackStream() override { shutdown_write(); }

    void write(std::span<const std::uint8_t> bytes) override {
        std::lock_guard lock(out_->mu);
        if (out_->closed)
            throw TransportError("write after shutdown");
        out_->data.insert(out_->data.end(), bytes.begin(), bytes.end());
        out_->cv.notify_all();
    }

    std::size_t read_some(std::span<std::uint8_t> buf) override {
        std::unique_lock lock(in_->mu);
        in_->cv.wait(lock, [&] { return !in_->data.empty() || in_->closed; });
        const std::size_t n = std::min(buf.size(), in_->data.size());
        std::copy_n(in_->data.begin(), n, buf.begin());
        in_->data.erase(in_->data.begin(), in_->data.begin() + n);
        return n;
    }

    void shutdown_write() override {
        std::lock_guard lock(out_->mu);
        out_->closed = true;
        out_->cv.notify_all();
    }

private:
    std::shared_ptr<Pipe> in_, out_;
};

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ~TcpStream() override { ::close(fd_); }

    void write(std::span<const std::uint8_t> bytes) override {
        std::size_t done = 0;
        while (done < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw PeerClosed(std::string("send: ") + std::strerror(errno));
            }
            done += static_cast<std::size_t>(n);
        }
    }

    std::size_t read_some(std::span<std::uint8_t> buf) override {
        for (;;) {
            const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
            if (n >= 0)
                return static_cast<std::size_t>(n);
            if (errno == EINTR)
                continue;
            if (errno == ECONNRESET)
                return 0;
            throw TransportError(std::string("recv: ") + std::strerror(errno));
        }
    }

    void shutdown_write() override { ::shutdown(fd_, SHUT_WR); }

private:
    int fd_;
};

sockaddr_in resolve(const Endpoint& e) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(e.port);
    if (::inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1)
        return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw TransportError("cannot resolve host " + e.host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

}  // namespace

std::pair<StreamPtr, StreamPtr> loopback_pair() {
    auto a = std::make_shared<Pipe>();
    auto b = std::make_shared<Pipe>();
    return {std::make_unique<LoopbackStream>(a, b), std::make_unique<LoopbackStream>(b, a)};
}

Endpoint parse_endpoint(const std::string& text) {
    Endpoint e;
    const auto colon = text.rfind(':');
    std::string port = text;
    if (colon != std::string::npos) {
        if (colon > 0)
            e.host = text.substr(0, colon);
        port = text.substr(colon + 1);
    }
    try {
        std::size_t used = 0;
        const unsigned long p = std::stoul(port, &used);
        if (used != port.size() || p > 65535)
            throw std::invalid_argument("port");
        e.port = static_cast<std::uint16_t>(p);
    } catch (const std::exception&) {
        throw TransportError("bad endpoint '" + text + "', expected host:port");
    }
    return e;
}

TcpListener::TcpListener(const Endpoint& at) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0)
        throw TransportError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(at);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 4) < 0) {
        const std::string err = std::strerror(errno);
        ::close(fd_);
        throw TransportError("listen on " + at.host + ":" + std::to_string(at.port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0)
        ::close(fd_);
}

StreamPtr TcpListener::accept(int timeout_ms) {
    pollfd p{fd_, POLLIN, 0};
    for (;;) {
        const int rc = ::poll(&p, 1, timeout_ms);
        if (rc < 0 && errno == EINTR)
            continue;
        if (rc == 0)
            throw TransportError("timed out waiting for a connection on port " + std::to_string(port_));
        if (rc < 0)
            throw TransportError(std::string("poll: ") + std::strerror(errno));
        break;
    }
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0)
        throw TransportError(std::string("accept: ") + std::strerror(errno));
    return std::make_unique<TcpStream>(fd);
}

StreamPtr tcp_connect(const Endpoint& to, int timeout_ms) {
    const sockaddr_in addr = resolve(to);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0)
            throw TransportError(std::string("socket: ") + std::strerror(errno));
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0)
            return std::make_unique<TcpStream>(fd);
        const int err = errno;
        ::close(fd);
        if ((err != ECONNREFUSED && err != EINTR) || std::chrono::steady_clock::now() >= deadline)
            throw TransportError("connect to " + to.host + ":" + std::to_string(to.port) + ": " +
                                 std::strerror(err));
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

std::string transcript_text(const std::vector<TranscriptEntry>& log) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (const auto& e : log) {
        out += e.direction == Direction::Sent ? "> " : "< ";
        out += wire::type_name(e.frame.type);
        out += ' ';
        for (auto b : e.frame.payload) {
            out += hex[b >> 4];
            out += hex[b & 15];
        }
        out += '\n';
    }
    return out;
}

FramedLink::FramedLink(StreamPtr stream, std::string peer, bool record)
    : stream_(std::move(stream)), peer_(std::move(peer)), record_(record) {}

void FramedLink::send(const wire::Frame& f) {
    stream_->write(wire::encode(f));
    ++sent_;
    if (record_)
        log_.push_back({Direction::Sent, f});
}

wire::Frame FramedLink::receive() {
    std::uint8_t buf[65536];
    for (;;) {
        if (auto f = decoder_.next()) {
            ++received_;
            if (record_)
                log_.push_back({Direction::Received, *f});
            return std::move(*f);
        }
        const std::size_t n = stream_->read_some(buf);
        if (n == 0)
            throw PeerClosed(decoder_.buffered() ? "peer " + peer_ + " closed mid-frame"
                                                 : "peer " + peer_ + " closed the connection");
        decoder_.feed(std::span<const std::uint8_t>(buf, n));
    }
}

void FramedLink::close_write() {
    if (!write_closed_) {
        write_closed_ = true;
        stream_->shutdown_write();
    }
}

}  // namespace qkd::net
