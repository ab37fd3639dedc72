#include "fiver/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "fiver/error.hpp"

namespace fiver::net {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void tune(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

Address Address::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw ParseError("address must be host:port");
    Address a;
    a.host = std::string(text.substr(0, colon));
    if (a.host.size() >= 2 && a.host.front() == '[' && a.host.back() == ']')
        a.host = a.host.substr(1, a.host.size() - 2);
    std::string_view port = text.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (port.empty() || ec != std::errc{} || ptr != port.data() + port.size() || value > 65535)
        throw ParseError("invalid port in '" + std::string(text) + "'");
    a.port = static_cast<std::uint16_t>(value);
    return a;
}

std::string Address::to_string() const { return host + ":" + std::to_string(port); }

Socket::~Socket() {
    if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

Socket Socket::connect(const Address& address) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string host = address.host.empty() ? "127.0.0.1" : address.host;
    std::string port = std::to_string(address.port);
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    std::string last = "no addresses";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last = errno_text("socket");
            continue;
        }
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            ::freeaddrinfo(res);
            tune(fd);
            return Socket(fd);
        }
        last = errno_text("connect");
        ::close(fd);
    }
    ::freeaddrinfo(res);
    throw TransportError("cannot connect to " + address.to_string() + ": " + last);
}

std::pair<Socket, Socket> Socket::pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
        throw TransportError(errno_text("socketpair"));
    return {Socket(fds[0]), Socket(fds[1])};
}

std::size_t Socket::read_some(std::span<std::byte> out) {
    while (true) {
        ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) throw TimeoutError("read timed out");
        if (errno == ECONNRESET) return 0;
        throw TransportError(errno_text("recv"));
    }
}

void Socket::write_all(std::span<const std::byte> data) { write_all(data, {}); }

void Socket::write_all(std::span<const std::byte> head, std::span<const std::byte> body) {
    iovec iov[2] = {{const_cast<std::byte*>(head.data()), head.size()},
                    {const_cast<std::byte*>(body.data()), body.size()}};
    int first = 0;
    while (first < 2) {
        if (iov[first].iov_len == 0) {
            ++first;
            continue;
        }
        msghdr msg{};
        msg.msg_iov = iov + first;
        msg.msg_iovlen = static_cast<std::size_t>(2 - first);
        ssize_t n = ::sendmsg(fd_, &msg, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("send"));
        }
        auto left = static_cast<std::size_t>(n);
        while (first < 2 && left >= iov[first].iov_len) {
            left -= iov[first].iov_len;
            iov[first].iov_len = 0;
            ++first;
        }
        if (first < 2) {
            iov[first].iov_base = static_cast<std::byte*>(iov[first].iov_base) + left;
            iov[first].iov_len -= left;
        }
    }
}

void Socket::set_read_timeout(std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void Socket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Listener::Listener(const Address& address) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string port = std::to_string(address.port);
    const char* host = address.host.empty() ? nullptr : address.host.c_str();
    if (int rc = ::getaddrinfo(host, port.c_str(), &hints, &res); rc != 0)
        throw TransportError(std::string("cannot resolve listen address: ") + ::gai_strerror(rc));
    std::string last = "no addresses";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 8) == 0) {
            sockaddr_storage bound{};
            socklen_t len = sizeof(bound);
            ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
            if (bound.ss_family == AF_INET)
                port_ = ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
            else
                port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port);
            fd_ = fd;
            break;
        }
        last = errno_text("bind");
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw TransportError("cannot listen on " + address.to_string() + ": " + last);
}

Listener::~Listener() {
    if (fd_ >= 0) ::close(fd_);
}

Socket Listener::accept() {
    while (true) {
        int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd >= 0) {
            tune(fd);
            return Socket(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return Socket();
    }
}

void Listener::close() {
    // shutdown() wakes a thread blocked in accept(); the fd itself is
    // released by the destructor.
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

}  // namespace fiver::net
