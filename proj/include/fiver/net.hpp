#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace fiver::net {

struct Address {
    std::string host;
    std::uint16_t port = 0;

    // "host:port"; an empty host means all interfaces when listening.
    static Address parse(std::string_view text);
    std::string to_string() const;
};

// Pull side of a byte stream. Returns 0 at end of stream.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual std::size_t read_some(std::span<std::byte> out) = 0;
};

class Socket : public ByteSource {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() override;
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    // Throws TransportError when the peer is unreachable.
    static Socket connect(const Address& address);
    // Connected pair on a local socket, for tests.
    static std::pair<Socket, Socket> pair();

    std::size_t read_some(std::span<std::byte> out) override;
    void write_all(std::span<const std::byte> data);
    // Gathered write of a header and a payload without concatenating them.
    void write_all(std::span<const std::byte> head, std::span<const std::byte> body);

    // Zero clears the timeout. Reads that time out throw TimeoutError.
    void set_read_timeout(std::chrono::milliseconds timeout);
    void shutdown();
    bool valid() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }

private:
    int fd_ = -1;
};

class Listener {
public:
    explicit Listener(const Address& address);
    ~Listener();
    Listener(Listener&& other) noexcept : fd_(std::exchange(other.fd_, -1)), port_(other.port_) {}
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    // Blocks until a peer connects, or returns an invalid socket once close() ran.
    Socket accept();
    void close();
    std::uint16_t port() const noexcept { return port_; }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace fiver::net
