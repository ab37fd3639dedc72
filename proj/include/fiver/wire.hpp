#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fiver/model.hpp"
#include "fiver/net.hpp"
#include "fiver/shared_queue.hpp"

namespace fiver::wire {

using hashio::Buffer;
using hashio::Bytes;

// Frame layout: type (1 byte) | payload length (8 bytes, big-endian) | payload.
enum class FrameType : std::uint8_t {
    FileBegin = 0x01,
    Data = 0x02,
    ChunkDigest = 0x03,
    FileDigest = 0x04,
    Retransfer = 0x05,
    SessionEnd = 0x06,
    Error = 0x07,
    Hello = 0x08,
};

std::string_view to_string(FrameType type);
bool is_known_frame_type(std::uint8_t raw);

inline constexpr std::size_t kHeaderSize = 9;
inline constexpr std::uint64_t kMaxControlPayload = 16 * MiB;
inline constexpr std::uint32_t kProtocolVersion = 1;

struct Frame {
    FrameType type = FrameType::Data;
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

struct DecodeLimits {
    std::uint64_t max_control = kMaxControlPayload;
    std::uint64_t max_data = kMaxControlPayload;
};

std::array<std::byte, kHeaderSize> encode_header(FrameType type, std::uint64_t length);
Bytes encode_frame(FrameType type, std::span<const std::byte> payload);
Bytes encode_frame(const Frame& frame);

/// Decodes one frame starting at `offset` and advances it. Returns nullopt
/// when `offset` is exactly at the end of `bytes`. A partial frame, an
/// unknown type or an oversize length throws ProtocolError carrying the
/// offending byte offset.
std::optional<Frame> decode_frame(std::span<const std::byte> bytes, std::size_t& offset,
                                  const DecodeLimits& limits = {});

/// Pulls whole frames off a byte stream. Same error contract as decode_frame,
/// with offsets counted from the start of the stream.
class FrameReader {
public:
    explicit FrameReader(net::ByteSource& source, DecodeLimits limits = {})
        : source_(source), limits_(limits) {}

    std::optional<Frame> next();
    void set_limits(DecodeLimits limits) { limits_ = limits; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    // Returns bytes read; fewer than out.size() only at end of stream.
    std::size_t read_full(std::span<std::byte> out);

    net::ByteSource& source_;
    DecodeLimits limits_;
    std::uint64_t offset_ = 0;
};

// ---- control payloads (UTF-8 JSON objects) ----

// How the receiver digests a window.
enum class VerifyMode : std::uint8_t { Shared, Reread, None };

std::string_view to_string(VerifyMode mode);

struct PostWriteFault {
    std::uint64_t offset = 0;  // absolute file offset
    std::uint8_t bit = 0;

    bool operator==(const PostWriteFault&) const = default;
};

struct FileBeginMsg {
    FileMeta meta;
    VerifyMode verify = VerifyMode::Shared;
    bool retransfer = false;
    // Test hook: bits the receiver flips on its storage path.
    std::vector<PostWriteFault> post_write_faults;

    bool operator==(const FileBeginMsg&) const = default;
};

struct ChunkDigestMsg {
    std::uint64_t file_id = 0;
    std::uint32_t chunk_index = 0;
    std::string digest_hex;

    bool operator==(const ChunkDigestMsg&) const = default;
};

struct FileDigestMsg {
    std::uint64_t file_id = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::string digest_hex;
    bool audit = false;

    bool operator==(const FileDigestMsg&) const = default;
};

struct RetransferMsg {
    std::uint64_t file_id = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    bool operator==(const RetransferMsg&) const = default;
};

struct SessionEndMsg {
    std::uint64_t file_count = 0;
    std::uint64_t total_bytes = 0;
    bool audit = false;

    bool operator==(const SessionEndMsg&) const = default;
};

struct ErrorMsg {
    std::string message;

    bool operator==(const ErrorMsg&) const = default;
};

struct HelloMsg {
    std::uint32_t protocol_version = kProtocolVersion;
    HashAlg hash_alg = HashAlg::MD5;
    std::uint64_t buffer_size = kDefaultBufferSize;
    std::uint64_t checksum_rate = 0;

    bool operator==(const HelloMsg&) const = default;
};

Bytes encode_payload(const FileBeginMsg& msg);
Bytes encode_payload(const ChunkDigestMsg& msg);
Bytes encode_payload(const FileDigestMsg& msg);
Bytes encode_payload(const RetransferMsg& msg);
Bytes encode_payload(const SessionEndMsg& msg);
Bytes encode_payload(const ErrorMsg& msg);
Bytes encode_payload(const HelloMsg& msg);

// Each throws ProtocolError on malformed JSON or missing fields.
FileBeginMsg decode_file_begin(std::span<const std::byte> payload);
ChunkDigestMsg decode_chunk_digest(std::span<const std::byte> payload);
FileDigestMsg decode_file_digest(std::span<const std::byte> payload);
RetransferMsg decode_retransfer(std::span<const std::byte> payload);
SessionEndMsg decode_session_end(std::span<const std::byte> payload);
ErrorMsg decode_error(std::span<const std::byte> payload);
HelloMsg decode_hello(std::span<const std::byte> payload);

/// Duplex framed connection. send() is safe from several threads; recv() is
/// for a single reader.
class Channel {
public:
    explicit Channel(net::Socket socket)
        : socket_(std::move(socket)), reader_(socket_) {}

    template <typename Msg>
    void send(FrameType type, const Msg& msg) {
        send_raw(type, encode_payload(msg));
    }
    void send_raw(FrameType type, std::span<const std::byte> payload);
    void send_data(std::span<const std::byte> payload) { send_raw(FrameType::Data, payload); }

    std::optional<Frame> recv() { return reader_.next(); }
    void set_limits(DecodeLimits limits) { reader_.set_limits(limits); }

    // Bytes consumed by recv() so far.
    std::uint64_t offset() const noexcept { return reader_.offset(); }
    net::Socket& socket() noexcept { return socket_; }
    void shutdown() { socket_.shutdown(); }

private:
    net::Socket socket_;
    FrameReader reader_;
    std::mutex write_mu_;
};

enum class Role : std::uint8_t { Sender, Receiver };

struct SessionParams {
    HelloMsg local;
    HelloMsg peer;
    HashAlg hash_alg = HashAlg::MD5;
    std::uint64_t buffer_size = kDefaultBufferSize;
};

inline constexpr std::chrono::milliseconds kHandshakeTimeout{10'000};

/// Exchanges HELLO frames. The sender speaks first; the receiver adopts the
/// sender's hash algorithm and buffer size. A protocol version mismatch is
/// answered with an ERROR frame and raises HandshakeError, as does a peer
/// that stays silent past `timeout`.
SessionParams handshake(Channel& channel, Role role, const HelloMsg& mine,
                        std::chrono::milliseconds timeout = kHandshakeTimeout);

}  // namespace fiver::wire
