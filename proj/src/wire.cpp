#include "fiver/wire.hpp"

#include <cstring>
#include <json.hpp>
#include <stdexcept>

#include "fiver/error.hpp"

namespace fiver::wire {

using nlohmann::json;

namespace {

constexpr std::uint64_t kMaxJsonInteger = (std::uint64_t{1} << 53) - 1;

void put_u64(json& j, const char* key, std::uint64_t v) {
    if (v <= kMaxJsonInteger)
        j[key] = v;
    else
        j[key] = std::to_string(v);
}

std::uint64_t get_u64(const json& j, const char* key) {
    const json& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ProtocolError(std::string("field '") + key + "' is not a decimal string", 0);
        return std::stoull(s);
    }
    throw ProtocolError(std::string("field '") + key + "' is not an unsigned integer", 0);
}

Bytes to_bytes(const json& j) {
    std::string text = j.dump();
    Bytes out(text.size());
    std::memcpy(out.data(), text.data(), text.size());
    return out;
}

json parse(std::span<const std::byte> payload) {
    const char* begin = reinterpret_cast<const char*>(payload.data());
    try {
        json j = json::parse(begin, begin + payload.size());
        if (!j.is_object()) throw ProtocolError("control payload is not a JSON object", 0);
        return j;
    } catch (const json::parse_error& e) {
        throw ProtocolError("malformed control payload", e.byte);
    }
}

template <typename F>
auto decode_with(std::span<const std::byte> payload, const char* what, F&& f) {
    json j = parse(payload);
    try {
        return f(j);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad ") + what + " payload: " + e.what(), 0);
    } catch (const fiver::ParseError& e) {
        throw ProtocolError(std::string("bad ") + what + " payload: " + e.what(), 0);
    } catch (const std::logic_error& e) {
        throw ProtocolError(std::string("bad ") + what + " payload: " + e.what(), 0);
    }
}

std::uint8_t raw(FrameType t) { return static_cast<std::uint8_t>(t); }

void check_header(std::uint8_t type, std::uint64_t length, std::uint64_t offset,
                  const DecodeLimits& limits) {
    if (!is_known_frame_type(type))
        throw ProtocolError("unknown frame type " + std::to_string(type), offset);
    const std::uint64_t limit =
        type == raw(FrameType::Data) ? limits.max_data : limits.max_control;
    if (length > limit)
        throw ProtocolError("oversize " + std::string(to_string(FrameType{type})) + " frame (" +
                                std::to_string(length) + " > " + std::to_string(limit) + ")",
                            offset);
}

std::uint64_t read_be64(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | std::to_integer<std::uint64_t>(p[i]);
    return v;
}

}  // namespace

std::string_view to_string(FrameType type) {
    switch (type) {
        case FrameType::FileBegin: return "FILE_BEGIN";
        case FrameType::Data: return "DATA";
        case FrameType::ChunkDigest: return "CHUNK_DIGEST";
        case FrameType::FileDigest: return "FILE_DIGEST";
        case FrameType::Retransfer: return "RETRANSFER";
        case FrameType::SessionEnd: return "SESSION_END";
        case FrameType::Error: return "ERROR";
        case FrameType::Hello: return "HELLO";
    }
    return "UNKNOWN";
}

bool is_known_frame_type(std::uint8_t t) { return t >= 0x01 && t <= 0x08; }

std::array<std::byte, kHeaderSize> encode_header(FrameType type, std::uint64_t length) {
    std::array<std::byte, kHeaderSize> h{};
    h[0] = static_cast<std::byte>(type);
    for (int i = 0; i < 8; ++i) h[1 + i] = static_cast<std::byte>(length >> (56 - 8 * i));
    return h;
}

Bytes encode_frame(FrameType type, std::span<const std::byte> payload) {
    Bytes out(kHeaderSize + payload.size());
    auto h = encode_header(type, payload.size());
    std::copy(h.begin(), h.end(), out.begin());
    std::copy(payload.begin(), payload.end(), out.begin() + kHeaderSize);
    return out;
}

Bytes encode_frame(const Frame& frame) { return encode_frame(frame.type, frame.payload); }

std::optional<Frame> decode_frame(std::span<const std::byte> bytes, std::size_t& offset,
                                  const DecodeLimits& limits) {
    if (offset == bytes.size()) return std::nullopt;
    if (bytes.size() - offset < kHeaderSize)
        throw ProtocolError("truncated frame header", bytes.size());
    const auto type = std::to_integer<std::uint8_t>(bytes[offset]);
    const std::uint64_t length = read_be64(bytes.data() + offset + 1);
    check_header(type, length, offset, limits);
    if (bytes.size() - offset - kHeaderSize < length)
        throw ProtocolError("truncated frame payload", bytes.size());
    Frame f;
    f.type = FrameType{type};
    auto body = bytes.subspan(offset + kHeaderSize, static_cast<std::size_t>(length));
    f.payload.assign(body.begin(), body.end());
    offset += kHeaderSize + static_cast<std::size_t>(length);
    return f;
}

std::size_t FrameReader::read_full(std::span<std::byte> out) {
    std::size_t got = 0;
    while (got < out.size()) {
        std::size_t n = source_.read_some(out.subspan(got));
        if (n == 0) break;
        got += n;
        offset_ += n;
    }
    return got;
}

std::optional<Frame> FrameReader::next() {
    std::array<std::byte, kHeaderSize> header;
    const std::uint64_t start = offset_;
    std::size_t got = read_full(header);
    if (got == 0) return std::nullopt;
    if (got < kHeaderSize) throw ProtocolError("truncated frame header", offset_);
    const auto type = std::to_integer<std::uint8_t>(header[0]);
    const std::uint64_t length = read_be64(header.data() + 1);
    check_header(type, length, start, limits_);
    Frame f;
    f.type = FrameType{type};
    f.payload.resize(static_cast<std::size_t>(length));
    if (read_full(f.payload) < length) throw ProtocolError("truncated frame payload", offset_);
    return f;
}

std::string_view to_string(VerifyMode mode) {
    switch (mode) {
        case VerifyMode::Shared: return "shared";
        case VerifyMode::Reread: return "reread";
        case VerifyMode::None: return "none";
    }
    return "?";
}

namespace {

VerifyMode parse_verify_mode(const std::string& s) {
    if (s == "shared") return VerifyMode::Shared;
    if (s == "reread") return VerifyMode::Reread;
    if (s == "none") return VerifyMode::None;
    throw ProtocolError("unknown verify mode '" + s + "'", 0);
}

}  // namespace

Bytes encode_payload(const FileBeginMsg& m) {
    json j;
    put_u64(j, "file_id", m.meta.file_id);
    j["path"] = m.meta.path;
    put_u64(j, "size", m.meta.size);
    put_u64(j, "offset", m.meta.offset);
    put_u64(j, "length", m.meta.length);
    j["hash_alg"] = std::string(to_string(m.meta.hash_alg));
    put_u64(j, "chunk_size", m.meta.chunk_size);
    j["verify"] = std::string(to_string(m.verify));
    if (m.retransfer) j["retransfer"] = true;
    if (!m.post_write_faults.empty()) {
        json faults = json::array();
        for (const auto& f : m.post_write_faults) {
            json e;
            put_u64(e, "offset", f.offset);
            e["bit"] = f.bit;
            faults.push_back(std::move(e));
        }
        j["post_write_faults"] = std::move(faults);
    }
    return to_bytes(j);
}

FileBeginMsg decode_file_begin(std::span<const std::byte> payload) {
    return decode_with(payload, "FILE_BEGIN", [](const json& j) {
        FileBeginMsg m;
        m.meta.file_id = get_u64(j, "file_id");
        m.meta.path = j.at("path").get<std::string>();
        m.meta.size = get_u64(j, "size");
        m.meta.offset = get_u64(j, "offset");
        m.meta.length = get_u64(j, "length");
        m.meta.hash_alg = parse_hash_alg(j.at("hash_alg").get<std::string>());
        m.meta.chunk_size = get_u64(j, "chunk_size");
        m.verify = parse_verify_mode(j.value("verify", std::string("shared")));
        m.retransfer = j.value("retransfer", false);
        if (auto it = j.find("post_write_faults"); it != j.end()) {
            for (const auto& e : *it) {
                unsigned bit = e.at("bit").get<unsigned>();
                if (bit > 7) throw ProtocolError("fault bit out of range", 0);
                m.post_write_faults.push_back({get_u64(e, "offset"), static_cast<std::uint8_t>(bit)});
            }
        }
        return m;
    });
}

Bytes encode_payload(const ChunkDigestMsg& m) {
    json j;
    put_u64(j, "file_id", m.file_id);
    j["chunk_index"] = m.chunk_index;
    j["digest_hex"] = m.digest_hex;
    return to_bytes(j);
}

ChunkDigestMsg decode_chunk_digest(std::span<const std::byte> payload) {
    return decode_with(payload, "CHUNK_DIGEST", [](const json& j) {
        ChunkDigestMsg m;
        m.file_id = get_u64(j, "file_id");
        m.chunk_index = j.at("chunk_index").get<std::uint32_t>();
        m.digest_hex = j.at("digest_hex").get<std::string>();
        return m;
    });
}

Bytes encode_payload(const FileDigestMsg& m) {
    json j;
    put_u64(j, "file_id", m.file_id);
    j["digest_hex"] = m.digest_hex;
    put_u64(j, "offset", m.offset);
    put_u64(j, "length", m.length);
    if (m.audit) j["audit"] = true;
    return to_bytes(j);
}

FileDigestMsg decode_file_digest(std::span<const std::byte> payload) {
    return decode_with(payload, "FILE_DIGEST", [](const json& j) {
        FileDigestMsg m;
        m.file_id = get_u64(j, "file_id");
        m.digest_hex = j.at("digest_hex").get<std::string>();
        m.offset = j.contains("offset") ? get_u64(j, "offset") : 0;
        m.length = j.contains("length") ? get_u64(j, "length") : 0;
        m.audit = j.value("audit", false);
        return m;
    });
}

Bytes encode_payload(const RetransferMsg& m) {
    json j;
    put_u64(j, "file_id", m.file_id);
    put_u64(j, "offset", m.offset);
    put_u64(j, "length", m.length);
    return to_bytes(j);
}

RetransferMsg decode_retransfer(std::span<const std::byte> payload) {
    return decode_with(payload, "RETRANSFER", [](const json& j) {
        return RetransferMsg{get_u64(j, "file_id"), get_u64(j, "offset"), get_u64(j, "length")};
    });
}

Bytes encode_payload(const SessionEndMsg& m) {
    json j;
    put_u64(j, "file_count", m.file_count);
    put_u64(j, "total_bytes", m.total_bytes);
    if (m.audit) j["audit"] = true;
    return to_bytes(j);
}

SessionEndMsg decode_session_end(std::span<const std::byte> payload) {
    return decode_with(payload, "SESSION_END", [](const json& j) {
        SessionEndMsg m;
        m.file_count = j.contains("file_count") ? get_u64(j, "file_count") : 0;
        m.total_bytes = j.contains("total_bytes") ? get_u64(j, "total_bytes") : 0;
        m.audit = j.value("audit", false);
        return m;
    });
}

Bytes encode_payload(const ErrorMsg& m) {
    json j;
    j["message"] = m.message;
    return to_bytes(j);
}

ErrorMsg decode_error(std::span<const std::byte> payload) {
    return decode_with(payload, "ERROR",
                       [](const json& j) { return ErrorMsg{j.value("message", std::string())}; });
}

Bytes encode_payload(const HelloMsg& m) {
    json j;
    j["protocol_version"] = m.protocol_version;
    j["hash_alg"] = std::string(to_string(m.hash_alg));
    put_u64(j, "buffer_size", m.buffer_size);
    if (m.checksum_rate != 0) put_u64(j, "checksum_rate", m.checksum_rate);
    return to_bytes(j);
}

HelloMsg decode_hello(std::span<const std::byte> payload) {
    return decode_with(payload, "HELLO", [](const json& j) {
        HelloMsg m;
        m.protocol_version = j.at("protocol_version").get<std::uint32_t>();
        m.hash_alg = parse_hash_alg(j.at("hash_alg").get<std::string>());
        m.buffer_size = get_u64(j, "buffer_size");
        m.checksum_rate = j.contains("checksum_rate") ? get_u64(j, "checksum_rate") : 0;
        return m;
    });
}

void Channel::send_raw(FrameType type, std::span<const std::byte> payload) {
    auto header = encode_header(type, payload.size());
    std::lock_guard lk(write_mu_);
    socket_.write_all(header, payload);
}

namespace {

HelloMsg await_hello(Channel& channel, std::chrono::milliseconds timeout) {
    channel.socket().set_read_timeout(timeout);
    std::optional<Frame> frame;
    try {
        frame = channel.recv();
    } catch (const TimeoutError&) {
        throw HandshakeError("no HELLO within " + std::to_string(timeout.count()) + " ms");
    } catch (const ProtocolError& e) {
        throw HandshakeError(std::string("handshake failed: ") + e.what());
    }
    channel.socket().set_read_timeout(std::chrono::milliseconds{0});
    if (!frame) throw HandshakeError("peer closed the connection during handshake");
    if (frame->type == FrameType::Error)
        throw HandshakeError("peer rejected handshake: " + decode_error(frame->payload).message);
    if (frame->type != FrameType::Hello)
        throw HandshakeError("expected HELLO, got " + std::string(to_string(frame->type)));
    return decode_hello(frame->payload);
}

void reject(Channel& channel, const std::string& why) {
    try {
        channel.send(FrameType::Error, ErrorMsg{why});
    } catch (const TransportError&) {
    }
    throw HandshakeError(why);
}

}  // namespace

SessionParams handshake(Channel& channel, Role role, const HelloMsg& mine,
                        std::chrono::milliseconds timeout) {
    SessionParams params;
    params.local = mine;
    if (role == Role::Sender) {
        channel.send(FrameType::Hello, mine);
        params.peer = await_hello(channel, timeout);
        if (params.peer.protocol_version != mine.protocol_version)
            reject(channel, "protocol version mismatch: local " +
                                std::to_string(mine.protocol_version) + ", peer " +
                                std::to_string(params.peer.protocol_version));
        params.hash_alg = mine.hash_alg;
        params.buffer_size = mine.buffer_size;
    } else {
        params.peer = await_hello(channel, timeout);
        if (params.peer.protocol_version != mine.protocol_version)
            reject(channel, "protocol version mismatch: local " +
                                std::to_string(mine.protocol_version) + ", peer " +
                                std::to_string(params.peer.protocol_version));
        if (params.peer.buffer_size < 4 * KiB || params.peer.buffer_size > kMaxControlPayload)
            reject(channel, "unsupported buffer size " + std::to_string(params.peer.buffer_size));
        params.hash_alg = params.peer.hash_alg;
        params.buffer_size = params.peer.buffer_size;
        params.local.hash_alg = params.hash_alg;
        params.local.buffer_size = params.buffer_size;
        channel.send(FrameType::Hello, params.local);
    }
    channel.set_limits({kMaxControlPayload, params.buffer_size});
    return params;
}

}  // namespace fiver::wire
