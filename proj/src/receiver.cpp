#include <set>

#include "fiver/endpoint.hpp"
#include "fiver/error.hpp"
#include "fiver/file_io.hpp"

namespace fiver::endpoint {

namespace {

class ReceiverSession {
public:
    ReceiverSession(net::Socket socket, const ReceiverConfig& config)
        : config_(config), channel_(std::move(socket)) {}

    SessionSummary run();

private:
    struct Stored {
        std::uint64_t file_id;
        std::filesystem::path path;
        std::uint64_t size;
    };

    void loop();
    void begin(wire::FileBeginMsg msg);
    void data(hashio::Bytes payload);
    void complete_window();
    void end(const wire::SessionEndMsg& msg);
    void emit(const UnitTicket& unit, const VerifyKey& key, const Digest& digest);
    [[noreturn]] void violation(const std::string& what) { throw ProtocolError(what, channel_.offset()); }

    ReceiverConfig config_;
    wire::Channel channel_;
    wire::SessionParams params_;
    std::unique_ptr<DigestWorker> worker_;

    std::shared_ptr<UnitTicket> current_;
    io::File file_;
    std::uint64_t received_ = 0;
    std::vector<wire::PostWriteFault> post_faults_;

    std::vector<Stored> stored_;
    std::set<std::uint64_t> seen_;
    std::atomic<std::size_t> windows_digested_{0};
    SessionSummary summary_;
};

SessionSummary ReceiverSession::run() {
    try {
        wire::HelloMsg hello;
        hello.checksum_rate = config_.checksum_rate;
        params_ = wire::handshake(channel_, wire::Role::Receiver, hello, config_.handshake_timeout);
        const std::uint64_t rate = config_.checksum_rate ? config_.checksum_rate : params_.peer.checksum_rate;
        worker_ = std::make_unique<DigestWorker>(
            config_.queue_capacity, rate, params_.buffer_size,
            [this](const UnitTicket& u, const VerifyKey& k, const Digest& d) { emit(u, k, d); });
        loop();
        summary_.completed = true;
    } catch (const HandshakeError& e) {
        summary_.error = e.what();
    } catch (const std::exception& e) {
        summary_.error = e.what();
        try {
            channel_.send(wire::FrameType::Error, wire::ErrorMsg{e.what()});
        } catch (const std::exception&) {
        }
    }
    if (worker_) worker_->abort();
    channel_.shutdown();
    summary_.files = stored_.size();
    return summary_;
}

void ReceiverSession::loop() {
    for (;;) {
        auto frame = channel_.recv();
        if (!frame) throw TransportError("sender closed the connection mid-session");
        switch (frame->type) {
            case wire::FrameType::FileBegin: begin(wire::decode_file_begin(frame->payload)); break;
            case wire::FrameType::Data: data(std::move(frame->payload)); break;
            case wire::FrameType::Retransfer:
                wire::decode_retransfer(frame->payload);
                ++summary_.retransfers;
                break;
            case wire::FrameType::SessionEnd: end(wire::decode_session_end(frame->payload)); return;
            case wire::FrameType::Error:
                throw TransportError("sender aborted: " + wire::decode_error(frame->payload).message);
            default:
                violation("unexpected " + std::string(wire::to_string(frame->type)) + " frame from sender");
        }
        worker_->check();
    }
}

void ReceiverSession::begin(wire::FileBeginMsg msg) {
    if (current_) violation("FILE_BEGIN before the previous window completed");
    const FileMeta& meta = msg.meta;
    try {
        meta.validate();
    } catch (const DomainError& e) {
        violation(std::string("invalid FILE_BEGIN: ") + e.what());
    }
    if (meta.hash_alg != params_.hash_alg) violation("FILE_BEGIN hash differs from the session's");
    if (meta.chunk_size > 0 && meta.length > 0 && meta.offset % meta.chunk_size != 0)
        violation("chunked window not aligned to a chunk boundary");
    for (const auto& f : msg.post_write_faults)
        if (f.offset >= meta.size || f.bit > 7) violation("post-write fault outside the file");

    const std::filesystem::path path = io::safe_join(config_.root, meta.path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = meta.offset == 0 && !msg.retransfer;
    file_ = io::File::open_write(path, fresh);
    if (fresh || file_.size() != meta.size) file_.resize(meta.size);
    if (seen_.insert(meta.file_id).second) stored_.push_back({meta.file_id, path, meta.size});

    current_ = std::make_shared<UnitTicket>(UnitTicket{meta, 0, msg.verify, path});
    received_ = 0;
    post_faults_ = std::move(msg.post_write_faults);
    if (meta.length == 0) complete_window();
}

void ReceiverSession::data(hashio::Bytes payload) {
    if (!current_) violation("DATA outside a window");
    const FileMeta& w = current_->window;
    const std::uint64_t n = payload.size();
    if (n > w.length - received_) violation("DATA overruns the announced window");
    const std::uint64_t pos = w.offset + received_;
    const auto buf = hashio::make_buffer(std::move(payload));

    bool dirty = false;
    for (const auto& f : post_faults_) dirty |= f.offset >= pos && f.offset < pos + n;
    if (dirty) {
        hashio::Bytes copy = *buf;
        for (const auto& f : post_faults_)
            faults::apply_fault({faults::FaultMode::PostWrite, 0, f.offset, f.bit}, copy, pos);
        file_.write_all(copy, pos);
    } else {
        file_.write_all(*buf, pos);
    }
    received_ += n;
    summary_.bytes += n;
    const bool last = received_ == w.length;
    if (current_->mode == wire::VerifyMode::Shared) worker_->push_segment(current_, buf, last);
    if (last) complete_window();
}

void ReceiverSession::complete_window() {
    switch (current_->mode) {
        case wire::VerifyMode::Reread: worker_->push_reread(current_); break;
        case wire::VerifyMode::Shared:
            if (current_->window.length == 0) worker_->push_segment(current_, nullptr, true);
            break;
        case wire::VerifyMode::None: break;
    }
    current_.reset();
    post_faults_.clear();
}

void ReceiverSession::emit(const UnitTicket& unit, const VerifyKey& key, const Digest& digest) {
    const FileMeta& w = unit.window;
    if (w.chunk_size > 0 && w.length > 0) {
        channel_.send(wire::FrameType::ChunkDigest,
                      wire::ChunkDigestMsg{w.file_id, static_cast<std::uint32_t>(key.offset / w.chunk_size),
                                           digest.hex()});
    } else {
        channel_.send(wire::FrameType::FileDigest,
                      wire::FileDigestMsg{w.file_id, key.offset, key.length, digest.hex(), false});
    }
    if (key.offset + key.length == w.offset + w.length) {
        const std::size_t done = ++windows_digested_;
        if (config_.drop_after_windows && done >= *config_.drop_after_windows) channel_.shutdown();
    }
}

void ReceiverSession::end(const wire::SessionEndMsg& msg) {
    if (current_) violation("SESSION_END inside a window");
    worker_->wait_idle();
    if (msg.audit) {
        for (const auto& s : stored_)
            channel_.send(wire::FrameType::FileDigest,
                          wire::FileDigestMsg{s.file_id, 0, s.size,
                                              io::digest_file(params_.hash_alg, s.path).hex(), true});
    }
    std::uint64_t bytes = 0;
    for (const auto& s : stored_) bytes += s.size;
    channel_.send(wire::FrameType::SessionEnd, wire::SessionEndMsg{stored_.size(), bytes, false});
}

}  // namespace

SessionSummary serve_session(net::Socket socket, const ReceiverConfig& config) {
    return ReceiverSession(std::move(socket), config).run();
}

Server::Server(const net::Address& address, ReceiverConfig config)
    : listener_(address), config_(std::move(config)) {}

Server::~Server() { stop(); }

void Server::serve(std::optional<std::size_t> max_sessions) {
    for (std::size_t n = 0; !stopping_ && (!max_sessions || n < *max_sessions); ++n) {
        net::Socket socket = listener_.accept();
        if (!socket.valid()) break;
        SessionSummary summary = serve_session(std::move(socket), config_);
        if (config_.on_session) config_.on_session(summary);
        std::lock_guard lk(mu_);
        sessions_.push_back(std::move(summary));
    }
}

void Server::start(std::optional<std::size_t> max_sessions) {
    thread_ = std::thread([this, max_sessions] { serve(max_sessions); });
}

void Server::stop() {
    stopping_ = true;
    listener_.close();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

std::vector<SessionSummary> Server::sessions() const {
    std::lock_guard lk(mu_);
    return sessions_;
}

}  // namespace fiver::endpoint
