#include <algorithm>

#include "fiver/endpoint.hpp"
#include "fiver/error.hpp"
#include "fiver/file_io.hpp"
#include "fiver/strategies.hpp"

namespace fiver::endpoint {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool default_shared(Strategy s) {
    return s == Strategy::Fiver || s == Strategy::FiverChunked || s == Strategy::FiverHybrid;
}

TransferReport unstarted_report(const TransferPlan& plan, const std::string& reason) {
    TransferReport report;
    report.strategy = plan.strategy;
    report.hash_alg = plan.hash_alg;
    report.transport_error = true;
    report.error = reason;
    for (const auto& f : plan.dataset) {
        FileRecord r;
        r.file_id = f.file_id;
        r.path = f.path;
        r.size = f.size;
        r.outcome = VerifyOutcome::Failed;
        report.files.push_back(std::move(r));
    }
    return report;
}

}  // namespace

RecoveryAction compare_and_recover(const Digest& local, const Digest& remote, const FileMeta& unit,
                                   RecoveryState& state) {
    if (local.alg() != remote.alg())
        throw DomainError("cannot compare " + std::string(to_string(local.alg())) + " with " +
                          std::string(to_string(remote.alg())));
    if (local == remote) return RecoveryAction::Verified;
    auto& count = state.retries[{unit.file_id, unit.offset, unit.length}];
    if (count >= state.retry_limit) return RecoveryAction::Failed;
    ++count;
    state.pending.push_back(unit);
    state.retransferred_bytes[unit.file_id] += unit.length;
    return RecoveryAction::Retransfer;
}

SenderSession::SenderSession(net::Socket socket, const TransferPlan& plan,
                             const SenderOptions& options)
    : plan_(plan),
      options_(options),
      channel_(std::move(socket)),
      params_([&] {
          wire::HelloMsg hello;
          hello.hash_alg = plan.hash_alg;
          hello.buffer_size = plan.buffer_size;
          hello.checksum_rate = options.throttle.checksum_rate;
          return wire::handshake(channel_, wire::Role::Sender, hello, options.handshake_timeout);
      }()),
      injector_(options.faults, options.faults_persistent),
      net_bucket_(options.throttle.net_rate),
      started_(Clock::now()),
      worker_(plan.queue_capacity, options.throttle.checksum_rate, plan.buffer_size,
              [this](const UnitTicket& u, const VerifyKey& k, const Digest& d) { on_local(u, k, d); }) {
    recovery_.retry_limit = plan_.retry_limit;
    const StrategyChoice route = default_shared(plan_.strategy) ? StrategyChoice::ConcurrentShared
                                                                : StrategyChoice::SequentialReread;
    files_.resize(plan_.dataset.size());
    for (std::uint32_t i = 0; i < plan_.dataset.size(); ++i) {
        const auto& f = plan_.dataset[i];
        if (!index_of_.emplace(f.file_id, i).second)
            throw DomainError("duplicate file_id " + std::to_string(f.file_id));
        auto& r = files_[i].record;
        r.file_id = f.file_id;
        r.path = f.path;
        r.size = f.size;
        r.route = route;
    }
    reader_ = std::thread([this] { reader_loop(); });
}

SenderSession::~SenderSession() {
    channel_.shutdown();
    worker_.abort();
    join_reader();
}

void SenderSession::join_reader() {
    if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
}

void SenderSession::set_route(std::uint32_t index, StrategyChoice route) {
    std::lock_guard lk(mu_);
    files_.at(index).record.route = route;
}

StrategyChoice SenderSession::route(std::uint32_t index) const {
    std::lock_guard lk(mu_);
    return files_.at(index).record.route;
}

wire::VerifyMode SenderSession::mode_for(std::uint32_t index) const {
    if (!plan_.verify) return wire::VerifyMode::None;
    return route(index) == StrategyChoice::ConcurrentShared ? wire::VerifyMode::Shared
                                                            : wire::VerifyMode::Reread;
}

FileMeta SenderSession::window_meta(const Window& w) const {
    FileMeta meta = plan_.dataset.at(w.file_index);
    if (w.offset > meta.size || w.length > meta.size - w.offset)
        throw DomainError("window outside file " + meta.path);
    meta.offset = w.offset;
    meta.length = w.length;
    meta.hash_alg = params_.hash_alg;
    meta.chunk_size = plan_.strategy == Strategy::FiverChunked ? plan_.chunk_size : 0;
    return meta;
}

std::filesystem::path SenderSession::source_path(std::uint32_t index) const {
    return options_.source_root / plan_.dataset.at(index).path;
}

void SenderSession::fail_locked(const std::string& reason, bool transport) {
    if (!broken_) {
        broken_ = true;
        error_ = reason;
        transport_error_ = transport;
    }
    cv_.notify_all();
}

void SenderSession::throw_if_broken_locked() {
    if (!broken_) return;
    if (transport_error_) throw TransportError(error_);
    throw StateError(error_);
}

void SenderSession::send_window(const Window& w) {
    const FileMeta meta = window_meta(w);
    const wire::VerifyMode mode = mode_for(w.file_index);
    const auto t0 = Clock::now();
    {
        std::lock_guard lk(mu_);
        throw_if_broken_locked();
        auto& fs = files_[w.file_index];
        if (!fs.started) {
            fs.started = true;
            fs.first_sent = t0;
        }
        if (mode != wire::VerifyMode::None) {
            for (const auto& key : WindowDigester::keys_for(meta)) {
                if (!keys_.try_emplace(key).second)
                    throw StateError("window already in flight for " + meta.path);
                ++fs.outstanding;
            }
        }
    }
    if (w.retransfer)
        channel_.send(wire::FrameType::Retransfer, wire::RetransferMsg{meta.file_id, w.offset, w.length});
    wire::FileBeginMsg begin{meta, mode, w.retransfer, {}};
    for (const auto& f : injector_.take_post_write(w.file_index, w.offset, w.length))
        begin.post_write_faults.push_back({f.byte_offset, f.bit});
    channel_.send(wire::FrameType::FileBegin, begin);

    auto ticket = std::make_shared<const UnitTicket>(
        UnitTicket{meta, w.file_index, mode, source_path(w.file_index)});
    if (w.length == 0) {
        if (mode == wire::VerifyMode::Shared) worker_.push_segment(ticket, nullptr, true);
    } else {
        io::File src = io::File::open_read(ticket->path);
        const std::uint64_t end = w.offset + w.length;
        for (std::uint64_t pos = w.offset; pos < end;) {
            const auto n = static_cast<std::size_t>(std::min(plan_.buffer_size, end - pos));
            hashio::Bytes bytes(n);
            src.read_exact(bytes, pos);
            auto buf = hashio::make_buffer(std::move(bytes));
            net_bucket_.consume(n);
            // The digester always sees the clean bytes.
            auto on_wire = injector_.corrupt_in_flight(w.file_index, pos, buf);
            channel_.send_data(*on_wire);
            pos += n;
            if (mode == wire::VerifyMode::Shared) worker_.push_segment(ticket, std::move(buf), pos == end);
        }
    }
    std::lock_guard lk(mu_);
    files_[w.file_index].record.t_transfer += seconds_since(t0);
}

void SenderSession::submit_reread(const Window& w) {
    const wire::VerifyMode mode = mode_for(w.file_index);
    if (mode != wire::VerifyMode::Reread) return;
    worker_.push_reread(std::make_shared<const UnitTicket>(
        UnitTicket{window_meta(w), w.file_index, mode, source_path(w.file_index)}));
}

void SenderSession::wait_digester_idle() {
    worker_.wait_idle();
    std::lock_guard lk(mu_);
    throw_if_broken_locked();
}

void SenderSession::wait_resolved() {
    std::unique_lock lk(mu_);
    for (;;) {
        throw_if_broken_locked();
        if (keys_.empty()) return;
        cv_.wait_for(lk, std::chrono::milliseconds(50));
        worker_.check();
    }
}

std::optional<Window> SenderSession::next_retransfer() {
    std::lock_guard lk(mu_);
    if (recovery_.pending.empty()) return std::nullopt;
    const FileMeta unit = recovery_.pending.front();
    recovery_.pending.pop_front();
    const std::uint32_t index = index_of_.at(unit.file_id);
    --files_[index].pending;
    return Window{index, unit.offset, unit.length, true};
}

void SenderSession::retransfer(const Window& w) {
    send_window(w);
    if (mode_for(w.file_index) == wire::VerifyMode::Reread) {
        worker_.wait_idle();
        submit_reread(w);
    }
}

void SenderSession::on_local(const UnitTicket&, const VerifyKey& key, const Digest& digest) {
    std::lock_guard lk(mu_);
    auto it = keys_.find(key);
    if (it == keys_.end()) return;
    it->second.local = digest;
    if (it->second.remote) resolve_locked(key, it->second);
}

void SenderSession::on_remote(const VerifyKey& key, const Digest& digest) {
    std::lock_guard lk(mu_);
    auto it = keys_.find(key);
    if (it == keys_.end() || it->second.remote)
        throw ProtocolError("unexpected digest for file " + std::to_string(key.file_id) + " range " +
                                std::to_string(key.offset) + "+" + std::to_string(key.length),
                            channel_.offset());
    it->second.remote = digest;
    if (it->second.local) resolve_locked(key, it->second);
}

void SenderSession::resolve_locked(const VerifyKey& key, KeyState& state) {
    const std::uint32_t index = index_of_.at(key.file_id);
    FileMeta unit = plan_.dataset[index];
    unit.offset = key.offset;
    unit.length = key.length;
    const RecoveryAction action = compare_and_recover(*state.local, *state.remote, unit, recovery_);
    keys_.erase(key);
    auto& fs = files_[index];
    --fs.outstanding;
    switch (action) {
        case RecoveryAction::Verified: break;
        case RecoveryAction::Retransfer:
            ++fs.record.mismatches;
            ++fs.pending;
            break;
        case RecoveryAction::Failed:
            ++fs.record.mismatches;
            fs.failed = true;
            break;
    }
    fs.record.retransferred_bytes = recovery_.retransferred_bytes[key.file_id];
    if (fs.outstanding == 0 && fs.pending == 0) fs.record.t_total = seconds_since(fs.first_sent);
    cv_.notify_all();
}

void SenderSession::reader_loop() {
    try {
        for (;;) {
            auto frame = channel_.recv();
            if (!frame) {
                std::lock_guard lk(mu_);
                if (!ack_) fail_locked("receiver closed the connection", true);
                break;
            }
            switch (frame->type) {
                case wire::FrameType::FileDigest: {
                    const auto msg = wire::decode_file_digest(frame->payload);
                    const Digest d = Digest::from_hex(params_.hash_alg, msg.digest_hex);
                    if (msg.audit) {
                        std::lock_guard lk(mu_);
                        audit_digests_.insert_or_assign(msg.file_id, d);
                    } else {
                        on_remote({msg.file_id, msg.offset, msg.length}, d);
                    }
                    break;
                }
                case wire::FrameType::ChunkDigest: {
                    const auto msg = wire::decode_chunk_digest(frame->payload);
                    auto it = index_of_.find(msg.file_id);
                    const std::uint64_t cs = plan_.chunk_size;
                    if (it == index_of_.end() || cs == 0)
                        throw ProtocolError("unexpected CHUNK_DIGEST", channel_.offset());
                    const std::uint64_t size = plan_.dataset[it->second].size;
                    const std::uint64_t offset = std::uint64_t{msg.chunk_index} * cs;
                    if (offset >= size) throw ProtocolError("chunk index out of range", channel_.offset());
                    on_remote({msg.file_id, offset, std::min(cs, size - offset)},
                              Digest::from_hex(params_.hash_alg, msg.digest_hex));
                    break;
                }
                case wire::FrameType::SessionEnd: {
                    wire::decode_session_end(frame->payload);
                    std::lock_guard lk(mu_);
                    ack_ = true;
                    reader_done_ = true;
                    cv_.notify_all();
                    return;
                }
                case wire::FrameType::Error: {
                    const auto msg = wire::decode_error(frame->payload);
                    std::lock_guard lk(mu_);
                    fail_locked("receiver error: " + msg.message, true);
                    reader_done_ = true;
                    return;
                }
                default:
                    throw ProtocolError("unexpected " + std::string(wire::to_string(frame->type)) +
                                            " frame from receiver",
                                        channel_.offset());
            }
        }
    } catch (const std::exception& e) {
        std::lock_guard lk(mu_);
        fail_locked(e.what(), true);
    }
    std::lock_guard lk(mu_);
    reader_done_ = true;
    cv_.notify_all();
}

TransferReport SenderSession::finish() {
    wait_resolved();
    {
        std::lock_guard lk(mu_);
        if (!recovery_.pending.empty()) throw StateError("retransfers left unserviced");
    }
    worker_.close();
    channel_.send(wire::FrameType::SessionEnd,
                  wire::SessionEndMsg{plan_.dataset.size(), total_bytes(plan_.dataset), options_.audit});
    {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return ack_ || broken_; });
        throw_if_broken_locked();
    }
    join_reader();
    if (options_.audit) {
        for (std::uint32_t i = 0; i < files_.size(); ++i) {
            auto it = audit_digests_.find(plan_.dataset[i].file_id);
            files_[i].record.audit_match =
                it != audit_digests_.end() &&
                it->second == io::digest_file(params_.hash_alg, source_path(i));
        }
    }
    finished_ = true;
    return build_report();
}

TransferReport SenderSession::abort(const std::string& reason, bool transport) {
    {
        // The receiver usually explains itself in an ERROR frame just before
        // it hangs up; give the reader a moment to pick that up first.
        std::unique_lock lk(mu_);
        cv_.wait_for(lk, std::chrono::milliseconds(500), [&] { return broken_ || reader_done_; });
        fail_locked(reason, transport);
    }
    channel_.shutdown();
    worker_.abort();
    join_reader();
    return build_report();
}

TransferReport SenderSession::build_report() {
    std::lock_guard lk(mu_);
    TransferReport report;
    report.strategy = plan_.strategy;
    report.hash_alg = params_.hash_alg;
    report.wall_clock = seconds_since(started_);
    report.transport_error = broken_ && transport_error_;
    if (broken_) report.error = error_;
    for (std::uint32_t i = 0; i < files_.size(); ++i) {
        auto& fs = files_[i];
        FileRecord r = fs.record;
        const DigestStats st = worker_.stats(i);
        r.t_checksum = st.busy_seconds;
        r.shared_bytes = st.shared_bytes;
        r.reread_bytes = st.reread_bytes;
        const bool unresolved = !fs.started || fs.outstanding > 0 || fs.pending > 0;
        if (fs.failed || (broken_ && unresolved)) {
            r.outcome = VerifyOutcome::Failed;
            if (fs.started && r.t_total == 0) r.t_total = seconds_since(fs.first_sent);
        } else {
            r.outcome = r.mismatches > 0 ? VerifyOutcome::RetriedThenVerified : VerifyOutcome::Verified;
        }
        report.files.push_back(std::move(r));
    }
    if (!plan_.verify) report.warnings.push_back("verification disabled: transfer-only run");
    if (const auto unused = injector_.unused(); !unused.empty())
        report.warnings.push_back(std::to_string(unused.size()) + " scheduled faults never fired");
    return report;
}

TransferReport transfer(net::Socket socket, const TransferPlan& plan, const SenderOptions& options) {
    plan.validate();
    options.throttle.validate();
    std::unique_ptr<SenderSession> session;
    try {
        session = std::make_unique<SenderSession>(std::move(socket), plan, options);
    } catch (const DomainError&) {
        throw;
    } catch (const std::exception& e) {
        return unstarted_report(plan, e.what());
    }
    try {
        strategies::drive(*session);
        return session->finish();
    } catch (const TransportError& e) {
        return session->abort(e.what(), true);
    } catch (const ProtocolError& e) {
        return session->abort(e.what(), true);
    } catch (const std::exception& e) {
        return session->abort(e.what(), false);
    }
}

TransferReport transfer(const net::Address& address, const TransferPlan& plan,
                        const SenderOptions& options) {
    plan.validate();
    net::Socket socket;
    try {
        socket = net::Socket::connect(address);
    } catch (const TransportError& e) {
        return unstarted_report(plan, e.what());
    }
    return transfer(std::move(socket), plan, options);
}

}  // namespace fiver::endpoint
