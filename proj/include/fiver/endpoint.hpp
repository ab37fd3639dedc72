#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fiver/faults.hpp"
#include "fiver/model.hpp"
#include "fiver/net.hpp"
#include "fiver/pipeline.hpp"
#include "fiver/throttle.hpp"
#include "fiver/wire.hpp"

namespace fiver::endpoint {

// ---- recovery ----

enum class RecoveryAction : std::uint8_t { Verified, Retransfer, Failed };

struct RecoveryState {
    std::uint32_t retry_limit = kDefaultRetryLimit;
    std::map<VerifyKey, std::uint32_t> retries;
    std::deque<FileMeta> pending;  // windows awaiting retransfer, FIFO
    std::map<std::uint64_t, std::uint64_t> retransferred_bytes;  // by file_id
};

/// Compares the two digests of `unit` (a whole file or a window of it).
/// On mismatch the window is queued for retransfer until it has been
/// retransferred `retry_limit` times; one more mismatch fails it.
/// Throws DomainError when the digests use different algorithms.
RecoveryAction compare_and_recover(const Digest& local, const Digest& remote, const FileMeta& unit,
                                   RecoveryState& state);

// ---- receiver ----

struct SessionSummary {
    std::uint64_t files = 0;
    std::uint64_t bytes = 0;
    std::uint64_t retransfers = 0;
    bool completed = false;
    std::string error;
};

struct ReceiverConfig {
    std::filesystem::path root;
    std::uint64_t checksum_rate = 0;  // 0 = use the rate the sender announces
    std::size_t queue_capacity = kDefaultQueueCapacity;
    std::chrono::milliseconds handshake_timeout = wire::kHandshakeTimeout;
    // Test knob: drop the connection after this many windows were digested.
    std::optional<std::size_t> drop_after_windows;
    // Called by Server after each session.
    std::function<void(const SessionSummary&)> on_session;
};

/// Runs one receiver session on an accepted connection.
SessionSummary serve_session(net::Socket socket, const ReceiverConfig& config);

/// Accept loop; one session at a time.
class Server {
public:
    Server(const net::Address& address, ReceiverConfig config);
    ~Server();

    std::uint16_t port() const noexcept { return listener_.port(); }
    // Returns after `max_sessions` sessions, or once stop() ran.
    void serve(std::optional<std::size_t> max_sessions = std::nullopt);
    void stop();
    // serve() on a background thread.
    void start(std::optional<std::size_t> max_sessions = std::nullopt);

    std::vector<SessionSummary> sessions() const;

private:
    net::Listener listener_;
    ReceiverConfig config_;
    std::atomic<bool> stopping_{false};
    mutable std::mutex mu_;
    std::vector<SessionSummary> sessions_;
    std::thread thread_;
};

// ---- sender ----

struct SenderOptions {
    std::filesystem::path source_root;  // dataset paths are relative to it
    bench::ThrottleConfig throttle;
    std::vector<faults::FaultSpec> faults;
    bool faults_persistent = false;
    // Ask the receiver for on-disk digests after the session.
    bool audit = false;
    std::chrono::milliseconds handshake_timeout = wire::kHandshakeTimeout;
};

struct Window {
    std::uint32_t file_index = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    bool retransfer = false;
};

/// Sender side of one session. The strategies drive it through these
/// primitives; the session owns the digester, the digest reader thread and
/// the verification bookkeeping.
class SenderSession {
public:
    // Performs the handshake. Throws HandshakeError or TransportError.
    SenderSession(net::Socket socket, const TransferPlan& plan, const SenderOptions& options);
    ~SenderSession();
    SenderSession(const SenderSession&) = delete;
    SenderSession& operator=(const SenderSession&) = delete;

    const TransferPlan& plan() const noexcept { return plan_; }
    std::size_t file_count() const noexcept { return plan_.dataset.size(); }
    const FileMeta& file(std::uint32_t index) const { return plan_.dataset.at(index); }
    Window whole(std::uint32_t index) const { return {index, 0, file(index).size, false}; }

    void set_route(std::uint32_t index, StrategyChoice route);
    StrategyChoice route(std::uint32_t index) const;

    // FILE_BEGIN + DATA for the window. On the shared route each buffer is
    // queued for the digester right after it was written to the socket.
    void send_window(const Window& w);
    // Queues a read-back digest of the window (reread route).
    void submit_reread(const Window& w);
    void wait_digester_idle();
    // Waits until every digest sent for comparison has been compared.
    void wait_resolved();
    std::optional<Window> next_retransfer();
    // Sends a window taken from next_retransfer() down its file's route.
    void retransfer(const Window& w);

    TransferReport finish();
    TransferReport abort(const std::string& reason, bool transport);

    std::uint64_t queue_high_water_bytes() const { return worker_.high_water_bytes(); }

private:
    struct KeyState {
        std::optional<Digest> local;
        std::optional<Digest> remote;
    };
    struct FileState {
        FileRecord record;
        std::chrono::steady_clock::time_point first_sent;
        bool started = false;
        bool failed = false;
        std::size_t outstanding = 0;
        std::size_t pending = 0;
    };

    FileMeta window_meta(const Window& w) const;
    wire::VerifyMode mode_for(std::uint32_t index) const;
    std::filesystem::path source_path(std::uint32_t index) const;
    void on_local(const UnitTicket& unit, const VerifyKey& key, const Digest& digest);
    void on_remote(const VerifyKey& key, const Digest& digest);
    void resolve_locked(const VerifyKey& key, KeyState& state);
    void reader_loop();
    void fail_locked(const std::string& reason, bool transport);
    void throw_if_broken_locked();
    void join_reader();
    TransferReport build_report();

    TransferPlan plan_;
    SenderOptions options_;
    wire::Channel channel_;
    wire::SessionParams params_;
    std::map<std::uint64_t, std::uint32_t> index_of_;
    faults::FaultInjector injector_;
    bench::TokenBucket net_bucket_;
    std::chrono::steady_clock::time_point started_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::vector<FileState> files_;
    std::map<VerifyKey, KeyState> keys_;
    RecoveryState recovery_;
    std::map<std::uint64_t, Digest> audit_digests_;
    bool ack_ = false;
    bool broken_ = false;
    bool transport_error_ = false;
    std::string error_;
    bool finished_ = false;
    bool reader_done_ = false;

    DigestWorker worker_;
    std::thread reader_;
};

/// Runs `plan` over an established connection with the plan's strategy.
/// Never throws for transfer failures; they are reported.
TransferReport transfer(net::Socket socket, const TransferPlan& plan, const SenderOptions& options);
TransferReport transfer(const net::Address& address, const TransferPlan& plan,
                        const SenderOptions& options);

}  // namespace fiver::endpoint
