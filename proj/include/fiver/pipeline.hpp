#pragma once

#include <atomic>
#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "fiver/digest.hpp"
#include "fiver/model.hpp"
#include "fiver/shared_queue.hpp"
#include "fiver/throttle.hpp"
#include "fiver/wire.hpp"

namespace fiver::endpoint {

// Identifies one verifiable range: a whole file, a chunk, a block, or a
// retransferred window. Digests are compared per key.
struct VerifyKey {
    std::uint64_t file_id = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    auto operator<=>(const VerifyKey&) const = default;
};

/// Digests a window of a file, restarting at every absolute chunk boundary
/// when meta.chunk_size > 0. Emits one digest per key in offset order.
class WindowDigester {
public:
    using Emit = std::function<void(const VerifyKey&, const Digest&)>;

    WindowDigester(const FileMeta& window, Emit emit);

    void consume(std::span<const std::byte> data);
    // Throws StateError unless exactly `window.length` bytes were consumed.
    void finish();

    std::uint64_t consumed() const noexcept { return consumed_; }

    // Keys a window produces. Chunked windows must start on a chunk boundary.
    static std::vector<VerifyKey> keys_for(const FileMeta& window);

private:
    void close_piece();

    FileMeta window_;
    Emit emit_;
    hashio::DigestState state_;
    std::uint64_t consumed_ = 0;
    std::uint64_t piece_start_ = 0;
    std::uint64_t piece_end_ = 0;
};

struct UnitTicket {
    FileMeta window;  // offset/length describe the range in flight
    std::uint32_t file_index = 0;
    wire::VerifyMode mode = wire::VerifyMode::Shared;
    std::filesystem::path path;  // local file, read back for Reread
};

using Ticket = std::shared_ptr<const UnitTicket>;

struct DigestTask {
    Ticket unit;
    hashio::Buffer data;  // null for a reread job
    bool last = false;
    std::chrono::steady_clock::time_point ready = std::chrono::steady_clock::now();
};

struct TaskWeight {
    std::uint64_t operator()(const DigestTask& t) const noexcept {
        return t.data ? t.data->size() : 0;
    }
};

struct DigestStats {
    std::uint64_t shared_bytes = 0;
    std::uint64_t reread_bytes = 0;
    double busy_seconds = 0;
};

/// The digester thread. Shared segments arrive in the order the mover sent
/// them; reread jobs read the window back from disk. Both are throttled to
/// the configured checksum rate.
class DigestWorker {
public:
    using OnDigest = std::function<void(const UnitTicket&, const VerifyKey&, const Digest&)>;

    DigestWorker(std::size_t capacity, std::uint64_t checksum_rate, std::uint64_t buffer_size,
                 OnDigest on_digest);
    ~DigestWorker();
    DigestWorker(const DigestWorker&) = delete;
    DigestWorker& operator=(const DigestWorker&) = delete;

    // Block while the queue is full. Rethrow a failure of the worker.
    void push_segment(const Ticket& unit, hashio::Buffer data, bool last);
    void push_reread(const Ticket& unit);

    // Waits until every task pushed so far has been digested.
    void wait_idle();
    // Drains, joins, rethrows a worker failure. Idempotent.
    void close();
    // Stops without draining.
    void abort();
    // Rethrows a failure of the worker thread, if any.
    void check();

    DigestStats stats(std::uint32_t file_index) const;
    std::uint64_t high_water_bytes() const { return queue_.high_water_bytes(); }

private:
    void run();
    void handle(const DigestTask& task);
    void reread(const UnitTicket& unit, bench::TokenBucket::Clock::time_point ready);
    void rethrow_locked();
    void push(DigestTask task);

    hashio::SharedQueue<DigestTask, TaskWeight> queue_;
    bench::TokenBucket bucket_;
    std::uint64_t buffer_size_;
    OnDigest on_digest_;

    Ticket current_;
    std::unique_ptr<WindowDigester> digester_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t pushed_ = 0;
    std::uint64_t done_ = 0;
    std::exception_ptr error_;
    std::map<std::uint32_t, DigestStats> stats_;
    std::atomic<bool> aborted_{false};
    std::thread thread_;
};

}  // namespace fiver::endpoint
