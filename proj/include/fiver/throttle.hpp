#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <thread>
#include <utility>

#include "fiver/error.hpp"

namespace fiver::bench {

inline constexpr std::uint64_t kMinThrottleRate = 64 * 1024;
// Digest throughput stands in for a CPU, which cannot bank idle time, so the
// checksum throttle runs without burst credit. The network keeps the default.
inline constexpr double kChecksumBucketSeconds = 0.0;

struct ThrottleConfig {
    std::uint64_t net_rate = 0;       // bytes/s, 0 = unlimited
    std::uint64_t checksum_rate = 0;  // bytes/s, 0 = unlimited

    void validate() const {
        if ((net_rate != 0 && net_rate < kMinThrottleRate) ||
            (checksum_rate != 0 && checksum_rate < kMinThrottleRate))
            throw DomainError("throttle rates must be at least 64 KiB/s");
    }
};

/// Token bucket in virtual-time form. The bucket starts empty, so throughput
/// never exceeds `rate` from construction onwards; idle time accrues at most
/// `bucket_seconds` worth of burst credit.
class TokenBucket {
public:
    using Clock = std::chrono::steady_clock;

    explicit TokenBucket(std::uint64_t rate, double bucket_seconds = 0.1)
        : rate_(rate),
          burst_(std::chrono::duration_cast<Clock::duration>(
              std::chrono::duration<double>(bucket_seconds))),
          tat_(Clock::now()) {}

    // Blocks until `bytes` may pass. Requests larger than the bucket are
    // admitted by paying the debt in sleep.
    void consume(std::uint64_t bytes) { wait(reserve(bytes)); }

    // Books `bytes` and returns the time they are paid off, without waiting.
    // Work done between reserve() and wait() runs inside the payment, so a
    // step costs max(work, bytes / rate) rather than the sum.
    Clock::time_point reserve(std::uint64_t bytes) { return reserve(bytes, Clock::now()); }

    // As above for work that became available at `ready`. A rate-limited
    // server starts it at max(previous finish, ready), so the caller's own
    // scheduling delay after `ready` is not charged.
    Clock::time_point reserve(std::uint64_t bytes, Clock::time_point ready) {
        if (rate_ == 0 || bytes == 0) return Clock::time_point::min();
        if (tat_ < ready - burst_) tat_ = ready - burst_;
        tat_ += std::chrono::duration_cast<Clock::duration>(
            std::chrono::duration<double>(static_cast<double>(bytes) / static_cast<double>(rate_)));
        return tat_;
    }

    static void wait(Clock::time_point due) {
        if (due > Clock::now()) std::this_thread::sleep_until(due);
    }

    std::uint64_t rate() const noexcept { return rate_; }
    bool unlimited() const noexcept { return rate_ == 0; }

private:
    std::uint64_t rate_;
    Clock::duration burst_;
    Clock::time_point tat_;
};

/// Wraps a byte-stream operation so every call is rate-limited. rate 0 is a
/// pass-through.
template <typename Op>
class Throttled {
public:
    Throttled(Op op, std::uint64_t rate) : op_(std::move(op)), bucket_(rate) {}

    decltype(auto) operator()(std::span<const std::byte> bytes) {
        bucket_.consume(bytes.size());
        return op_(bytes);
    }

private:
    Op op_;
    TokenBucket bucket_;
};

template <typename Op>
Throttled<Op> throttle(Op op, std::uint64_t rate) {
    return Throttled<Op>(std::move(op), rate);
}

}  // namespace fiver::bench
