#include <gtest/gtest.h>

#include "fiver/throttle.hpp"
#include "support.hpp"

using namespace fiver;
using namespace fiver::bench;
using fiver::testing::seconds_since;

TEST(Throttle, HundredMiBAtFiftyTakesTwoSeconds) {
    std::uint64_t seen = 0;
    auto op = throttle([&](std::span<const std::byte> b) { seen += b.size(); }, 50 * MiB);
    const std::vector<std::byte> buf(1 * MiB);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 100; ++i) op(buf);
    const double t = seconds_since(t0);
    EXPECT_EQ(seen, 100 * MiB);
    EXPECT_NEAR(t, 2.0, 0.1);
}

TEST(Throttle, RateZeroPassesThrough) {
    auto op = throttle([](std::span<const std::byte> b) { return b.size(); }, 0);
    const std::vector<std::byte> buf(1 * MiB);
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t total = 0;
    for (int i = 0; i < 1000; ++i) total += op(buf);
    EXPECT_EQ(total, 1000 * MiB);
    EXPECT_LT(seconds_since(t0), 0.5);
}

TEST(Throttle, StartsEmptySoFirstCallsArePaced) {
    TokenBucket bucket(10 * MiB);
    const auto t0 = std::chrono::steady_clock::now();
    bucket.consume(1 * MiB);
    EXPECT_GE(seconds_since(t0), 0.09);
}

TEST(Throttle, IdleCreditIsCapped) {
    TokenBucket bucket(10 * MiB, 0.1);
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
    const auto t0 = std::chrono::steady_clock::now();
    bucket.consume(3 * MiB);
    EXPECT_NEAR(seconds_since(t0), 0.2, 0.05);
}

TEST(Throttle, WorkBetweenReserveAndWaitIsNotChargedTwice) {
    TokenBucket bucket(10 * MiB, 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 3; ++i) {
        const auto due = bucket.reserve(1 * MiB);
        std::this_thread::sleep_for(std::chrono::milliseconds(40));
        TokenBucket::wait(due);
    }
    EXPECT_NEAR(seconds_since(t0), 0.3, 0.04);
}

TEST(Throttle, ReadyTimeAnchorsScheduleWithoutIdleCredit) {
    using namespace std::chrono_literals;
    TokenBucket bucket(10 * MiB, 0.0);
    const auto t0 = TokenBucket::Clock::now();
    const auto a = bucket.reserve(1 * MiB, t0);
    std::this_thread::sleep_for(30ms);  // a late caller is not charged for its delay
    const auto b = bucket.reserve(1 * MiB, t0);
    EXPECT_NEAR(std::chrono::duration<double>(b - a).count(), 0.1, 1e-6);
    const auto later = b + 500ms;  // work arriving after an idle gap starts when it arrives
    const auto c = bucket.reserve(1 * MiB, later);
    EXPECT_NEAR(std::chrono::duration<double>(c - later).count(), 0.1, 1e-6);
}

TEST(Throttle, ValidateRejectsTinyRates) {
    EXPECT_NO_THROW((ThrottleConfig{0, 0}.validate()));
    EXPECT_NO_THROW((ThrottleConfig{kMinThrottleRate, 0}.validate()));
    EXPECT_THROW((ThrottleConfig{1000, 0}.validate()), DomainError);
    EXPECT_THROW((ThrottleConfig{0, 1}.validate()), DomainError);
}
