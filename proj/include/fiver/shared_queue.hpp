#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "fiver/error.hpp"

namespace fiver::hashio {

using Bytes = std::vector<std::byte>;
// Immutable once enqueued; sender and digester read the same allocation.
using Buffer = std::shared_ptr<const Bytes>;

inline Buffer make_buffer(Bytes bytes) { return std::make_shared<const Bytes>(std::move(bytes)); }

struct UnitWeight {
    template <typename T>
    std::uint64_t operator()(const T&) const noexcept {
        return 0;
    }
};

struct BufferWeight {
    std::uint64_t operator()(const Buffer& b) const noexcept { return b ? b->size() : 0; }
};

// Bounded blocking FIFO between exactly one producer and one consumer.
// - push() blocks while `capacity` elements are queued (back-pressure)
// - pop() blocks while empty; after close() it drains, then returns nullopt
// - Weigh reports element bytes so the producer's lead can be observed
template <typename T, typename Weigh = UnitWeight>
class SharedQueue {
public:
    explicit SharedQueue(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw DomainError("queue capacity must be positive");
    }

    SharedQueue(const SharedQueue&) = delete;
    SharedQueue& operator=(const SharedQueue&) = delete;

    void push(T item) {
        std::unique_lock lk(mu_);
        if (closed_) throw StateError("push on closed queue");
        not_full_.wait(lk, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) throw StateError("queue closed while push was blocked");
        buffered_bytes_ += weigh_(item);
        if (buffered_bytes_ > high_water_bytes_) high_water_bytes_ = buffered_bytes_;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lk(mu_);
        not_empty_.wait(lk, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        buffered_bytes_ -= weigh_(item);
        not_full_.notify_one();
        return item;
    }

    // Idempotent.
    void close() {
        std::lock_guard lk(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    bool closed() const {
        std::lock_guard lk(mu_);
        return closed_;
    }

    std::size_t size() const {
        std::lock_guard lk(mu_);
        return items_.size();
    }

    std::size_t capacity() const noexcept { return capacity_; }

    // Largest number of bytes ever queued at once: the producer's maximum lead.
    std::uint64_t high_water_bytes() const {
        std::lock_guard lk(mu_);
        return high_water_bytes_;
    }

private:
    const std::size_t capacity_;
    [[no_unique_address]] Weigh weigh_;
    mutable std::mutex mu_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    std::uint64_t buffered_bytes_ = 0;
    std::uint64_t high_water_bytes_ = 0;
    bool closed_ = false;
};

}  // namespace fiver::hashio
