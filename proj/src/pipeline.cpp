#include "fiver/pipeline.hpp"

#include <algorithm>

#include "fiver/error.hpp"
#include "fiver/file_io.hpp"

namespace fiver::endpoint {

namespace {

bool chunked(const FileMeta& w) { return w.chunk_size > 0 && w.length > 0; }

std::uint64_t piece_end_for(const FileMeta& w, std::uint64_t start) {
    const std::uint64_t end = w.offset + w.length;
    if (!chunked(w)) return end;
    return std::min(end, (start / w.chunk_size + 1) * w.chunk_size);
}

}  // namespace

WindowDigester::WindowDigester(const FileMeta& window, Emit emit)
    : window_(window),
      emit_(std::move(emit)),
      state_(window.hash_alg),
      piece_start_(window.offset),
      piece_end_(piece_end_for(window, window.offset)) {
    if (chunked(window_) && window_.offset % window_.chunk_size != 0)
        throw DomainError("chunked window must start on a chunk boundary");
}

std::vector<VerifyKey> WindowDigester::keys_for(const FileMeta& w) {
    if (chunked(w) && w.offset % w.chunk_size != 0)
        throw DomainError("chunked window must start on a chunk boundary");
    std::vector<VerifyKey> keys;
    const std::uint64_t end = w.offset + w.length;
    std::uint64_t pos = w.offset;
    do {
        const std::uint64_t next = piece_end_for(w, pos);
        keys.push_back({w.file_id, pos, next - pos});
        pos = next;
    } while (pos < end);
    return keys;
}

void WindowDigester::close_piece() {
    emit_({window_.file_id, piece_start_, piece_end_ - piece_start_}, state_.finalize());
    state_.reset();
    piece_start_ = piece_end_;
    piece_end_ = piece_end_for(window_, piece_start_);
}

void WindowDigester::consume(std::span<const std::byte> data) {
    if (data.size() > window_.length - consumed_)
        throw StateError("window overrun: " + std::to_string(consumed_ + data.size()) + " > " +
                         std::to_string(window_.length));
    while (!data.empty()) {
        const std::uint64_t pos = window_.offset + consumed_;
        const auto take = static_cast<std::size_t>(std::min<std::uint64_t>(data.size(), piece_end_ - pos));
        state_.update(data.first(take));
        consumed_ += take;
        data = data.subspan(take);
        if (window_.offset + consumed_ == piece_end_ && consumed_ < window_.length) close_piece();
    }
}

void WindowDigester::finish() {
    if (consumed_ != window_.length)
        throw StateError("window incomplete: " + std::to_string(consumed_) + " of " +
                         std::to_string(window_.length));
    close_piece();
}

DigestWorker::DigestWorker(std::size_t capacity, std::uint64_t checksum_rate,
                           std::uint64_t buffer_size, OnDigest on_digest)
    : queue_(capacity),
      bucket_(checksum_rate, bench::kChecksumBucketSeconds),
      buffer_size_(buffer_size),
      on_digest_(std::move(on_digest)),
      thread_([this] { run(); }) {}

DigestWorker::~DigestWorker() {
    queue_.close();
    if (thread_.joinable()) thread_.join();
}

void DigestWorker::rethrow_locked() {
    if (error_) std::rethrow_exception(error_);
    if (aborted_) throw StateError("digest worker stopped");
}

void DigestWorker::push(DigestTask task) {
    {
        std::lock_guard lk(mu_);
        rethrow_locked();
        ++pushed_;
    }
    try {
        queue_.push(std::move(task));
    } catch (const StateError&) {
        std::lock_guard lk(mu_);
        --pushed_;
        rethrow_locked();
        throw;
    }
}

void DigestWorker::push_segment(const Ticket& unit, hashio::Buffer data, bool last) {
    push({unit, data ? std::move(data) : hashio::make_buffer({}), last});
}

void DigestWorker::push_reread(const Ticket& unit) { push({unit, nullptr, true}); }

void DigestWorker::wait_idle() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return done_ == pushed_ || error_ || aborted_; });
    rethrow_locked();
}

void DigestWorker::close() {
    queue_.close();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lk(mu_);
    if (error_) std::rethrow_exception(error_);
}

void DigestWorker::abort() {
    {
        std::lock_guard lk(mu_);
        aborted_ = true;
    }
    cv_.notify_all();
    queue_.close();
    if (thread_.joinable()) thread_.join();
}

void DigestWorker::check() {
    std::lock_guard lk(mu_);
    if (error_) std::rethrow_exception(error_);
}

DigestStats DigestWorker::stats(std::uint32_t file_index) const {
    std::lock_guard lk(mu_);
    auto it = stats_.find(file_index);
    return it == stats_.end() ? DigestStats{} : it->second;
}

void DigestWorker::run() {
    try {
        while (auto task = queue_.pop()) {
            if (aborted_) return;
            const auto t0 = std::chrono::steady_clock::now();
            handle(*task);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            {
                std::lock_guard lk(mu_);
                stats_[task->unit->file_index].busy_seconds += dt;
                ++done_;
            }
            cv_.notify_all();
        }
    } catch (...) {
        {
            std::lock_guard lk(mu_);
            error_ = std::current_exception();
        }
        queue_.close();
        cv_.notify_all();
    }
}

void DigestWorker::handle(const DigestTask& task) {
    const UnitTicket& unit = *task.unit;
    if (!task.data) {
        if (current_) throw StateError("reread job interleaved with an unfinished segment stream");
        reread(unit, task.ready);
        return;
    }
    if (current_ != task.unit) {
        if (current_) throw StateError("segment stream switched before its last segment");
        current_ = task.unit;
        digester_ = std::make_unique<WindowDigester>(
            unit.window, [this, &unit](const VerifyKey& k, const Digest& d) { on_digest_(unit, k, d); });
    }
    const auto due = bucket_.reserve(task.data->size(), task.ready);
    digester_->consume(*task.data);
    bench::TokenBucket::wait(due);
    {
        std::lock_guard lk(mu_);
        stats_[unit.file_index].shared_bytes += task.data->size();
    }
    if (task.last) {
        digester_->finish();
        digester_.reset();
        current_.reset();
    }
}

void DigestWorker::reread(const UnitTicket& unit, bench::TokenBucket::Clock::time_point ready) {
    WindowDigester digester(unit.window, [&](const VerifyKey& k, const Digest& d) { on_digest_(unit, k, d); });
    const std::uint64_t end = unit.window.offset + unit.window.length;
    if (unit.window.length > 0) {
        io::File file = io::File::open_read(unit.path);
        std::vector<std::byte> buf(static_cast<std::size_t>(std::min(buffer_size_, unit.window.length)));
        for (std::uint64_t pos = unit.window.offset; pos < end;) {
            auto n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), end - pos));
            std::span<std::byte> piece(buf.data(), n);
            if (aborted_) throw StateError("digest worker stopped");
            const auto due = bucket_.reserve(n, ready);
            file.read_exact(piece, pos);
            digester.consume(piece);
            bench::TokenBucket::wait(due);
            {
                std::lock_guard lk(mu_);
                stats_[unit.file_index].reread_bytes += n;
            }
            pos += n;
        }
    }
    digester.finish();
}

}  // namespace fiver::endpoint
