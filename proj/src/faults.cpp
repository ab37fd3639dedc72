#include "fiver/faults.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "fiver/error.hpp"

namespace fiver::faults {

namespace {

// Unbiased draw in [0, bound) straight from the engine, so schedules do not
// depend on a standard library's distribution implementation.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace

std::string_view to_string(FaultMode mode) {
    return mode == FaultMode::InFlight ? "in-flight" : "post-write";
}

FaultMode parse_fault_mode(std::string_view text) {
    if (text == "in-flight") return FaultMode::InFlight;
    if (text == "post-write") return FaultMode::PostWrite;
    throw ParseError("unknown fault mode '" + std::string(text) + "'");
}

std::vector<FaultSpec> schedule_faults(std::uint32_t count, std::span<const FileMeta> dataset,
                                       std::uint64_t seed, FaultMode mode) {
    std::vector<FaultSpec> out;
    if (count == 0) return out;
    const std::uint64_t total = total_bytes(dataset);
    if (total == 0 || count > total * 8)
        throw DomainError("cannot place " + std::to_string(count) + " distinct faults in " +
                          std::to_string(total) + " bytes");
    std::vector<std::uint64_t> starts;
    starts.reserve(dataset.size());
    std::uint64_t acc = 0;
    for (const auto& f : dataset) {
        starts.push_back(acc);
        acc += f.size;
    }
    std::mt19937_64 rng(seed);
    std::set<std::tuple<std::uint32_t, std::uint64_t, std::uint8_t>> taken;
    while (out.size() < count) {
        const std::uint64_t pos = draw(rng, total);
        const auto bit = static_cast<std::uint8_t>(draw(rng, 8));
        // Last file whose start is <= pos; empty files are skipped naturally.
        auto it = std::upper_bound(starts.begin(), starts.end(), pos);
        auto index = static_cast<std::uint32_t>(std::distance(starts.begin(), it) - 1);
        while (dataset[index].size == 0) --index;
        const std::uint64_t byte = pos - starts[index];
        if (!taken.emplace(index, byte, bit).second) continue;
        out.push_back({mode, index, byte, bit});
    }
    return out;
}

bool apply_fault(const FaultSpec& spec, std::span<std::byte> window, std::uint64_t window_offset) {
    if (spec.byte_offset < window_offset || spec.byte_offset - window_offset >= window.size())
        return false;
    window[static_cast<std::size_t>(spec.byte_offset - window_offset)] ^=
        static_cast<std::byte>(1u << spec.bit);
    return true;
}

FaultInjector::FaultInjector(std::vector<FaultSpec> faults, bool persistent)
    : faults_(std::move(faults)), fired_(faults_.size(), false), persistent_(persistent) {}

hashio::Buffer FaultInjector::corrupt_in_flight(std::uint32_t file_index, std::uint64_t offset,
                                                const hashio::Buffer& clean) {
    if (faults_.empty() || !clean || clean->empty()) return clean;
    std::lock_guard lk(mu_);
    hashio::Bytes copy;
    for (std::size_t i = 0; i < faults_.size(); ++i) {
        const auto& f = faults_[i];
        if (f.mode != FaultMode::InFlight || f.file_index != file_index) continue;
        if (fired_[i] && !persistent_) continue;
        if (f.byte_offset < offset || f.byte_offset - offset >= clean->size()) continue;
        if (copy.empty()) copy = *clean;
        apply_fault(f, copy, offset);
        fired_[i] = true;
    }
    return copy.empty() ? clean : hashio::make_buffer(std::move(copy));
}

std::vector<FaultSpec> FaultInjector::take_post_write(std::uint32_t file_index,
                                                      std::uint64_t offset, std::uint64_t length) {
    std::vector<FaultSpec> out;
    std::lock_guard lk(mu_);
    for (std::size_t i = 0; i < faults_.size(); ++i) {
        const auto& f = faults_[i];
        if (f.mode != FaultMode::PostWrite || f.file_index != file_index) continue;
        if (fired_[i] && !persistent_) continue;
        if (f.byte_offset < offset || f.byte_offset - offset >= length) continue;
        out.push_back(f);
        fired_[i] = true;
    }
    return out;
}

std::vector<FaultSpec> FaultInjector::unused() const {
    std::lock_guard lk(mu_);
    std::vector<FaultSpec> out;
    for (std::size_t i = 0; i < faults_.size(); ++i)
        if (!fired_[i]) out.push_back(faults_[i]);
    return out;
}

}  // namespace fiver::faults
