#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "fiver/model.hpp"
#include "fiver/shared_queue.hpp"

namespace fiver::faults {

// IN_FLIGHT: after the sender's digest saw the bytes, before the socket.
// POST_WRITE: after the receiver's digest saw the bytes, on the way to storage.
enum class FaultMode : std::uint8_t { InFlight, PostWrite };

std::string_view to_string(FaultMode mode);
FaultMode parse_fault_mode(std::string_view text);

struct FaultSpec {
    FaultMode mode = FaultMode::InFlight;
    std::uint32_t file_index = 0;
    std::uint64_t byte_offset = 0;  // within the target file
    std::uint8_t bit = 0;

    bool operator==(const FaultSpec&) const = default;
    auto operator<=>(const FaultSpec&) const = default;
};

/// Deterministic single-bit faults, uniform over all dataset bytes, no two
/// on the same (file, byte, bit). Throws DomainError when `count` exceeds the
/// number of distinct positions.
std::vector<FaultSpec> schedule_faults(std::uint32_t count, std::span<const FileMeta> dataset,
                                       std::uint64_t seed, FaultMode mode);

/// Flips the spec's bit if its byte falls inside `window`, which starts at
/// absolute file offset `window_offset`. Returns whether a bit was flipped.
bool apply_fault(const FaultSpec& spec, std::span<std::byte> window, std::uint64_t window_offset);

/// Tracks which scheduled faults have fired. Once a fault fires it is spent,
/// so retransferred ranges arrive clean, unless `persistent` is set.
class FaultInjector {
public:
    FaultInjector() = default;
    explicit FaultInjector(std::vector<FaultSpec> faults, bool persistent = false);

    /// IN_FLIGHT hook. Returns `clean` untouched when no fault lands in
    /// [offset, offset + size); otherwise a corrupted copy.
    hashio::Buffer corrupt_in_flight(std::uint32_t file_index, std::uint64_t offset,
                                     const hashio::Buffer& clean);

    /// POST_WRITE faults for a window, marked as spent. The receiver applies them.
    std::vector<FaultSpec> take_post_write(std::uint32_t file_index, std::uint64_t offset,
                                           std::uint64_t length);

    std::vector<FaultSpec> unused() const;
    const std::vector<FaultSpec>& schedule() const noexcept { return faults_; }
    bool empty() const noexcept { return faults_.empty(); }

private:
    std::vector<FaultSpec> faults_;
    std::vector<bool> fired_;
    bool persistent_ = false;
    mutable std::mutex mu_;
};

}  // namespace fiver::faults
