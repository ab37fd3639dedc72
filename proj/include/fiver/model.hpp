#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fiver {

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

enum class HashAlg : std::uint8_t { MD5, SHA1, SHA256 };

std::string_view to_string(HashAlg alg);
HashAlg parse_hash_alg(std::string_view text);
std::size_t digest_length(HashAlg alg);

enum class Strategy : std::uint8_t {
    Sequential,
    FilePipeline,
    BlockPipeline,
    Fiver,
    FiverChunked,
    FiverHybrid,
};

// CLI spellings: sequential, file-ppl, block-ppl, fiver, fiver-chunked, hybrid.
std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

// Per-file verification route.
enum class StrategyChoice : std::uint8_t { ConcurrentShared, SequentialReread };

std::string_view to_string(StrategyChoice choice);

enum class VerifyOutcome : std::uint8_t { Verified, RetriedThenVerified, Failed };

std::string_view to_string(VerifyOutcome outcome);

/// One transferable unit: a whole file, or a window of it when offset/length
/// describe a partial retransfer.
struct FileMeta {
    std::uint64_t file_id = 0;
    std::string path;
    std::uint64_t size = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    HashAlg hash_alg = HashAlg::MD5;
    std::uint64_t chunk_size = 0;  // 0 = whole-file verification

    static FileMeta whole(std::uint64_t file_id, std::string path, std::uint64_t size,
                          HashAlg alg = HashAlg::MD5, std::uint64_t chunk_size = 0);

    // Throws DomainError when an invariant does not hold.
    void validate() const;

    bool operator==(const FileMeta&) const = default;
};

inline constexpr std::uint64_t kMinChunkSize = 1 * MiB;

struct ChunkSpec {
    std::uint64_t file_id = 0;
    std::uint32_t index = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    bool operator==(const ChunkSpec&) const = default;
};

class Digest {
public:
    Digest() = default;
    Digest(HashAlg alg, std::vector<std::byte> value);

    static Digest from_hex(HashAlg alg, std::string_view hex);

    HashAlg alg() const noexcept { return alg_; }
    std::span<const std::byte> value() const noexcept { return value_; }
    std::string hex() const;

    bool operator==(const Digest&) const = default;

private:
    HashAlg alg_ = HashAlg::MD5;
    std::vector<std::byte> value_;
};

inline constexpr std::uint64_t kDefaultBlockSize = 256 * MiB;
inline constexpr std::uint64_t kDefaultBufferSize = 1 * MiB;
inline constexpr std::size_t kDefaultQueueCapacity = 8;
inline constexpr std::uint32_t kDefaultRetryLimit = 3;

struct TransferPlan {
    std::vector<FileMeta> dataset;
    Strategy strategy = Strategy::Fiver;
    HashAlg hash_alg = HashAlg::MD5;
    std::uint64_t block_size = kDefaultBlockSize;
    std::uint64_t chunk_size = 0;
    std::uint64_t hybrid_threshold = 0;
    std::size_t queue_capacity = kDefaultQueueCapacity;
    std::uint64_t buffer_size = kDefaultBufferSize;
    std::uint32_t retry_limit = kDefaultRetryLimit;
    // false runs a transfer-only baseline: no digests are computed or exchanged.
    bool verify = true;

    void validate() const;
};

struct FileRecord {
    std::uint64_t file_id = 0;
    std::string path;
    std::uint64_t size = 0;
    StrategyChoice route = StrategyChoice::ConcurrentShared;
    double t_transfer = 0;
    double t_checksum = 0;
    double t_total = 0;
    VerifyOutcome outcome = VerifyOutcome::Verified;
    std::uint64_t retransferred_bytes = 0;
    std::uint64_t shared_bytes = 0;
    std::uint64_t reread_bytes = 0;
    std::uint32_t mismatches = 0;
    // Set only when an on-disk audit ran; false means the stored file diverges
    // from the source even though verification may have passed.
    std::optional<bool> audit_match;
};

struct ReportTotals {
    double t_transfer = 0;
    double t_checksum = 0;
    double t_total = 0;
    std::uint64_t bytes = 0;
    std::uint64_t retransferred_bytes = 0;
    std::uint64_t shared_bytes = 0;
    std::uint64_t reread_bytes = 0;
    std::size_t verified = 0;
    std::size_t retried = 0;
    std::size_t failed = 0;
    std::size_t audit_mismatches = 0;
};

struct TransferReport {
    Strategy strategy = Strategy::Fiver;
    HashAlg hash_alg = HashAlg::MD5;
    std::vector<FileRecord> files;
    double wall_clock = 0;
    bool transport_error = false;
    std::string error;
    std::vector<std::string> warnings;

    ReportTotals totals() const;
    bool all_verified() const;
};

/// Percentage increase of an algorithm's time over the slower standalone
/// phase. Negative when the algorithm beat that phase.
double overhead(double t_algorithm, double t_checksum, double t_transfer);

// Rounds half away from zero to two decimals, the precision overhead is reported at.
double round2(double value);

/// Contiguous cover of [0, size). chunk_size 0 yields a single chunk.
std::vector<ChunkSpec> chunk_layout(std::uint64_t size, std::uint64_t chunk_size,
                                    std::uint64_t file_id = 0);

// Binary suffixes: K = KiB, M = MiB, G = GiB. Plain digits are bytes.
std::uint64_t parse_size(std::string_view text);
// Shortest exact rendering using the same suffixes ("25M", "512K", "1000").
std::string format_size(std::uint64_t bytes);

/// Expands "<count>x<size>,..." into one template per file, in order. The
/// templates carry sizes only; ids and paths are assigned when materialized.
std::vector<FileMeta> parse_dataset_spec(std::string_view text);
// Run-length re-rendering; parse_dataset_spec(render_dataset_spec(x)) == x.
std::string render_dataset_spec(std::span<const FileMeta> templates);

std::uint64_t total_bytes(std::span<const FileMeta> files);

}  // namespace fiver
