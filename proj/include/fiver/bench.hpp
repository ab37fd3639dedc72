#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fiver/faults.hpp"
#include "fiver/model.hpp"
#include "fiver/net.hpp"
#include "fiver/throttle.hpp"

namespace fiver::bench {

// ---- datasets ----

enum class Order : std::uint8_t { Shuffled, SortedInterleave, AsGiven };

std::string_view to_string(Order order);
Order parse_order(std::string_view text);

/// Shuffled: seeded Fisher-Yates. SortedInterleave: ascending by size, then
/// alternately the smallest and the largest remaining file, so two equally
/// populated size classes alternate small, large, small, ...
std::vector<FileMeta> order_templates(std::vector<FileMeta> templates, Order order, std::uint64_t seed);

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory
    std::uint64_t size = 0;
    std::string digest_hex;

    bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;

    // File ids count from 1 in manifest order.
    std::vector<FileMeta> dataset(HashAlg alg) const;
    std::uint64_t total_bytes() const;
};

inline constexpr const char* kManifestName = "manifest.tsv";

/// Writes seeded pseudo-random files into `out_dir` plus a manifest of
/// `path<TAB>size<TAB>digest_hex` lines. Throws IoError before writing
/// anything when the filesystem lacks room for the dataset.
Manifest generate_dataset(std::string_view spec, Order order, std::uint64_t seed,
                          const std::filesystem::path& out_dir, HashAlg alg = HashAlg::MD5);

void write_manifest(const Manifest& manifest, const std::filesystem::path& file);
// Digest algorithm is implied by the hex length. Throws ParseError.
Manifest read_manifest(const std::filesystem::path& file);

/// Standalone throttled digest pass over the dataset, in seconds.
double checksum_only(std::span<const FileMeta> dataset, const std::filesystem::path& root, HashAlg alg,
                     std::uint64_t rate, std::uint64_t buffer_size = kDefaultBufferSize);

// ---- experiments ----

struct Cell {
    std::string dataset = "4x1M";
    Order order = Order::AsGiven;
    std::uint64_t seed = 1;
    Strategy strategy = Strategy::Fiver;
    HashAlg hash = HashAlg::MD5;
    ThrottleConfig throttle;
    std::uint32_t faults = 0;
    faults::FaultMode fault_mode = faults::FaultMode::InFlight;
    std::uint64_t fault_seed = 1;
    std::uint64_t block_size = kDefaultBlockSize;
    std::uint64_t chunk_size = 0;
    std::uint64_t hybrid_threshold = 0;
    std::uint64_t buffer_size = kDefaultBufferSize;
    std::size_t queue_capacity = kDefaultQueueCapacity;
    std::uint32_t reps = 5;
};

/// One cell description per line, whitespace-separated key=value pairs.
/// A value may list alternatives separated by '|'; the line expands to the
/// cross product. Blank lines and lines starting with '#' are skipped.
/// Keys: dataset order seed strategy hash net_rate checksum_rate faults
/// fault_mode fault_seed block_size chunk_size hybrid_threshold buffer_size
/// queue_capacity reps. Throws ParseError naming the line.
std::vector<Cell> parse_matrix(std::istream& in);

struct Row {
    std::string dataset;
    Strategy strategy = Strategy::Fiver;
    HashAlg hash = HashAlg::MD5;
    std::uint64_t net_rate = 0;
    std::uint64_t checksum_rate = 0;
    std::uint32_t faults = 0;
    std::string rep;  // "1".."N", or "mean" / "min" / "max"
    double t_total = 0;
    double t_transfer = 0;
    double t_checksum = 0;
    std::optional<double> overhead_pct;  // absent when a baseline rounds to zero
    std::uint64_t retransferred_bytes = 0;
    std::uint64_t shared_bytes = 0;
    std::uint64_t reread_bytes = 0;
    std::string outcome;  // verified | retried | failed
};

struct ExperimentOptions {
    std::filesystem::path work_dir;
    // Remote receiver; a loopback receiver under work_dir is used when unset.
    std::optional<net::Address> remote;
};

using RowSink = std::function<void(const Row&)>;

/// Runs every cell strictly one after another. A failed run marks its row
/// failed and the matrix carries on. Rows come out per repetition, then
/// mean/min/max rows when reps > 1.
std::vector<Row> run_experiment(const std::vector<Cell>& cells, const ExperimentOptions& options,
                                const RowSink& on_row = {});

/// Builds the rows of one cell from its per-rep measurements. Times are
/// rounded to the printed precision first, so overhead_pct recomputes
/// exactly from the other columns.
std::vector<Row> summarize_cell(const Cell& cell, std::vector<Row> reps);

enum class ReportFormat : std::uint8_t { Csv, TextTable };

ReportFormat parse_report_format(std::string_view text);

inline constexpr const char* kCsvHeader =
    "dataset,strategy,hash,net_rate,checksum_rate,faults,rep,t_total,t_transfer,t_checksum,"
    "overhead_pct,retransferred_bytes,shared_bytes,reread_bytes,outcome";

void emit_report(std::span<const Row> rows, std::ostream& out, ReportFormat format);
std::string csv_row(const Row& row);

}  // namespace fiver::bench
