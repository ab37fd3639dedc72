#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fiver/bench.hpp"
#include "fiver/faults.hpp"
#include "fiver/model.hpp"
#include "fiver/report.hpp"

namespace fiver::cli {

// Raw key=value settings; keys use underscores ("block_size").
using Settings = std::map<std::string, std::string>;

struct KeyInfo {
    std::string key;
    std::string default_value;
    std::string help;
};

// Every configurable key, in print order.
const std::vector<KeyInfo>& keys();

// "block_size" -> "--block-size", "FIVER_BLOCK_SIZE".
std::string flag_name(const std::string& key);
std::string env_name(const std::string& key);

Settings defaults();
/// Line-oriented key=value; '#' starts a comment line. Unknown keys and
/// malformed lines throw ParseError naming the line.
Settings parse_config_text(std::string_view text, const std::string& origin = "config");
Settings read_config_file(const std::filesystem::path& file);
// FIVER_* variables that are set. `lookup` defaults to std::getenv.
Settings from_env(const std::function<const char*(const char*)>& lookup = {});

// Later layers override earlier ones.
Settings merge(std::initializer_list<const Settings*> layers);

struct Config {
    std::string address = "127.0.0.1:7878";
    std::string root = ".";
    std::string manifest;

    Strategy strategy = Strategy::Fiver;
    HashAlg hash = HashAlg::MD5;
    std::uint64_t block_size = kDefaultBlockSize;
    std::uint64_t chunk_size = 0;
    std::string hybrid_threshold;  // "", "auto" or a canonical size
    std::size_t queue_capacity = kDefaultQueueCapacity;
    std::uint64_t buffer_size = kDefaultBufferSize;
    std::uint32_t retry_limit = kDefaultRetryLimit;

    std::uint64_t net_rate = 0;
    std::uint64_t checksum_rate = 0;

    std::uint32_t faults = 0;
    faults::FaultMode fault_mode = faults::FaultMode::InFlight;
    std::uint64_t fault_seed = 1;
    bool faults_persistent = false;
    bool audit = false;

    std::string report;
    report::Format report_format = report::Format::Csv;

    std::string spec;
    bench::Order order = bench::Order::AsGiven;
    std::uint64_t seed = 1;
    std::string out = "dataset";

    std::string matrix;
    std::string work_dir = "fiver-bench";
    std::string remote;
    bench::ReportFormat bench_format = bench::ReportFormat::Csv;

    bool once = false;

    bool operator==(const Config&) const = default;
};

inline constexpr std::uint64_t kDefaultChunkedChunkSize = 256 * MiB;

/// Parses and validates merged settings. Invalid values and invalid
/// combinations (a chunk size without fiver-chunked, a hybrid threshold
/// without hybrid) throw ParseError.
Config resolve(const Settings& settings);

// Canonical key=value lines for every key; resolve(parse_config_text(x)) == config.
std::string print_config(const Config& config);

// Effective hybrid threshold; "auto" samples available memory now.
std::uint64_t hybrid_threshold_bytes(const Config& config);

}  // namespace fiver::cli
