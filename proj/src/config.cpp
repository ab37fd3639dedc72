#include "fiver/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "fiver/error.hpp"
#include "fiver/strategies.hpp"

namespace fiver::cli {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ParseError(key + ": expected a non-negative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::out_of_range&) {
        throw ParseError(key + ": value out of range");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError(key + ": expected true or false, got '" + v + "'");
}

std::uint64_t parse_bytes(const std::string& key, const std::string& v) {
    try {
        return parse_size(v);
    } catch (const ParseError& e) {
        throw ParseError(key + ": " + e.what());
    }
}

std::uint64_t parse_rate_value(const std::string& key, const std::string& v) {
    return v == "0" ? 0 : parse_bytes(key, v);
}

const char* yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace

const std::vector<KeyInfo>& keys() {
    static const std::vector<KeyInfo> list = {
        {"address", "127.0.0.1:7878", "host:port to listen on (recv) or connect to (send)"},
        {"root", ".", "receive directory (recv) or dataset directory (send)"},
        {"manifest", "", "dataset manifest; default <root>/manifest.tsv, else every file under root"},
        {"strategy", "fiver", "sequential|file-ppl|block-ppl|fiver|fiver-chunked|hybrid"},
        {"hash", "md5", "md5|sha1|sha256"},
        {"block_size", "256M", "block-ppl unit size"},
        {"chunk_size", "0", "fiver-chunked digest interval (default 256M with fiver-chunked)"},
        {"hybrid_threshold", "", "hybrid: files below this size share buffers; a size or 'auto'"},
        {"queue_capacity", "8", "shared queue depth in buffers"},
        {"buffer_size", "1M", "transfer buffer size"},
        {"retry_limit", "3", "retransfers per file or chunk before it fails"},
        {"net_rate", "0", "transfer throttle in bytes/s, 0 = unlimited"},
        {"checksum_rate", "0", "digest throttle in bytes/s, 0 = unlimited"},
        {"faults", "0", "number of single-bit faults to inject"},
        {"fault_mode", "in-flight", "in-flight|post-write"},
        {"fault_seed", "1", "seed of the fault schedule"},
        {"faults_persistent", "false", "re-inject faults into retransferred ranges"},
        {"audit", "false", "compare stored files with the source after the session"},
        {"report", "", "write the transfer report (send) or result table (bench) here"},
        {"report_format", "csv", "send report: csv|jsonl"},
        {"spec", "", "dataset spec, e.g. 8x512K,8x25M"},
        {"order", "as-given", "shuffled|sorted-interleave|as-given"},
        {"seed", "1", "dataset seed"},
        {"out", "dataset", "dataset output directory"},
        {"matrix", "", "experiment matrix file"},
        {"work_dir", "fiver-bench", "bench datasets and loopback receive area"},
        {"remote", "", "bench against a running receiver at host:port instead of loopback"},
        {"bench_format", "csv", "bench table: csv|table"},
        {"once", "false", "recv: exit after one session"},
    };
    return list;
}

std::string flag_name(const std::string& key) {
    std::string f = "--" + key;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

std::string env_name(const std::string& key) {
    std::string e = "FIVER_" + key;
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::toupper(c); });
    return e;
}

Settings defaults() {
    Settings s;
    for (const auto& k : keys()) s[k.key] = k.default_value;
    return s;
}

Settings parse_config_text(std::string_view text, const std::string& origin) {
    Settings s;
    std::istringstream in{std::string(text)};
    std::string raw;
    for (std::size_t lineno = 1; std::getline(in, raw); ++lineno) {
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string_view::npos) throw ParseError(where + ": expected key=value");
        std::string key(trim(line.substr(0, eq)));
        std::replace(key.begin(), key.end(), '-', '_');
        const bool known = std::any_of(keys().begin(), keys().end(), [&](const KeyInfo& k) { return k.key == key; });
        if (!known) throw ParseError(where + ": unknown key '" + key + "'");
        s[key] = std::string(trim(line.substr(eq + 1)));
    }
    return s;
}

Settings read_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot read config file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), file.string());
}

Settings from_env(const std::function<const char*(const char*)>& lookup) {
    Settings s;
    for (const auto& k : keys()) {
        const std::string name = env_name(k.key);
        const char* v = lookup ? lookup(name.c_str()) : std::getenv(name.c_str());
        if (v) s[k.key] = v;
    }
    return s;
}

Settings merge(std::initializer_list<const Settings*> layers) {
    Settings out;
    for (const Settings* layer : layers)
        for (const auto& [k, v] : *layer) out[k] = v;
    return out;
}

Config resolve(const Settings& settings) {
    const Settings base = defaults();
    const Settings s = merge({&base, &settings});
    auto get = [&](const char* key) -> const std::string& { return s.at(key); };
    Config c;
    auto wrap = [](const char* key, auto&& fn) {
        try {
            return fn();
        } catch (const ParseError& e) {
            const std::string what = e.what();
            if (what.rfind(key, 0) == 0) throw;
            throw ParseError(std::string(key) + ": " + what);
        }
    };
    c.address = get("address");
    c.root = get("root");
    c.manifest = get("manifest");
    c.strategy = wrap("strategy", [&] { return parse_strategy(get("strategy")); });
    c.hash = wrap("hash", [&] { return parse_hash_alg(get("hash")); });
    c.block_size = parse_bytes("block_size", get("block_size"));
    c.chunk_size = get("chunk_size") == "0" ? 0 : parse_bytes("chunk_size", get("chunk_size"));
    c.queue_capacity = parse_count("queue_capacity", get("queue_capacity"));
    c.buffer_size = parse_bytes("buffer_size", get("buffer_size"));
    const auto retry = parse_count("retry_limit", get("retry_limit"));
    if (retry > 1000) throw ParseError("retry_limit: at most 1000");
    c.retry_limit = static_cast<std::uint32_t>(retry);
    c.net_rate = parse_rate_value("net_rate", get("net_rate"));
    c.checksum_rate = parse_rate_value("checksum_rate", get("checksum_rate"));
    const auto nfaults = parse_count("faults", get("faults"));
    if (nfaults > std::numeric_limits<std::uint32_t>::max()) throw ParseError("faults: out of range");
    c.faults = static_cast<std::uint32_t>(nfaults);
    c.fault_mode = wrap("fault_mode", [&] { return faults::parse_fault_mode(get("fault_mode")); });
    c.fault_seed = parse_count("fault_seed", get("fault_seed"));
    c.faults_persistent = parse_bool("faults_persistent", get("faults_persistent"));
    c.audit = parse_bool("audit", get("audit"));
    c.report = get("report");
    c.report_format = wrap("report_format", [&] { return report::parse_format(get("report_format")); });
    c.spec = get("spec");
    if (!c.spec.empty()) wrap("spec", [&] { return parse_dataset_spec(c.spec); });
    c.order = wrap("order", [&] { return bench::parse_order(get("order")); });
    c.seed = parse_count("seed", get("seed"));
    c.out = get("out");
    c.matrix = get("matrix");
    c.work_dir = get("work_dir");
    c.remote = get("remote");
    if (!c.remote.empty()) wrap("remote", [&] { return net::Address::parse(c.remote); });
    c.bench_format = wrap("bench_format", [&] { return bench::parse_report_format(get("bench_format")); });
    c.once = parse_bool("once", get("once"));
    wrap("address", [&] { return net::Address::parse(c.address); });

    const std::string& threshold = get("hybrid_threshold");
    if (threshold.empty() || threshold == "auto")
        c.hybrid_threshold = threshold;
    else
        c.hybrid_threshold = format_size(parse_bytes("hybrid_threshold", threshold));

    if (c.chunk_size != 0 && c.strategy != Strategy::FiverChunked)
        throw ParseError("chunk_size applies only to --strategy fiver-chunked");
    if (c.strategy == Strategy::FiverChunked && c.chunk_size == 0) c.chunk_size = kDefaultChunkedChunkSize;
    if (!c.hybrid_threshold.empty() && c.strategy != Strategy::FiverHybrid)
        throw ParseError("hybrid_threshold applies only to --strategy hybrid");
    if (c.strategy == Strategy::FiverHybrid && c.hybrid_threshold.empty())
        throw ParseError("--strategy hybrid needs --hybrid-threshold <size|auto>");
    if (c.hybrid_threshold != "auto" && !c.hybrid_threshold.empty() && parse_size(c.hybrid_threshold) == 0)
        throw ParseError("hybrid_threshold must be positive");

    // Range checks shared with the transfer plan.
    TransferPlan probe;
    probe.strategy = c.strategy;
    probe.block_size = c.block_size;
    probe.chunk_size = c.chunk_size;
    probe.hybrid_threshold = c.strategy == Strategy::FiverHybrid ? 1 : 0;
    probe.queue_capacity = c.queue_capacity;
    probe.buffer_size = c.buffer_size;
    try {
        probe.validate();
        bench::ThrottleConfig{c.net_rate, c.checksum_rate}.validate();
    } catch (const DomainError& e) {
        throw ParseError(e.what());
    }
    return c;
}

std::string print_config(const Config& c) {
    std::ostringstream o;
    o << "address=" << c.address << '\n'
      << "root=" << c.root << '\n'
      << "manifest=" << c.manifest << '\n'
      << "strategy=" << to_string(c.strategy) << '\n'
      << "hash=" << to_string(c.hash) << '\n'
      << "block_size=" << format_size(c.block_size) << '\n'
      << "chunk_size=" << format_size(c.chunk_size) << '\n'
      << "hybrid_threshold=" << c.hybrid_threshold << '\n'
      << "queue_capacity=" << c.queue_capacity << '\n'
      << "buffer_size=" << format_size(c.buffer_size) << '\n'
      << "retry_limit=" << c.retry_limit << '\n'
      << "net_rate=" << format_size(c.net_rate) << '\n'
      << "checksum_rate=" << format_size(c.checksum_rate) << '\n'
      << "faults=" << c.faults << '\n'
      << "fault_mode=" << faults::to_string(c.fault_mode) << '\n'
      << "fault_seed=" << c.fault_seed << '\n'
      << "faults_persistent=" << yes_no(c.faults_persistent) << '\n'
      << "audit=" << yes_no(c.audit) << '\n'
      << "report=" << c.report << '\n'
      << "report_format=" << (c.report_format == report::Format::Csv ? "csv" : "jsonl") << '\n'
      << "spec=" << c.spec << '\n'
      << "order=" << bench::to_string(c.order) << '\n'
      << "seed=" << c.seed << '\n'
      << "out=" << c.out << '\n'
      << "matrix=" << c.matrix << '\n'
      << "work_dir=" << c.work_dir << '\n'
      << "remote=" << c.remote << '\n'
      << "bench_format=" << (c.bench_format == bench::ReportFormat::Csv ? "csv" : "table") << '\n'
      << "once=" << yes_no(c.once) << '\n';
    return o.str();
}

std::uint64_t hybrid_threshold_bytes(const Config& c) {
    if (c.hybrid_threshold.empty()) return 0;
    if (c.hybrid_threshold == "auto") return strategies::auto_hybrid_threshold();
    return parse_size(c.hybrid_threshold);
}

}  // namespace fiver::cli
