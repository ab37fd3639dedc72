#include "fiver/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "fiver/digest.hpp"
#include "fiver/endpoint.hpp"
#include "fiver/error.hpp"
#include "fiver/file_io.hpp"
#include "fiver/report.hpp"

namespace fiver::bench {

namespace {

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

std::string file_name(std::size_t index, std::uint64_t size) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "f%05zu_%s.bin", index, format_size(size).c_str());
    return buf;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
    std::uint64_t v = 0;
    if (text.empty()) throw ParseError("empty " + what);
    for (char c : text) {
        if (c < '0' || c > '9') throw ParseError("bad " + what + " '" + std::string(text) + "'");
        if (v > (std::numeric_limits<std::uint64_t>::max() - (c - '0')) / 10)
            throw ParseError(what + " out of range");
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

// Rate values: sizes per second, "0" for unlimited.
std::uint64_t parse_rate(std::string_view text) { return text == "0" ? 0 : parse_size(text); }

double round3(double v) { return std::stod(report::format_seconds(v)); }

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

int outcome_rank(const std::string& outcome) {
    if (outcome == "failed") return 2;
    if (outcome == "retried") return 1;
    return 0;
}

std::string outcome_of(const TransferReport& r) {
    const ReportTotals t = r.totals();
    if (r.transport_error || !r.error.empty() || t.failed > 0) return "failed";
    return t.retried > 0 ? "retried" : "verified";
}

std::string dataset_label(const Cell& c) {
    return c.order == Order::AsGiven ? c.dataset : c.dataset + "/" + std::string(to_string(c.order));
}

void fill_overhead(Row& r) {
    r.overhead_pct.reset();
    try {
        r.overhead_pct = round2(overhead(r.t_total, r.t_checksum, r.t_transfer));
    } catch (const DomainError&) {
    }
}

}  // namespace

std::string_view to_string(Order order) {
    switch (order) {
        case Order::Shuffled: return "shuffled";
        case Order::SortedInterleave: return "sorted-interleave";
        case Order::AsGiven: return "as-given";
    }
    return "?";
}

Order parse_order(std::string_view text) {
    if (text == "shuffled") return Order::Shuffled;
    if (text == "sorted-interleave") return Order::SortedInterleave;
    if (text == "as-given") return Order::AsGiven;
    throw ParseError("unknown order '" + std::string(text) + "' (shuffled, sorted-interleave, as-given)");
}

std::vector<FileMeta> order_templates(std::vector<FileMeta> templates, Order order, std::uint64_t seed) {
    switch (order) {
        case Order::AsGiven: return templates;
        case Order::Shuffled: {
            std::mt19937_64 rng(seed);
            for (std::size_t i = templates.size(); i > 1; --i)
                std::swap(templates[i - 1], templates[draw(rng, i)]);
            return templates;
        }
        case Order::SortedInterleave: {
            std::stable_sort(templates.begin(), templates.end(),
                             [](const FileMeta& a, const FileMeta& b) { return a.size < b.size; });
            std::vector<FileMeta> out;
            out.reserve(templates.size());
            std::size_t lo = 0, hi = templates.size();
            for (bool small = true; lo < hi; small = !small)
                out.push_back(small ? templates[lo++] : templates[--hi]);
            return out;
        }
    }
    return templates;
}

std::vector<FileMeta> Manifest::dataset(HashAlg alg) const {
    std::vector<FileMeta> out;
    out.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i)
        out.push_back(FileMeta::whole(i + 1, entries[i].path, entries[i].size, alg));
    return out;
}

std::uint64_t Manifest::total_bytes() const {
    std::uint64_t total = 0;
    for (const auto& e : entries) total += e.size;
    return total;
}

Manifest generate_dataset(std::string_view spec, Order order, std::uint64_t seed,
                          const std::filesystem::path& out_dir, HashAlg alg) {
    const auto templates = order_templates(parse_dataset_spec(spec), order, seed);
    const std::uint64_t total = fiver::total_bytes(templates);
    std::filesystem::create_directories(out_dir);
    const auto space = std::filesystem::space(out_dir);
    if (space.available < total + MiB)
        throw IoError("not enough free space in " + out_dir.string() + ": need " + format_size(total) +
                      ", have " + std::to_string(space.available) + " bytes");

    Manifest manifest;
    manifest.root = out_dir;
    std::vector<std::byte> buf(kDefaultBufferSize);
    for (std::size_t i = 0; i < templates.size(); ++i) {
        const std::uint64_t size = templates[i].size;
        const std::string name = file_name(i, size);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(i)};
        std::mt19937_64 rng(seq);
        io::File file = io::File::open_write(out_dir / name, true);
        hashio::DigestState state(alg);
        for (std::uint64_t pos = 0; pos < size;) {
            const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), size - pos));
            for (std::size_t k = 0; k < n; k += 8) {
                const std::uint64_t word = rng();
                std::memcpy(buf.data() + k, &word, std::min<std::size_t>(8, n - k));
            }
            std::span<const std::byte> piece(buf.data(), n);
            file.write_all(piece, pos);
            state.update(piece);
            pos += n;
        }
        manifest.entries.push_back({name, size, state.finalize().hex()});
    }
    write_manifest(manifest, out_dir / kManifestName);
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    for (const auto& e : manifest.entries) out << e.path << '\t' << e.size << '\t' << e.digest_hex << '\n';
    if (!out.flush()) throw IoError("cannot write " + file.string());
}

Manifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    Manifest manifest;
    manifest.root = file.parent_path();
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        const std::string where = file.string() + ":" + std::to_string(lineno);
        if (fields.size() != 3) throw ParseError(where + ": expected path<TAB>size<TAB>digest");
        const auto& hex = fields[2];
        HashAlg alg;
        if (hex.size() == 32) alg = HashAlg::MD5;
        else if (hex.size() == 40) alg = HashAlg::SHA1;
        else if (hex.size() == 64) alg = HashAlg::SHA256;
        else throw ParseError(where + ": digest has unexpected length");
        Digest::from_hex(alg, hex);
        manifest.entries.push_back({fields[0], parse_u64(fields[1], "size at " + where), hex});
    }
    return manifest;
}

double checksum_only(std::span<const FileMeta> dataset, const std::filesystem::path& root, HashAlg alg,
                     std::uint64_t rate, std::uint64_t buffer_size) {
    const auto t0 = std::chrono::steady_clock::now();
    TokenBucket bucket(rate, kChecksumBucketSeconds);
    const auto ready = TokenBucket::Clock::now();
    std::vector<std::byte> buf(static_cast<std::size_t>(buffer_size));
    for (const auto& f : dataset) {
        io::File file = io::File::open_read(root / f.path);
        hashio::DigestState state(alg);
        for (std::uint64_t pos = 0; pos < f.size;) {
            const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), f.size - pos));
            std::span<std::byte> piece(buf.data(), n);
            const auto due = bucket.reserve(n, ready);
            file.read_exact(piece, pos);
            state.update(piece);
            TokenBucket::wait(due);
            pos += n;
        }
        state.finalize();
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Cell> parse_matrix(std::istream& in) {
    std::vector<Cell> cells;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        std::istringstream words(line);
        std::vector<std::pair<std::string, std::vector<std::string>>> keys;
        std::string word;
        while (words >> word) {
            if (keys.empty() && word.front() == '#') break;
            const auto eq = word.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ParseError("matrix line " + std::to_string(lineno) + ": expected key=value, got '" + word + "'");
            keys.emplace_back(word.substr(0, eq), split(std::string_view(word).substr(eq + 1), '|'));
        }
        if (keys.empty()) continue;

        std::vector<Cell> expanded{Cell{}};
        for (const auto& [key, values] : keys) {
            std::vector<Cell> next;
            for (const Cell& base : expanded) {
                for (const auto& v : values) {
                    Cell c = base;
                    try {
                        if (key == "dataset") { parse_dataset_spec(v); c.dataset = v; }
                        else if (key == "order") c.order = parse_order(v);
                        else if (key == "seed") c.seed = parse_u64(v, "seed");
                        else if (key == "strategy") c.strategy = parse_strategy(v);
                        else if (key == "hash") c.hash = parse_hash_alg(v);
                        else if (key == "net_rate") c.throttle.net_rate = parse_rate(v);
                        else if (key == "checksum_rate") c.throttle.checksum_rate = parse_rate(v);
                        else if (key == "faults") c.faults = static_cast<std::uint32_t>(parse_u64(v, "faults"));
                        else if (key == "fault_mode") c.fault_mode = faults::parse_fault_mode(v);
                        else if (key == "fault_seed") c.fault_seed = parse_u64(v, "fault_seed");
                        else if (key == "block_size") c.block_size = parse_size(v);
                        else if (key == "chunk_size") c.chunk_size = parse_size(v);
                        else if (key == "hybrid_threshold") c.hybrid_threshold = parse_size(v);
                        else if (key == "buffer_size") c.buffer_size = parse_size(v);
                        else if (key == "queue_capacity") c.queue_capacity = parse_u64(v, "queue_capacity");
                        else if (key == "reps") c.reps = static_cast<std::uint32_t>(parse_u64(v, "reps"));
                        else throw ParseError("unknown key '" + key + "'");
                    } catch (const Error& e) {
                        throw ParseError("matrix line " + std::to_string(lineno) + ": " + e.what());
                    }
                    next.push_back(std::move(c));
                }
            }
            expanded = std::move(next);
        }
        for (auto& c : expanded) {
            if (c.reps == 0) throw ParseError("matrix line " + std::to_string(lineno) + ": reps must be positive");
            try {
                c.throttle.validate();
            } catch (const DomainError& e) {
                throw ParseError("matrix line " + std::to_string(lineno) + ": " + e.what());
            }
            cells.push_back(std::move(c));
        }
    }
    return cells;
}

std::vector<Row> summarize_cell(const Cell& cell, std::vector<Row> reps) {
    for (auto& r : reps) {
        r.t_total = round3(r.t_total);
        r.t_transfer = round3(r.t_transfer);
        r.t_checksum = round3(r.t_checksum);
        fill_overhead(r);
    }
    if (reps.size() <= 1) return reps;

    Row base = reps.front();
    Row mean = base, lo = base, hi = base;
    mean.rep = "mean";
    lo.rep = "min";
    hi.rep = "max";
    double sum_total = 0, sum_xfer = 0, sum_cks = 0;
    double sum_retx = 0, sum_shared = 0, sum_reread = 0;
    std::string worst = "verified";
    for (const auto& r : reps) {
        sum_total += r.t_total;
        sum_xfer += r.t_transfer;
        sum_cks += r.t_checksum;
        sum_retx += static_cast<double>(r.retransferred_bytes);
        sum_shared += static_cast<double>(r.shared_bytes);
        sum_reread += static_cast<double>(r.reread_bytes);
        lo.t_total = std::min(lo.t_total, r.t_total);
        lo.t_transfer = std::min(lo.t_transfer, r.t_transfer);
        lo.t_checksum = std::min(lo.t_checksum, r.t_checksum);
        lo.retransferred_bytes = std::min(lo.retransferred_bytes, r.retransferred_bytes);
        lo.shared_bytes = std::min(lo.shared_bytes, r.shared_bytes);
        lo.reread_bytes = std::min(lo.reread_bytes, r.reread_bytes);
        hi.t_total = std::max(hi.t_total, r.t_total);
        hi.t_transfer = std::max(hi.t_transfer, r.t_transfer);
        hi.t_checksum = std::max(hi.t_checksum, r.t_checksum);
        hi.retransferred_bytes = std::max(hi.retransferred_bytes, r.retransferred_bytes);
        hi.shared_bytes = std::max(hi.shared_bytes, r.shared_bytes);
        hi.reread_bytes = std::max(hi.reread_bytes, r.reread_bytes);
        if (outcome_rank(r.outcome) > outcome_rank(worst)) worst = r.outcome;
    }
    const double n = static_cast<double>(reps.size());
    mean.t_total = round3(sum_total / n);
    mean.t_transfer = round3(sum_xfer / n);
    mean.t_checksum = round3(sum_cks / n);
    mean.retransferred_bytes = static_cast<std::uint64_t>(std::llround(sum_retx / n));
    mean.shared_bytes = static_cast<std::uint64_t>(std::llround(sum_shared / n));
    mean.reread_bytes = static_cast<std::uint64_t>(std::llround(sum_reread / n));
    for (Row* r : {&mean, &lo, &hi}) {
        r->outcome = worst;
        fill_overhead(*r);
    }
    (void)cell;
    reps.push_back(mean);
    reps.push_back(lo);
    reps.push_back(hi);
    return reps;
}

std::vector<Row> run_experiment(const std::vector<Cell>& cells, const ExperimentOptions& options,
                                const RowSink& on_row) {
    std::filesystem::create_directories(options.work_dir);
    const auto recv_root = options.work_dir / "recv";
    std::unique_ptr<endpoint::Server> server;
    net::Address address;
    if (options.remote) {
        address = *options.remote;
    } else {
        std::filesystem::create_directories(recv_root);
        endpoint::ReceiverConfig rc;
        rc.root = recv_root;
        server = std::make_unique<endpoint::Server>(net::Address{"127.0.0.1", 0}, rc);
        server->start();
        address = {"127.0.0.1", server->port()};
    }

    std::map<std::string, Manifest> datasets;
    auto dataset_for = [&](const Cell& c) -> const Manifest& {
        const std::string key = c.dataset + "|" + std::string(to_string(c.order)) + "|" + std::to_string(c.seed);
        if (auto it = datasets.find(key); it != datasets.end()) return it->second;
        const auto dir = options.work_dir / ("data-" + hashio::digest_bytes(HashAlg::MD5, key).hex().substr(0, 12));
        Manifest m;
        const auto expected = order_templates(parse_dataset_spec(c.dataset), c.order, c.seed);
        bool reuse = false;
        if (std::filesystem::exists(dir / kManifestName)) {
            m = read_manifest(dir / kManifestName);
            reuse = m.entries.size() == expected.size();
            for (std::size_t i = 0; reuse && i < expected.size(); ++i)
                reuse = m.entries[i].size == expected[i].size &&
                        std::filesystem::exists(dir / m.entries[i].path) &&
                        std::filesystem::file_size(dir / m.entries[i].path) == expected[i].size;
        }
        if (!reuse) m = generate_dataset(c.dataset, c.order, c.seed, dir);
        return datasets.emplace(key, std::move(m)).first->second;
    };

    auto run_once = [&](const Cell& c, const Manifest& m, bool verify) {
        if (!options.remote) {
            std::filesystem::remove_all(recv_root);
            std::filesystem::create_directories(recv_root);
        }
        TransferPlan plan;
        plan.dataset = m.dataset(c.hash);
        plan.hash_alg = c.hash;
        plan.strategy = verify ? c.strategy : Strategy::Fiver;
        plan.block_size = c.block_size;
        plan.chunk_size = verify && c.strategy == Strategy::FiverChunked ? c.chunk_size : 0;
        plan.hybrid_threshold = c.hybrid_threshold;
        plan.buffer_size = c.buffer_size;
        plan.queue_capacity = c.queue_capacity;
        plan.verify = verify;
        endpoint::SenderOptions so;
        so.source_root = m.root;
        so.throttle = verify ? c.throttle : ThrottleConfig{c.throttle.net_rate, 0};
        if (verify && c.faults > 0)
            so.faults = faults::schedule_faults(c.faults, plan.dataset, c.fault_seed, c.fault_mode);
        return endpoint::transfer(address, plan, so);
    };

    // Baselines are shared between cells that differ only in strategy.
    std::map<std::tuple<std::string, std::uint64_t, std::uint64_t, std::uint32_t>, double> transfer_base;
    std::map<std::tuple<std::string, std::string, std::uint64_t, std::uint64_t, std::uint32_t>, double> checksum_base;

    std::vector<Row> all;
    for (const Cell& c : cells) {
        std::vector<Row> reps;
        for (std::uint32_t rep = 1; rep <= c.reps; ++rep) {
            Row r;
            r.dataset = dataset_label(c);
            r.strategy = c.strategy;
            r.hash = c.hash;
            r.net_rate = c.throttle.net_rate;
            r.checksum_rate = c.throttle.checksum_rate;
            r.faults = c.faults;
            r.rep = std::to_string(rep);
            try {
                const Manifest& m = dataset_for(c);
                const std::string dkey = r.dataset + "|" + std::to_string(c.seed);
                const auto tkey = std::make_tuple(dkey, c.throttle.net_rate, c.buffer_size, rep);
                if (!transfer_base.count(tkey)) transfer_base[tkey] = run_once(c, m, false).wall_clock;
                const auto ckey = std::make_tuple(dkey, std::string(to_string(c.hash)),
                                                  c.throttle.checksum_rate, c.buffer_size, rep);
                if (!checksum_base.count(ckey))
                    checksum_base[ckey] = checksum_only(m.dataset(c.hash), m.root, c.hash,
                                                        c.throttle.checksum_rate, c.buffer_size);
                r.t_transfer = transfer_base[tkey];
                r.t_checksum = checksum_base[ckey];
                const TransferReport rep_report = run_once(c, m, true);
                const ReportTotals t = rep_report.totals();
                r.t_total = rep_report.wall_clock;
                r.retransferred_bytes = t.retransferred_bytes;
                r.shared_bytes = t.shared_bytes;
                r.reread_bytes = t.reread_bytes;
                r.outcome = outcome_of(rep_report);
            } catch (const std::exception&) {
                r.outcome = "failed";
            }
            reps.push_back(r);
        }
        for (auto& row : summarize_cell(c, std::move(reps))) {
            if (on_row) on_row(row);
            all.push_back(std::move(row));
        }
    }
    if (server) server->stop();
    return all;
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "table" || text == "text-table") return ReportFormat::TextTable;
    throw ParseError("unknown report format '" + std::string(text) + "' (csv, table)");
}

namespace {

std::vector<std::string> cells_of(const Row& r) {
    return {r.dataset,
            std::string(to_string(r.strategy)),
            std::string(to_string(r.hash)),
            std::to_string(r.net_rate),
            std::to_string(r.checksum_rate),
            std::to_string(r.faults),
            r.rep,
            report::format_seconds(r.t_total),
            report::format_seconds(r.t_transfer),
            report::format_seconds(r.t_checksum),
            r.overhead_pct ? format_fixed(*r.overhead_pct, 2) : "",
            std::to_string(r.retransferred_bytes),
            std::to_string(r.shared_bytes),
            std::to_string(r.reread_bytes),
            r.outcome};
}

}  // namespace

std::string csv_row(const Row& row) {
    std::string out;
    bool first = true;
    for (const auto& field : cells_of(row)) {
        if (!first) out += ',';
        first = false;
        out += report::csv_field(field);
    }
    return out;
}

void emit_report(std::span<const Row> rows, std::ostream& out, ReportFormat format) {
    if (format == ReportFormat::Csv) {
        out << kCsvHeader << '\n';
        for (const auto& r : rows) out << csv_row(r) << '\n';
        return;
    }
    std::vector<std::vector<std::string>> table{split(kCsvHeader, ',')};
    for (const auto& r : rows) table.push_back(cells_of(r));
    std::vector<std::size_t> width(table.front().size(), 0);
    for (const auto& line : table)
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    for (const auto& line : table) {
        std::string text;
        for (std::size_t i = 0; i < line.size(); ++i) {
            text += line[i];
            if (i + 1 < line.size()) text += std::string(width[i] - line[i].size() + 2, ' ');
        }
        out << text << '\n';
    }
}

}  // namespace fiver::bench
