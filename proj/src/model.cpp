#include "fiver/model.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include "fiver/error.hpp"

namespace fiver {

namespace {

constexpr std::array<std::string_view, 6> kStrategyNames = {
    "sequential", "file-ppl", "block-ppl", "fiver", "fiver-chunked", "hybrid"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                          s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

std::uint64_t parse_u64(std::string_view digits, std::string_view context) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size())
        throw ParseError("invalid number in '" + std::string(context) + "'");
    return value;
}

}  // namespace

std::string_view to_string(HashAlg alg) {
    switch (alg) {
        case HashAlg::MD5: return "md5";
        case HashAlg::SHA1: return "sha1";
        case HashAlg::SHA256: return "sha256";
    }
    return "?";
}

HashAlg parse_hash_alg(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "md5") return HashAlg::MD5;
    if (lower == "sha1") return HashAlg::SHA1;
    if (lower == "sha256") return HashAlg::SHA256;
    throw ParseError("unsupported hash algorithm '" + std::string(text) + "'");
}

std::size_t digest_length(HashAlg alg) {
    switch (alg) {
        case HashAlg::MD5: return 16;
        case HashAlg::SHA1: return 20;
        case HashAlg::SHA256: return 32;
    }
    return 0;
}

std::string_view to_string(Strategy strategy) {
    return kStrategyNames[static_cast<std::size_t>(strategy)];
}

Strategy parse_strategy(std::string_view text) {
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
        if (kStrategyNames[i] == text) return static_cast<Strategy>(i);
    throw ParseError("unknown strategy '" + std::string(text) + "'");
}

std::string_view to_string(StrategyChoice choice) {
    return choice == StrategyChoice::ConcurrentShared ? "shared" : "reread";
}

std::string_view to_string(VerifyOutcome outcome) {
    switch (outcome) {
        case VerifyOutcome::Verified: return "verified";
        case VerifyOutcome::RetriedThenVerified: return "retried";
        case VerifyOutcome::Failed: return "failed";
    }
    return "?";
}

FileMeta FileMeta::whole(std::uint64_t file_id, std::string path, std::uint64_t size,
                         HashAlg alg, std::uint64_t chunk_size) {
    FileMeta meta;
    meta.file_id = file_id;
    meta.path = std::move(path);
    meta.size = size;
    meta.offset = 0;
    meta.length = size;
    meta.hash_alg = alg;
    meta.chunk_size = chunk_size;
    return meta;
}

void FileMeta::validate() const {
    if (offset > size || length > size - offset)
        throw DomainError("window [" + std::to_string(offset) + ", +" + std::to_string(length) +
                          ") exceeds file size " + std::to_string(size));
    if (length == 0 && size != 0) throw DomainError("empty window on non-empty file " + path);
    if (chunk_size != 0 && chunk_size < kMinChunkSize)
        throw DomainError("chunk_size " + std::to_string(chunk_size) + " below 1 MiB floor");
}

Digest::Digest(HashAlg alg, std::vector<std::byte> value) : alg_(alg), value_(std::move(value)) {
    if (value_.size() != digest_length(alg_))
        throw DomainError("digest length " + std::to_string(value_.size()) + " does not match " +
                          std::string(to_string(alg_)));
}

Digest Digest::from_hex(HashAlg alg, std::string_view hex) {
    if (hex.size() != 2 * digest_length(alg))
        throw ParseError("digest hex has wrong length for " + std::string(to_string(alg)));
    auto nibble = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw ParseError("digest hex must be lowercase hexadecimal");
    };
    std::vector<std::byte> bytes(hex.size() / 2);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::byte>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return Digest(alg, std::move(bytes));
}

std::string Digest::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(value_.size() * 2);
    for (std::byte b : value_) {
        auto v = std::to_integer<unsigned>(b);
        out.push_back(kDigits[v >> 4]);
        out.push_back(kDigits[v & 0xF]);
    }
    return out;
}

void TransferPlan::validate() const {
    if (block_size < 1 * MiB) throw DomainError("block_size must be at least 1 MiB");
    if (queue_capacity < 2) throw DomainError("queue_capacity must be at least 2");
    if (buffer_size < 4 * KiB) throw DomainError("buffer_size must be at least 4 KiB");
    if (buffer_size > 16 * MiB) throw DomainError("buffer_size must not exceed 16 MiB");
    if (chunk_size != 0 && chunk_size < kMinChunkSize)
        throw DomainError("chunk_size below 1 MiB floor");
    if (strategy == Strategy::FiverChunked && chunk_size == 0)
        throw DomainError("fiver-chunked requires a chunk size");
    if (strategy == Strategy::FiverHybrid && hybrid_threshold == 0)
        throw DomainError("hybrid requires a positive threshold");
    for (const auto& f : dataset) {
        f.validate();
        if (f.hash_alg != hash_alg)
            throw DomainError("file " + f.path + " uses " + std::string(to_string(f.hash_alg)) + ", plan uses " +
                              std::string(to_string(hash_alg)));
    }
}

ReportTotals TransferReport::totals() const {
    ReportTotals t;
    for (const auto& f : files) {
        t.t_transfer += f.t_transfer;
        t.t_checksum += f.t_checksum;
        t.t_total += f.t_total;
        t.bytes += f.size;
        t.retransferred_bytes += f.retransferred_bytes;
        t.shared_bytes += f.shared_bytes;
        t.reread_bytes += f.reread_bytes;
        switch (f.outcome) {
            case VerifyOutcome::Verified: ++t.verified; break;
            case VerifyOutcome::RetriedThenVerified: ++t.retried; break;
            case VerifyOutcome::Failed: ++t.failed; break;
        }
        if (f.audit_match && !*f.audit_match) ++t.audit_mismatches;
    }
    return t;
}

bool TransferReport::all_verified() const {
    return !transport_error && std::none_of(files.begin(), files.end(), [](const FileRecord& f) {
        return f.outcome == VerifyOutcome::Failed;
    });
}

double overhead(double t_algorithm, double t_checksum, double t_transfer) {
    if (!(t_checksum > 0) || !(t_transfer > 0))
        throw DomainError("overhead needs positive checksum and transfer times");
    if (!(t_algorithm >= 0)) throw DomainError("overhead needs a non-negative algorithm time");
    const double slower = std::max(t_checksum, t_transfer);
    return 100.0 * (t_algorithm - slower) / slower;
}

double round2(double value) { return std::round(value * 100.0) / 100.0; }

std::vector<ChunkSpec> chunk_layout(std::uint64_t size, std::uint64_t chunk_size,
                                    std::uint64_t file_id) {
    if (chunk_size != 0 && chunk_size < kMinChunkSize)
        throw DomainError("chunk_size below 1 MiB floor");
    std::vector<ChunkSpec> chunks;
    if (size == 0) return chunks;
    const std::uint64_t step = chunk_size == 0 ? size : chunk_size;
    chunks.reserve(static_cast<std::size_t>((size + step - 1) / step));
    std::uint32_t index = 0;
    for (std::uint64_t off = 0; off < size; off += step)
        chunks.push_back({file_id, index++, off, std::min(step, size - off)});
    return chunks;
}

std::uint64_t parse_size(std::string_view text) {
    std::string_view s = trim(text);
    if (s.empty()) throw ParseError("empty size");
    std::uint64_t mult = 1;
    switch (s.back()) {
        case 'K': case 'k': mult = KiB; break;
        case 'M': case 'm': mult = MiB; break;
        case 'G': case 'g': mult = GiB; break;
        default: break;
    }
    if (mult != 1) s.remove_suffix(1);
    std::uint64_t n = parse_u64(s, text);
    if (n > std::numeric_limits<std::uint64_t>::max() / mult)
        throw ParseError("size overflows 64 bits: '" + std::string(text) + "'");
    return n * mult;
}

std::string format_size(std::uint64_t bytes) {
    if (bytes != 0) {
        if (bytes % GiB == 0) return std::to_string(bytes / GiB) + "G";
        if (bytes % MiB == 0) return std::to_string(bytes / MiB) + "M";
        if (bytes % KiB == 0) return std::to_string(bytes / KiB) + "K";
    }
    return std::to_string(bytes);
}

std::vector<FileMeta> parse_dataset_spec(std::string_view text) {
    std::vector<FileMeta> out;
    std::string_view rest = text;
    bool any = false;
    while (true) {
        auto comma = rest.find(',');
        std::string_view token = trim(rest.substr(0, comma));
        auto fail = [&](const std::string& why) -> ParseError {
            return ParseError("bad dataset token '" + std::string(token) + "': " + why);
        };
        auto x = token.find_first_of("xX");
        if (token.empty() || x == std::string_view::npos) throw fail("expected <count>x<size>");
        std::uint64_t count = 0;
        std::uint64_t size = 0;
        try {
            count = parse_u64(token.substr(0, x), token);
            size = parse_size(token.substr(x + 1));
        } catch (const ParseError&) {
            throw fail("expected <count>x<size>");
        }
        if (count == 0) throw fail("zero count");
        if (size == 0) throw fail("zero size");
        for (std::uint64_t i = 0; i < count; ++i) {
            FileMeta meta;
            meta.size = size;
            meta.length = size;
            out.push_back(std::move(meta));
        }
        any = true;
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (!any) throw ParseError("empty dataset spec");
    return out;
}

std::string render_dataset_spec(std::span<const FileMeta> templates) {
    std::string out;
    for (std::size_t i = 0; i < templates.size();) {
        std::size_t j = i;
        while (j < templates.size() && templates[j].size == templates[i].size) ++j;
        if (!out.empty()) out += ',';
        out += std::to_string(j - i) + "x" + format_size(templates[i].size);
        i = j;
    }
    return out;
}

std::uint64_t total_bytes(std::span<const FileMeta> files) {
    std::uint64_t sum = 0;
    for (const auto& f : files) sum += f.size;
    return sum;
}

}  // namespace fiver
