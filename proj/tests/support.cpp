#include "support.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fiver::testing {

TempDir::TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "fiver-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::vector<std::byte> random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::byte> out(n);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const std::uint64_t v = rng();
        std::memcpy(out.data() + i, &v, 8);
    }
    for (; i < n; ++i) out[i] = static_cast<std::byte>(rng());
    return out;
}

std::vector<std::byte> bytes_of(std::string_view text) {
    std::vector<std::byte> out(text.size());
    std::memcpy(out.data(), text.data(), text.size());
    return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::byte> out(std::filesystem::file_size(path));
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
    return out;
}

bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
    if (!std::filesystem::exists(a) || !std::filesystem::exists(b)) return false;
    if (std::filesystem::file_size(a) != std::filesystem::file_size(b)) return false;
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::vector<char> ba(1 << 20), bb(1 << 20);
    while (fa && fb) {
        fa.read(ba.data(), static_cast<std::streamsize>(ba.size()));
        fb.read(bb.data(), static_cast<std::streamsize>(bb.size()));
        if (fa.gcount() != fb.gcount()) return false;
        if (std::memcmp(ba.data(), bb.data(), static_cast<std::size_t>(fa.gcount())) != 0) return false;
    }
    return true;
}

std::vector<FileMeta> make_dataset(const std::filesystem::path& root, const std::vector<std::uint64_t>& sizes,
                                   std::uint64_t seed, HashAlg alg) {
    std::mt19937_64 rng(seed);
    std::vector<FileMeta> out;
    std::filesystem::create_directories(root);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const std::string name = "f" + std::to_string(i) + ".bin";
        std::ofstream f(root / name, std::ios::binary | std::ios::trunc);
        std::uint64_t left = sizes[i];
        while (left > 0) {
            const auto chunk = random_bytes(rng, static_cast<std::size_t>(std::min<std::uint64_t>(left, 4 * MiB)));
            f.write(reinterpret_cast<const char*>(chunk.data()), static_cast<std::streamsize>(chunk.size()));
            left -= chunk.size();
        }
        if (!f) throw std::runtime_error("cannot write dataset file");
        out.push_back(FileMeta::whole(i + 1, name, sizes[i], alg));
    }
    return out;
}

namespace {

const EVP_MD* evp_for(HashAlg alg) {
    switch (alg) {
        case HashAlg::MD5: return EVP_md5();
        case HashAlg::SHA1: return EVP_sha1();
        case HashAlg::SHA256: return EVP_sha256();
    }
    return nullptr;
}

std::string to_hex(const unsigned char* p, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < n; ++i) {
        s += digits[p[i] >> 4];
        s += digits[p[i] & 15];
    }
    return s;
}

}  // namespace

std::string oracle_hex(HashAlg alg, std::span<const std::byte> data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_Digest(data.data(), data.size(), md, &n, evp_for(alg), nullptr);
    return to_hex(md, n);
}

std::string oracle_file_hex(HashAlg alg, const std::filesystem::path& path) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, evp_for(alg), nullptr);
    std::ifstream in(path, std::ios::binary);
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx, md, &n);
    EVP_MD_CTX_free(ctx);
    return to_hex(md, n);
}

Loopback::Loopback(std::filesystem::path root, endpoint::ReceiverConfig config) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    config.root = root_;
    server_ = std::make_unique<endpoint::Server>(net::Address{"127.0.0.1", 0}, std::move(config));
    server_->start();
}

Loopback::~Loopback() { server_->stop(); }

net::Address Loopback::address() const { return {"127.0.0.1", server_->port()}; }

TransferReport run(const Loopback& rx, const TransferPlan& plan, const endpoint::SenderOptions& options) {
    return endpoint::transfer(rx.address(), plan, options);
}

TransferPlan plan_for(std::vector<FileMeta> dataset, Strategy strategy, HashAlg alg) {
    TransferPlan plan;
    plan.dataset = std::move(dataset);
    plan.strategy = strategy;
    plan.hash_alg = alg;
    for (auto& f : plan.dataset) f.hash_alg = alg;
    if (strategy == Strategy::FiverChunked) plan.chunk_size = 1 * MiB;
    if (strategy == Strategy::FiverHybrid) plan.hybrid_threshold = 2 * MiB;
    if (strategy == Strategy::BlockPipeline) plan.block_size = 1 * MiB;
    return plan;
}

bool trees_equal(std::span<const FileMeta> dataset, const std::filesystem::path& a,
                 const std::filesystem::path& b) {
    for (const auto& f : dataset)
        if (!files_equal(a / f.path, b / f.path)) return false;
    return true;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace fiver::testing
