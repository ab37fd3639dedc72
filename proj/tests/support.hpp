#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fiver/endpoint.hpp"
#include "fiver/model.hpp"

namespace fiver::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::vector<std::byte> random_bytes(std::mt19937_64& rng, std::size_t n);
std::vector<std::byte> bytes_of(std::string_view text);

void write_file(const std::filesystem::path& path, std::span<const std::byte> data);
std::vector<std::byte> read_file(const std::filesystem::path& path);
bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b);

// Writes seeded random files under `root` named f<i>.bin and returns metas with ids from 1.
std::vector<FileMeta> make_dataset(const std::filesystem::path& root, const std::vector<std::uint64_t>& sizes,
                                   std::uint64_t seed, HashAlg alg = HashAlg::MD5);

// OpenSSL one-shot digest, lowercase hex.
std::string oracle_hex(HashAlg alg, std::span<const std::byte> data);
std::string oracle_file_hex(HashAlg alg, const std::filesystem::path& path);

/// Receiver on an ephemeral loopback port serving sessions on a background
/// thread until destroyed.
class Loopback {
public:
    explicit Loopback(std::filesystem::path root, endpoint::ReceiverConfig config = {});
    ~Loopback();

    net::Address address() const;
    const std::filesystem::path& root() const noexcept { return root_; }
    std::vector<endpoint::SessionSummary> sessions() const { return server_->sessions(); }

private:
    std::filesystem::path root_;
    std::unique_ptr<endpoint::Server> server_;
};

TransferReport run(const Loopback& rx, const TransferPlan& plan, const endpoint::SenderOptions& options);

TransferPlan plan_for(std::vector<FileMeta> dataset, Strategy strategy, HashAlg alg = HashAlg::MD5);

// Every dataset file is byte-equal between the two roots.
bool trees_equal(std::span<const FileMeta> dataset, const std::filesystem::path& a,
                 const std::filesystem::path& b);

double seconds_since(std::chrono::steady_clock::time_point t0);

}  // namespace fiver::testing
