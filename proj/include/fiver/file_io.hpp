#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>

#include "fiver/model.hpp"

namespace fiver::io {

// Positioned I/O on a file descriptor.
class File {
public:
    File() = default;
    ~File();
    File(File&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    File& operator=(File&& other) noexcept;
    File(const File&) = delete;
    File& operator=(const File&) = delete;

    static File open_read(const std::filesystem::path& path);
    // Creates missing files; `truncate` discards existing content.
    static File open_write(const std::filesystem::path& path, bool truncate);

    void read_exact(std::span<std::byte> out, std::uint64_t offset) const;
    void write_all(std::span<const std::byte> data, std::uint64_t offset);
    void resize(std::uint64_t size);
    std::uint64_t size() const;
    bool valid() const noexcept { return fd_ >= 0; }

private:
    explicit File(int fd) : fd_(fd) {}
    int fd_ = -1;
};

/// Single pass over [offset, offset + length) of a file, optionally rate limited.
Digest digest_file(HashAlg alg, const std::filesystem::path& path, std::uint64_t offset,
                   std::uint64_t length, std::uint64_t rate = 0,
                   std::uint64_t buffer_size = kDefaultBufferSize);
Digest digest_file(HashAlg alg, const std::filesystem::path& path);

/// Joins a peer-supplied relative path under `root`, rejecting absolute
/// paths and any ".." component. Throws DomainError.
std::filesystem::path safe_join(const std::filesystem::path& root, std::string_view relative);

}  // namespace fiver::io
