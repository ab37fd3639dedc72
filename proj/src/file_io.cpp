#include "fiver/file_io.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <vector>

#include "fiver/digest.hpp"
#include "fiver/error.hpp"
#include "fiver/throttle.hpp"

namespace fiver::io {

namespace {

[[noreturn]] void fail(const std::string& what, const std::filesystem::path& path = {}) {
    std::string msg = what;
    if (!path.empty()) msg += " " + path.string();
    throw IoError(msg + ": " + std::strerror(errno));
}

}  // namespace

File::~File() {
    if (fd_ >= 0) ::close(fd_);
}

File& File::operator=(File&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

File File::open_read(const std::filesystem::path& path) {
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) fail("cannot open", path);
    return File(fd);
}

File File::open_write(const std::filesystem::path& path, bool truncate) {
    int flags = O_RDWR | O_CREAT | O_CLOEXEC | (truncate ? O_TRUNC : 0);
    int fd = ::open(path.c_str(), flags, 0644);
    if (fd < 0) fail("cannot create", path);
    return File(fd);
}

void File::read_exact(std::span<std::byte> out, std::uint64_t offset) const {
    std::size_t done = 0;
    while (done < out.size()) {
        ssize_t n = ::pread(fd_, out.data() + done, out.size() - done,
                            static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("read failed");
        }
        if (n == 0) throw IoError("unexpected end of file at offset " + std::to_string(offset + done));
        done += static_cast<std::size_t>(n);
    }
}

void File::write_all(std::span<const std::byte> data, std::uint64_t offset) {
    std::size_t done = 0;
    while (done < data.size()) {
        ssize_t n = ::pwrite(fd_, data.data() + done, data.size() - done,
                             static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("write failed");
        }
        done += static_cast<std::size_t>(n);
    }
}

void File::resize(std::uint64_t size) {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) fail("cannot resize");
}

std::uint64_t File::size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) fail("cannot stat");
    return static_cast<std::uint64_t>(st.st_size);
}

Digest digest_file(HashAlg alg, const std::filesystem::path& path, std::uint64_t offset,
                   std::uint64_t length, std::uint64_t rate, std::uint64_t buffer_size) {
    File file = File::open_read(path);
    hashio::DigestState state(alg);
    bench::TokenBucket bucket(rate, bench::kChecksumBucketSeconds);
    const auto ready = bench::TokenBucket::Clock::now();
    std::vector<std::byte> buf(static_cast<std::size_t>(std::min(buffer_size, std::max<std::uint64_t>(length, 1))));
    for (std::uint64_t pos = offset, end = offset + length; pos < end;) {
        auto n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), end - pos));
        std::span<std::byte> piece(buf.data(), n);
        const auto due = bucket.reserve(n, ready);
        file.read_exact(piece, pos);
        state.update(piece);
        bench::TokenBucket::wait(due);
        pos += n;
    }
    return state.finalize();
}

Digest digest_file(HashAlg alg, const std::filesystem::path& path) {
    File file = File::open_read(path);
    return digest_file(alg, path, 0, file.size());
}

std::filesystem::path safe_join(const std::filesystem::path& root, std::string_view relative) {
    if (relative.empty()) throw DomainError("empty path");
    std::filesystem::path rel(relative);
    if (rel.is_absolute() || rel.has_root_name() || rel.has_root_directory())
        throw DomainError("absolute path rejected: " + std::string(relative));
    for (const auto& part : rel)
        if (part == "..") throw DomainError("path traversal rejected: " + std::string(relative));
    if (relative.find('\0') != std::string_view::npos) throw DomainError("NUL in path");
    return root / rel;
}

}  // namespace fiver::io
