#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "fiver/model.hpp"

namespace fiver::hashio {

namespace detail {
class HashEngine;
}

/// Incremental digest. Splitting input across update() calls never changes
/// the result. finalize() is single-shot; reset() re-arms the state, which is
/// how chunked verification starts a fresh digest at each chunk boundary.
class DigestState {
public:
    explicit DigestState(HashAlg alg);
    ~DigestState();
    DigestState(DigestState&&) noexcept;
    DigestState& operator=(DigestState&&) noexcept;

    void update(std::span<const std::byte> data);
    void update(std::string_view text);
    Digest finalize();
    void reset();

    HashAlg alg() const noexcept { return alg_; }
    std::uint64_t bytes_ingested() const noexcept { return bytes_; }
    bool finalized() const noexcept { return finalized_; }

private:
    HashAlg alg_;
    std::unique_ptr<detail::HashEngine> engine_;
    std::uint64_t bytes_ = 0;
    bool finalized_ = false;
};

inline DigestState digest_init(HashAlg alg) { return DigestState(alg); }

Digest digest_bytes(HashAlg alg, std::span<const std::byte> data);
Digest digest_bytes(HashAlg alg, std::string_view text);

}  // namespace fiver::hashio
