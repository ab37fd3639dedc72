#include "fiver/digest.hpp"

#include "fiver/error.hpp"
#include "hash_engines.hpp"

namespace fiver::hashio {

DigestState::DigestState(HashAlg alg) : alg_(alg), engine_(detail::make_engine(alg)) {
    if (!engine_) throw DomainError("unsupported hash algorithm");
}

DigestState::~DigestState() = default;
DigestState::DigestState(DigestState&&) noexcept = default;
DigestState& DigestState::operator=(DigestState&&) noexcept = default;

void DigestState::update(std::span<const std::byte> data) {
    if (finalized_) throw StateError("digest update after finalize");
    if (data.empty()) return;
    engine_->update(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
    bytes_ += data.size();
}

void DigestState::update(std::string_view text) { update(std::as_bytes(std::span(text))); }

Digest DigestState::finalize() {
    if (finalized_) throw StateError("digest finalized twice");
    finalized_ = true;
    std::vector<std::byte> out(digest_length(alg_));
    engine_->finish(reinterpret_cast<std::uint8_t*>(out.data()));
    return Digest(alg_, std::move(out));
}

void DigestState::reset() {
    engine_->reset();
    bytes_ = 0;
    finalized_ = false;
}

Digest digest_bytes(HashAlg alg, std::span<const std::byte> data) {
    DigestState state(alg);
    state.update(data);
    return state.finalize();
}

Digest digest_bytes(HashAlg alg, std::string_view text) {
    return digest_bytes(alg, std::as_bytes(std::span(text)));
}

}  // namespace fiver::hashio
