#pragma once

// Portable MD5 (RFC 1321), SHA-1 and SHA-256 (FIPS 180-4). No hardware
// acceleration is used, so relative costs follow algorithm complexity.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <utility>

#include "fiver/model.hpp"

namespace fiver::hashio::detail {

class HashEngine {
public:
    virtual ~HashEngine() = default;
    virtual void update(const std::uint8_t* data, std::size_t len) = 0;
    virtual void finish(std::uint8_t* out) = 0;
    virtual void reset() = 0;
};

inline std::uint32_t load_le32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

inline std::uint32_t load_be32(const std::uint8_t* p) {
    return std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 | std::uint32_t(p[1]) << 16 |
           std::uint32_t(p[0]) << 24;
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline void store_be32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

// Merkle-Damgard framing shared by all three: 64-byte blocks, 0x80 pad,
// 64-bit bit length in the last 8 bytes.
template <class Impl, bool BigEndianLength>
class BlockHasher : public HashEngine {
public:
    void update(const std::uint8_t* data, std::size_t len) final {
        total_ += len;
        if (pending_ != 0) {
            std::size_t take = std::min(len, kBlock - pending_);
            std::memcpy(buffer_.data() + pending_, data, take);
            pending_ += take;
            data += take;
            len -= take;
            if (pending_ < kBlock) return;
            impl().compress(buffer_.data());
            pending_ = 0;
        }
        for (; len >= kBlock; data += kBlock, len -= kBlock) impl().compress(data);
        if (len != 0) {
            std::memcpy(buffer_.data(), data, len);
            pending_ = len;
        }
    }

    void finish(std::uint8_t* out) final {
        const std::uint64_t bits = total_ * 8;
        buffer_[pending_++] = 0x80;
        if (pending_ > kBlock - 8) {
            std::memset(buffer_.data() + pending_, 0, kBlock - pending_);
            impl().compress(buffer_.data());
            pending_ = 0;
        }
        std::memset(buffer_.data() + pending_, 0, kBlock - 8 - pending_);
        for (int i = 0; i < 8; ++i) {
            int shift = BigEndianLength ? 56 - 8 * i : 8 * i;
            buffer_[kBlock - 8 + i] = static_cast<std::uint8_t>(bits >> shift);
        }
        impl().compress(buffer_.data());
        impl().output(out);
    }

    void reset() final {
        total_ = 0;
        pending_ = 0;
        impl().init();
    }

protected:
    static constexpr std::size_t kBlock = 64;

private:
    Impl& impl() { return static_cast<Impl&>(*this); }

    std::array<std::uint8_t, kBlock> buffer_{};
    std::size_t pending_ = 0;
    std::uint64_t total_ = 0;
};

class Md5 final : public BlockHasher<Md5, false> {
public:
    Md5() { init(); }

    void init() { h_ = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u}; }

    void compress(const std::uint8_t* block) {
        std::array<std::uint32_t, 16> x;
        for (int i = 0; i < 16; ++i) x[i] = load_le32(block + 4 * i);
        std::array<std::uint32_t, 4> v = h_;
        rounds(v, x, std::make_index_sequence<64>{});
        for (int i = 0; i < 4; ++i) h_[i] += v[i];
    }

    void output(std::uint8_t* out) const {
        for (int i = 0; i < 4; ++i) store_le32(out + 4 * i, h_[i]);
    }

private:
    static constexpr std::array<std::uint32_t, 64> kK = {
        0xd76aa478, 0xe8c7b756, 0x242070db, 0xc1bdceee, 0xf57c0faf, 0x4787c62a, 0xa8304613,
        0xfd469501, 0x698098d8, 0x8b44f7af, 0xffff5bb1, 0x895cd7be, 0x6b901122, 0xfd987193,
        0xa679438e, 0x49b40821, 0xf61e2562, 0xc040b340, 0x265e5a51, 0xe9b6c7aa, 0xd62f105d,
        0x02441453, 0xd8a1e681, 0xe7d3fbc8, 0x21e1cde6, 0xc33707d6, 0xf4d50d87, 0x455a14ed,
        0xa9e3e905, 0xfcefa3f8, 0x676f02d9, 0x8d2a4c8a, 0xfffa3942, 0x8771f681, 0x6d9d6122,
        0xfde5380c, 0xa4beea44, 0x4bdecfa9, 0xf6bb4b60, 0xbebfbc70, 0x289b7ec6, 0xeaa127fa,
        0xd4ef3085, 0x04881d05, 0xd9d4d039, 0xe6db99e5, 0x1fa27cf8, 0xc4ac5665, 0xf4292244,
        0x432aff97, 0xab9423a7, 0xfc93a039, 0x655b59c3, 0x8f0ccc92, 0xffeff47d, 0x85845dd1,
        0x6fa87e4f, 0xfe2ce6e0, 0xa3014314, 0x4e0811a1, 0xf7537e82, 0xbd3af235, 0x2ad7d2bb,
        0xeb86d391};

    static constexpr std::array<int, 16> kS = {7, 12, 17, 22, 5, 9,  14, 20,
                                               4, 11, 16, 23, 6, 10, 15, 21};

    static constexpr int message_index(int i) {
        switch (i / 16) {
            case 0: return i;
            case 1: return (5 * i + 1) % 16;
            case 2: return (3 * i + 5) % 16;
            default: return (7 * i) % 16;
        }
    }

    template <std::size_t I>
    static void step(std::array<std::uint32_t, 4>& v, const std::array<std::uint32_t, 16>& x) {
        constexpr int a = (4 - I % 4) % 4, b = (a + 1) % 4, c = (a + 2) % 4, d = (a + 3) % 4;
        // Sum the terms that do not depend on b first; b is the newest word.
        std::uint32_t t = v[a] + x[message_index(I)] + kK[I];
        if constexpr (I < 16)
            t += v[d] ^ (v[b] & (v[c] ^ v[d]));
        else if constexpr (I < 32)
            t += (v[d] & v[b]) + (~v[d] & v[c]);
        else if constexpr (I < 48)
            t += v[b] ^ (v[c] ^ v[d]);
        else
            t += v[c] ^ (v[b] | ~v[d]);
        v[a] = v[b] + std::rotl(t, kS[(I / 16) * 4 + I % 4]);
    }

    template <std::size_t... I>
    static void rounds(std::array<std::uint32_t, 4>& v, const std::array<std::uint32_t, 16>& x,
                       std::index_sequence<I...>) {
        (step<I>(v, x), ...);
    }

    std::array<std::uint32_t, 4> h_{};
};

class Sha1 final : public BlockHasher<Sha1, true> {
public:
    Sha1() { init(); }

    void init() { h_ = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u}; }

    void compress(const std::uint8_t* block) {
        std::array<std::uint32_t, 16> w;
        for (int i = 0; i < 16; ++i) w[i] = load_be32(block + 4 * i);
        // The schedule lives in a 16-word ring; word i overwrites word i - 16.
        auto word = [&](int i) {
            if (i < 16) return w[i];
            std::uint32_t& x = w[i & 15];
            x = std::rotl(w[(i + 13) & 15] ^ w[(i + 8) & 15] ^ w[(i + 2) & 15] ^ x, 1);
            return x;
        };
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        // Five steps per iteration rename the registers instead of shifting them.
        auto rounds = [&](int from, std::uint32_t k, auto f) {
            auto step = [&](std::uint32_t& v, std::uint32_t x, std::uint32_t& y, std::uint32_t z,
                            std::uint32_t u, int i) {
                v += std::rotl(x, 5) + f(y, z, u) + k + word(i);
                y = std::rotl(y, 30);
            };
            for (int i = from; i < from + 20; i += 5) {
                step(e, a, b, c, d, i);
                step(d, e, a, b, c, i + 1);
                step(c, d, e, a, b, i + 2);
                step(b, c, d, e, a, i + 3);
                step(a, b, c, d, e, i + 4);
            }
        };
        rounds(0, 0x5a827999u, [](std::uint32_t x, std::uint32_t y, std::uint32_t z) { return z ^ (x & (y ^ z)); });
        rounds(20, 0x6ed9eba1u, [](std::uint32_t x, std::uint32_t y, std::uint32_t z) { return x ^ y ^ z; });
        rounds(40, 0x8f1bbcdcu, [](std::uint32_t x, std::uint32_t y, std::uint32_t z) { return (x & y) | (z & (x | y)); });
        rounds(60, 0xca62c1d6u, [](std::uint32_t x, std::uint32_t y, std::uint32_t z) { return x ^ y ^ z; });
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    void output(std::uint8_t* out) const {
        for (int i = 0; i < 5; ++i) store_be32(out + 4 * i, h_[i]);
    }

private:
    std::array<std::uint32_t, 5> h_{};
};

class Sha256 final : public BlockHasher<Sha256, true> {
public:
    Sha256() { init(); }

    void init() {
        h_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
              0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    }

    void compress(const std::uint8_t* block) {
        std::array<std::uint32_t, 64> w;
        for (int i = 0; i < 16; ++i) w[i] = load_be32(block + 4 * i);
        for (int i = 16; i < 64; ++i) {
            std::uint32_t s0 = std::rotr(w[i - 15], 7) ^ std::rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            std::uint32_t s1 = std::rotr(w[i - 2], 17) ^ std::rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3];
        std::uint32_t e = h_[4], f = h_[5], g = h_[6], h = h_[7];
        for (int i = 0; i < 64; ++i) {
            std::uint32_t s1 = std::rotr(e, 6) ^ std::rotr(e, 11) ^ std::rotr(e, 25);
            std::uint32_t ch = (e & f) ^ (~e & g);
            std::uint32_t t1 = h + s1 + ch + kK[i] + w[i];
            std::uint32_t s0 = std::rotr(a, 2) ^ std::rotr(a, 13) ^ std::rotr(a, 22);
            std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            std::uint32_t t2 = s0 + maj;
            h = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
        h_[5] += f;
        h_[6] += g;
        h_[7] += h;
    }

    void output(std::uint8_t* out) const {
        for (int i = 0; i < 8; ++i) store_be32(out + 4 * i, h_[i]);
    }

private:
    static constexpr std::array<std::uint32_t, 64> kK = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};

    std::array<std::uint32_t, 8> h_{};
};

inline std::unique_ptr<HashEngine> make_engine(HashAlg alg) {
    switch (alg) {
        case HashAlg::MD5: return std::make_unique<Md5>();
        case HashAlg::SHA1: return std::make_unique<Sha1>();
        case HashAlg::SHA256: return std::make_unique<Sha256>();
    }
    return nullptr;
}

}  // namespace fiver::hashio::detail
