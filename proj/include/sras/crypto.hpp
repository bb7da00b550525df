#pragma once
// Cryptographic primitives used by everything else, fixed to a single suite:
// SHA-256 digests, Ed25519 signatures, X25519 key agreement and
// ChaCha20-Poly1305-IETF AEAD (all via libsodium), plus an HKDF built on
// HMAC-SHA256 and seedable RNG streams for reproducible runs.

#include <sodium.h>

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sras/bytes.hpp"

namespace sras::crypto {

// Single fixed suite; the id is embedded in every wire structure so that
// records stay self-describing.
inline constexpr std::string_view kSuiteId = "sha256-ed25519-x25519-chacha20poly1305";

inline void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

namespace detail {
// libsodium declares data pointers nonnull even for zero lengths; empty
// vectors hand out nullptr.
inline const std::uint8_t* nonnull(ByteView b) {
    static const std::uint8_t dummy = 0;
    return b.empty() ? &dummy : b.data();
}
}  // namespace detail

struct Digest32 {
    std::array<std::uint8_t, 32> bytes{};

    bool operator==(const Digest32&) const = default;
    auto operator<=>(const Digest32&) const = default;

    std::string hex() const { return to_hex(bytes); }
    static std::optional<Digest32> from_hex(std::string_view h) {
        auto raw = fixed_from_hex<32>(h);
        if (!raw) return std::nullopt;
        return Digest32{*raw};
    }
};

inline Digest32 digest(ByteView data) {
    ensure_sodium();
    Digest32 out;
    crypto_hash_sha256(out.bytes.data(), detail::nonnull(data), data.size());
    return out;
}

inline Digest32 digest(std::string_view s) {
    return digest(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline Digest32 digest(const Bytes& b) { return digest(ByteView(b)); }

struct PublicKey {
    std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> bytes{};
    bool operator==(const PublicKey&) const = default;
    auto operator<=>(const PublicKey&) const = default;
    std::string hex() const { return to_hex(bytes); }
    static std::optional<PublicKey> from_hex(std::string_view h) {
        auto raw = fixed_from_hex<crypto_sign_PUBLICKEYBYTES>(h);
        if (!raw) return std::nullopt;
        return PublicKey{*raw};
    }
};

struct PrivateKey {
    // Ed25519 secret key (seed || public key). Never serialized outward.
    std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> bytes{};
    bool operator==(const PrivateKey&) const = default;
};

struct Signature {
    std::array<std::uint8_t, crypto_sign_BYTES> bytes{};
    bool operator==(const Signature&) const = default;
    std::string hex() const { return to_hex(bytes); }
    static std::optional<Signature> from_hex(std::string_view h) {
        auto raw = fixed_from_hex<crypto_sign_BYTES>(h);
        if (!raw) return std::nullopt;
        return Signature{*raw};
    }
};

struct SigningKeyPair {
    PublicKey public_key;
    PrivateKey private_key;
};

// ---------------------------------------------------------------------------
// Randomness. Components draw all entropy through an Rng handle so that a
// whole simulated run can be replayed bit-exactly from one seed.
// ---------------------------------------------------------------------------

class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;

    Bytes bytes(std::size_t n) {
        Bytes b(n);
        fill(b);
        return b;
    }
    template <std::size_t N>
    std::array<std::uint8_t, N> fixed() {
        std::array<std::uint8_t, N> a{};
        fill(a);
        return a;
    }
};

class SystemRng final : public Rng {
public:
    void fill(std::span<std::uint8_t> out) override {
        ensure_sodium();
        randombytes_buf(out.data(), out.size());
    }
};

// ChaCha20 keystream keyed by SHA-256 of the seed; one 8-byte block nonce
// per fill() call. Internally synchronized: concurrent users (for example
// several handshake endpoints of one party) draw disjoint stream blocks.
class SeededRng final : public Rng {
public:
    explicit SeededRng(ByteView seed) : key_(digest(seed).bytes) { ensure_sodium(); }
    explicit SeededRng(std::string_view seed) : SeededRng(to_bytes_view(seed)) {}

    void fill(std::span<std::uint8_t> out) override {
        std::lock_guard lock(mu_);
        std::array<std::uint8_t, 8> nonce{};
        std::uint64_t c = counter_++;
        for (int i = 0; i < 8; ++i) nonce[i] = static_cast<std::uint8_t>(c >> (8 * i));
        crypto_stream_chacha20(out.data(), out.size(), nonce.data(), key_.data());
    }

private:
    static ByteView to_bytes_view(std::string_view s) {
        return ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }
    std::array<std::uint8_t, 32> key_;
    std::mutex mu_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Signing
// ---------------------------------------------------------------------------

// A 32-byte seed is used as the Ed25519 seed directly (so published test
// vectors apply); any other length is first hashed down to 32 bytes.
inline SigningKeyPair keypair_from_seed(ByteView seed) {
    ensure_sodium();
    std::array<std::uint8_t, crypto_sign_SEEDBYTES> s{};
    if (seed.size() == s.size()) {
        std::memcpy(s.data(), seed.data(), s.size());
    } else {
        s = digest(seed).bytes;
    }
    SigningKeyPair kp;
    crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.private_key.bytes.data(), s.data());
    return kp;
}

inline SigningKeyPair generate_keypair(Rng& rng) {
    auto seed = rng.fixed<crypto_sign_SEEDBYTES>();
    return keypair_from_seed(seed);
}

inline Signature sign(const PrivateKey& key, ByteView msg) {
    ensure_sodium();
    Signature sig;
    crypto_sign_detached(sig.bytes.data(), nullptr, detail::nonnull(msg), msg.size(),
                         key.bytes.data());
    return sig;
}

inline bool verify(const PublicKey& key, ByteView msg, const Signature& sig) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.bytes.data(), detail::nonnull(msg), msg.size(),
                                       key.bytes.data()) == 0;
}

// Raw-byte variant: a malformed signature length verifies false, it does not throw.
inline bool verify_bytes(const PublicKey& key, ByteView msg, ByteView sig) {
    if (sig.size() != crypto_sign_BYTES) return false;
    Signature s;
    std::memcpy(s.bytes.data(), sig.data(), sig.size());
    return verify(key, msg, s);
}

// ---------------------------------------------------------------------------
// X25519 key agreement
// ---------------------------------------------------------------------------

struct KxPublicKey {
    std::array<std::uint8_t, crypto_scalarmult_BYTES> bytes{};
    bool operator==(const KxPublicKey&) const = default;
    std::string hex() const { return to_hex(bytes); }
    static std::optional<KxPublicKey> from_hex(std::string_view h) {
        auto raw = fixed_from_hex<crypto_scalarmult_BYTES>(h);
        if (!raw) return std::nullopt;
        return KxPublicKey{*raw};
    }
};

struct KxPrivateKey {
    std::array<std::uint8_t, crypto_scalarmult_SCALARBYTES> bytes{};
};

struct KxKeyPair {
    KxPublicKey public_key;
    KxPrivateKey private_key;
};

inline KxKeyPair generate_kx_keypair(Rng& rng) {
    ensure_sodium();
    KxKeyPair kp;
    kp.private_key.bytes = rng.fixed<crypto_scalarmult_SCALARBYTES>();
    crypto_scalarmult_base(kp.public_key.bytes.data(), kp.private_key.bytes.data());
    return kp;
}

inline std::array<std::uint8_t, 32> kx_shared(const KxPrivateKey& mine, const KxPublicKey& peer) {
    ensure_sodium();
    std::array<std::uint8_t, 32> out{};
    if (crypto_scalarmult(out.data(), mine.bytes.data(), peer.bytes.data()) != 0)
        throw std::runtime_error("x25519: degenerate shared secret");
    return out;
}

// ---------------------------------------------------------------------------
// AEAD (ChaCha20-Poly1305-IETF, 12-byte nonce)
// ---------------------------------------------------------------------------

using AeadKey = std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_KEYBYTES>;
using AeadNonce = std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES>;

inline AeadNonce counter_nonce(std::uint64_t counter) {
    AeadNonce n{};
    for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (8 * i));
    return n;
}

inline Bytes aead_seal(const AeadKey& key, const AeadNonce& nonce, ByteView plaintext,
                       ByteView ad) {
    ensure_sodium();
    Bytes out(plaintext.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
    unsigned long long clen = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &clen, detail::nonnull(plaintext),
                                              plaintext.size(), detail::nonnull(ad), ad.size(),
                                              nullptr, nonce.data(), key.data());
    out.resize(clen);
    return out;
}

inline std::optional<Bytes> aead_open(const AeadKey& key, const AeadNonce& nonce,
                                      ByteView ciphertext, ByteView ad) {
    ensure_sodium();
    if (ciphertext.size() < crypto_aead_chacha20poly1305_ietf_ABYTES) return std::nullopt;
    // one spare byte keeps the output pointer non-null for empty plaintexts
    Bytes out(ciphertext.size() - crypto_aead_chacha20poly1305_ietf_ABYTES + 1);
    unsigned long long mlen = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &mlen, nullptr,
                                                  detail::nonnull(ciphertext), ciphertext.size(),
                                                  detail::nonnull(ad), ad.size(), nonce.data(),
                                                  key.data()) != 0)
        return std::nullopt;
    out.resize(mlen);
    return out;
}

// ---------------------------------------------------------------------------
// HMAC-SHA256 and HKDF
// ---------------------------------------------------------------------------

inline std::array<std::uint8_t, 32> hmac_sha256(ByteView key, ByteView data) {
    ensure_sodium();
    std::array<std::uint8_t, 32> out{};
    crypto_auth_hmacsha256_state st;
    crypto_auth_hmacsha256_init(&st, detail::nonnull(key), key.size());
    crypto_auth_hmacsha256_update(&st, detail::nonnull(data), data.size());
    crypto_auth_hmacsha256_final(&st, out.data());
    return out;
}

inline std::array<std::uint8_t, 32> hkdf_extract(ByteView salt, ByteView ikm) {
    return hmac_sha256(salt, ikm);
}

inline Bytes hkdf_expand(ByteView prk, ByteView info, std::size_t length) {
    Bytes out;
    out.reserve(length);
    Bytes block;
    std::uint8_t counter = 1;
    while (out.size() < length) {
        Bytes input = block;
        input.insert(input.end(), info.begin(), info.end());
        input.push_back(counter++);
        auto t = hmac_sha256(prk, input);
        block.assign(t.begin(), t.end());
        out.insert(out.end(), block.begin(), block.end());
    }
    out.resize(length);
    return out;
}

// 32-byte key derivation bound to a label and a context hash.
inline std::array<std::uint8_t, 32> derive32(ByteView prk, std::string_view label,
                                             ByteView context) {
    ByteWriter info;
    info.var16(label);
    info.var16(context);
    auto raw = hkdf_expand(prk, info.buffer(), 32);
    std::array<std::uint8_t, 32> out{};
    std::memcpy(out.data(), raw.data(), 32);
    return out;
}

}  // namespace sras::crypto
