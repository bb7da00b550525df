#pragma once
// Simulated TEE quoting infrastructure: a root authority standing in for the
// vendor CA, per-platform quoting endpoints, DCAP-shaped quotes with a
// three-link certificate chain (root -> PCK -> attestation key), and quote
// verification against collateral. Byte layouts are documented in
// docs/FORMATS.md and mirrored by the independent python verifier used in
// the tests.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sras/bytes.hpp"
#include "sras/crypto.hpp"

namespace sras::tee {

using crypto::Digest32;
using crypto::PublicKey;
using crypto::Signature;

inline constexpr std::size_t kReportDataLen = 64;
inline constexpr std::size_t kQeidLen = 16;
inline constexpr std::uint8_t kQuoteVersion = 1;

struct EnclaveReport {
    Digest32 mrenclave;
    Digest32 mrsigner;
    std::uint16_t isvprodid = 0;
    std::uint16_t isvsvn = 0;
    std::array<std::uint8_t, kReportDataLen> report_data{};
    bool operator==(const EnclaveReport&) const = default;
};

struct ReportBody {
    Digest32 mrenclave;
    Digest32 mrsigner;
    std::uint16_t isvprodid = 0;
    std::uint16_t isvsvn = 0;
};

struct PlatformInfo {
    std::array<std::uint8_t, kQeidLen> qeid{};
    std::string fmspc;
    std::uint32_t tcb_svn = 0;
    bool operator==(const PlatformInfo&) const = default;
};

enum class CertRole : std::uint8_t { Root = 1, Pck = 2, AttestationKey = 3 };

struct Certificate {
    CertRole role = CertRole::Root;
    PublicKey subject;
    std::string fmspc;        // attestation-key certs only
    std::uint32_t tcb_svn = 0;  // attestation-key certs only
    Signature issuer_signature;
    bool operator==(const Certificate&) const = default;
};

struct CertChain {
    Certificate root;
    Certificate pck;
    Certificate attestation_key;
    bool operator==(const CertChain&) const = default;
};

struct Quote {
    EnclaveReport report;
    PlatformInfo platform;
    Signature signature;  // by the attestation key, over report || platform
    CertChain chain;
    bool operator==(const Quote&) const = default;
};

enum class TcbStatus { UpToDate, OutOfDate };

struct TcbCollateral {
    PublicKey issuer;  // trusted root public key
    std::string fmspc;
    std::map<std::uint32_t, TcbStatus> tcb_levels;
    std::set<std::string> revoked;  // key ids: hex of digest(subject public key)
};

enum class QuoteStatus {
    UpToDate,
    OutOfDate,
    Revoked,
    ChainInvalid,
    SignatureInvalid,
    UnknownFmspc,
};

inline std::string_view to_string(QuoteStatus s) {
    switch (s) {
        case QuoteStatus::UpToDate: return "UpToDate";
        case QuoteStatus::OutOfDate: return "OutOfDate";
        case QuoteStatus::Revoked: return "Revoked";
        case QuoteStatus::ChainInvalid: return "ChainInvalid";
        case QuoteStatus::SignatureInvalid: return "SignatureInvalid";
        case QuoteStatus::UnknownFmspc: return "UnknownFmspc";
    }
    return "?";
}

struct VerificationOutcome {
    QuoteStatus status = QuoteStatus::ChainInvalid;
    std::optional<EnclaveReport> report;  // echoed when the chain is valid
};

struct DuplicateQeidError : std::runtime_error {
    explicit DuplicateQeidError(const std::string& what) : std::runtime_error(what) {}
};

struct BadReportDataLength : std::invalid_argument {
    explicit BadReportDataLength(std::size_t got)
        : std::invalid_argument("report_data must be 64 bytes, got " + std::to_string(got)) {}
};

inline std::string key_id(const PublicKey& pk) { return crypto::digest(pk.bytes).hex(); }

// ---------------------------------------------------------------------------
// Wire encodings (byte-exact; see docs/FORMATS.md)
// ---------------------------------------------------------------------------

inline void encode_report(ByteWriter& w, const EnclaveReport& r) {
    w.raw(r.mrenclave.bytes);
    w.raw(r.mrsigner.bytes);
    w.u16le(r.isvprodid);
    w.u16le(r.isvsvn);
    w.raw(Bytes(28, 0));  // reserved
    w.raw(r.report_data);
}

inline void encode_platform(ByteWriter& w, const PlatformInfo& p) {
    w.raw(p.qeid);
    w.var16(p.fmspc);
    w.u32le(p.tcb_svn);
}

// The bytes covered by the quote signature.
inline Bytes signed_quote_bytes(const EnclaveReport& r, const PlatformInfo& p) {
    ByteWriter w;
    encode_report(w, r);
    encode_platform(w, p);
    return w.take();
}

// The to-be-signed bytes of a chain certificate.
inline Bytes cert_tbs(CertRole role, const PublicKey& subject, const std::string& fmspc,
                      std::uint32_t tcb_svn) {
    ByteWriter w;
    w.raw(std::string_view("sras-cert-v1"));
    w.u8(static_cast<std::uint8_t>(role));
    w.raw(subject.bytes);
    w.var16(fmspc);
    w.u32le(tcb_svn);
    return w.take();
}

inline void encode_cert(ByteWriter& w, const Certificate& c) {
    w.u8(static_cast<std::uint8_t>(c.role));
    w.raw(c.subject.bytes);
    w.var16(c.fmspc);
    w.u32le(c.tcb_svn);
    w.raw(c.issuer_signature.bytes);
}

inline Bytes encode_quote(const Quote& q) {
    ByteWriter w;
    w.u8(kQuoteVersion);
    std::string suite(crypto::kSuiteId);
    w.u8(static_cast<std::uint8_t>(suite.size()));
    w.raw(suite);
    encode_report(w, q.report);
    encode_platform(w, q.platform);
    w.raw(q.signature.bytes);
    w.u8(3);  // cert count, fixed chain
    encode_cert(w, q.chain.root);
    encode_cert(w, q.chain.pck);
    encode_cert(w, q.chain.attestation_key);
    return w.take();
}

inline std::optional<Quote> decode_quote(ByteView data) {
    try {
        ByteReader r(data);
        if (r.u8() != kQuoteVersion) return std::nullopt;
        std::uint8_t slen = r.u8();
        if (sras::to_string(ByteView(r.raw(slen))) != crypto::kSuiteId) return std::nullopt;
        Quote q;
        q.report.mrenclave.bytes = r.fixed<32>();
        q.report.mrsigner.bytes = r.fixed<32>();
        q.report.isvprodid = r.u16le();
        q.report.isvsvn = r.u16le();
        for (auto b : r.fixed<28>())
            if (b != 0) return std::nullopt;
        q.report.report_data = r.fixed<kReportDataLen>();
        q.platform.qeid = r.fixed<kQeidLen>();
        q.platform.fmspc = r.var16_string();
        q.platform.tcb_svn = r.u32le();
        q.signature.bytes = r.fixed<crypto_sign_BYTES>();
        if (r.u8() != 3) return std::nullopt;
        auto read_cert = [&r]() {
            Certificate c;
            c.role = static_cast<CertRole>(r.u8());
            c.subject.bytes = r.fixed<crypto_sign_PUBLICKEYBYTES>();
            c.fmspc = r.var16_string();
            c.tcb_svn = r.u32le();
            c.issuer_signature.bytes = r.fixed<crypto_sign_BYTES>();
            return c;
        };
        q.chain.root = read_cert();
        q.chain.pck = read_cert();
        q.chain.attestation_key = read_cert();
        r.expect_done();
        return q;
    } catch (const WireError&) {
        return std::nullopt;
    }
}

inline std::string hex_dump(const Quote& q) {
    auto raw = encode_quote(q);
    std::string out;
    for (std::size_t i = 0; i < raw.size(); i += 16) {
        char off[16];
        std::snprintf(off, sizeof off, "%04zx  ", i);
        out += off;
        for (std::size_t j = i; j < i + 16 && j < raw.size(); ++j) {
            out += to_hex(ByteView(&raw[j], 1));
            out += ' ';
        }
        out += '\n';
    }
    return out;
}

// Collateral travels inside the policy's TCB entries as a hex-encoded
// canonical JSON blob.
inline std::string collateral_to_json(const TcbCollateral& c) {
    nlohmann::json j;
    j["issuer"] = c.issuer.hex();
    j["fmspc"] = c.fmspc;
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& [svn, status] : c.tcb_levels) {
        levels.push_back({{"svn", svn},
                          {"status", status == TcbStatus::UpToDate ? "up_to_date" : "out_of_date"}});
    }
    j["tcb_levels"] = levels;
    j["revoked"] = c.revoked;
    return j.dump();
}

inline std::optional<TcbCollateral> collateral_from_json(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object()) return std::nullopt;
    if (!j.contains("issuer") || !j.contains("fmspc") || !j.contains("tcb_levels") ||
        !j.contains("revoked"))
        return std::nullopt;
    TcbCollateral c;
    if (!j["issuer"].is_string()) return std::nullopt;
    auto pk = PublicKey::from_hex(j["issuer"].get<std::string>());
    if (!pk) return std::nullopt;
    c.issuer = *pk;
    if (!j["fmspc"].is_string()) return std::nullopt;
    c.fmspc = j["fmspc"].get<std::string>();
    if (!j["tcb_levels"].is_array() || !j["revoked"].is_array()) return std::nullopt;
    for (const auto& lv : j["tcb_levels"]) {
        if (!lv.is_object() || !lv.contains("svn") || !lv.contains("status")) return std::nullopt;
        if (!lv["svn"].is_number_unsigned() || !lv["status"].is_string()) return std::nullopt;
        auto status = lv["status"].get<std::string>();
        if (status != "up_to_date" && status != "out_of_date") return std::nullopt;
        c.tcb_levels[lv["svn"].get<std::uint32_t>()] =
            status == "up_to_date" ? TcbStatus::UpToDate : TcbStatus::OutOfDate;
    }
    for (const auto& rv : j["revoked"]) {
        if (!rv.is_string()) return std::nullopt;
        c.revoked.insert(rv.get<std::string>());
    }
    return c;
}

inline std::string encode_collateral_blob(const TcbCollateral& c) {
    return to_hex(to_bytes(collateral_to_json(c)));
}

inline std::optional<TcbCollateral> decode_collateral_blob(std::string_view blob) {
    auto raw = from_hex(blob);
    if (!raw) return std::nullopt;
    return collateral_from_json(sras::to_string(*raw));
}

// ---------------------------------------------------------------------------
// Quoting endpoints
// ---------------------------------------------------------------------------

class Platform {
public:
    Platform(PlatformInfo info, crypto::SigningKeyPair attestation_key, CertChain chain)
        : info_(std::move(info)), ak_(std::move(attestation_key)), chain_(std::move(chain)) {}

    const PlatformInfo& info() const { return info_; }
    std::uint64_t quotes_issued() const { return counter_.load(); }

    Quote generate_quote(const ReportBody& body, ByteView report_data) const {
        if (report_data.size() != kReportDataLen) throw BadReportDataLength(report_data.size());
        Quote q;
        q.report.mrenclave = body.mrenclave;
        q.report.mrsigner = body.mrsigner;
        q.report.isvprodid = body.isvprodid;
        q.report.isvsvn = body.isvsvn;
        std::memcpy(q.report.report_data.data(), report_data.data(), kReportDataLen);
        q.platform = info_;
        q.signature = crypto::sign(ak_.private_key, signed_quote_bytes(q.report, q.platform));
        q.chain = chain_;
        counter_.fetch_add(1);
        return q;
    }

private:
    PlatformInfo info_;
    crypto::SigningKeyPair ak_;  // private key never leaves this object
    CertChain chain_;
    mutable std::atomic<std::uint64_t> counter_{0};
};

class RootAuthority {
public:
    explicit RootAuthority(crypto::Rng& rng) {
        key_ = crypto::generate_keypair(rng);
        root_cert_.role = CertRole::Root;
        root_cert_.subject = key_.public_key;
        root_cert_.issuer_signature =
            crypto::sign(key_.private_key, cert_tbs(CertRole::Root, key_.public_key, "", 0));
    }

    const Certificate& root_cert() const { return root_cert_; }
    const PublicKey& public_key() const { return key_.public_key; }

    // One platform per qeid; returns the quoting endpoint plus the collateral
    // parties embed in the policy's TCB blocks.
    std::pair<std::shared_ptr<Platform>, TcbCollateral> create_platform(
        const std::array<std::uint8_t, kQeidLen>& qeid, const std::string& fmspc,
        std::uint32_t tcb_svn, crypto::Rng& rng) {
        {
            std::lock_guard lock(mu_);
            if (!used_qeids_.insert(to_hex(qeid)).second)
                throw DuplicateQeidError("qeid already registered: " + to_hex(qeid));
        }
        auto pck = crypto::generate_keypair(rng);
        Certificate pck_cert;
        pck_cert.role = CertRole::Pck;
        pck_cert.subject = pck.public_key;
        pck_cert.issuer_signature =
            crypto::sign(key_.private_key, cert_tbs(CertRole::Pck, pck.public_key, "", 0));

        auto ak = crypto::generate_keypair(rng);
        Certificate ak_cert;
        ak_cert.role = CertRole::AttestationKey;
        ak_cert.subject = ak.public_key;
        ak_cert.fmspc = fmspc;
        ak_cert.tcb_svn = tcb_svn;
        ak_cert.issuer_signature = crypto::sign(
            pck.private_key, cert_tbs(CertRole::AttestationKey, ak.public_key, fmspc, tcb_svn));

        PlatformInfo info{qeid, fmspc, tcb_svn};
        CertChain chain{root_cert_, pck_cert, ak_cert};

        TcbCollateral collateral;
        collateral.issuer = key_.public_key;
        collateral.fmspc = fmspc;
        collateral.tcb_levels[tcb_svn] = TcbStatus::UpToDate;
        return {std::make_shared<Platform>(info, ak, chain), collateral};
    }

private:
    crypto::SigningKeyPair key_;
    Certificate root_cert_;
    std::mutex mu_;
    std::set<std::string> used_qeids_;
};

inline std::shared_ptr<RootAuthority> create_root(crypto::Rng& rng) {
    return std::make_shared<RootAuthority>(rng);
}

inline TcbCollateral revoke(TcbCollateral collateral, const std::string& key_id) {
    collateral.revoked.insert(key_id);
    return collateral;
}

inline TcbCollateral with_tcb_status(TcbCollateral collateral, std::uint32_t svn,
                                     TcbStatus status) {
    collateral.tcb_levels[svn] = status;
    return collateral;
}

// Verification steps, in order:
//   (1) chain integrity: roles, root self-signature, root == collateral issuer,
//       PCK signed by root, AK signed by PCK, and the platform block matching
//       the fmspc/tcb_svn certified in the AK cert;
//   (2) revocation list;
//   (3) fmspc match between quote and collateral;
//   (4) TCB status lookup of the platform svn (absent svn counts out of date);
//   (5) quote signature over report || platform.
// Identity appraisal is deliberately not done here; it is the caller's job
// against its own policy.
inline VerificationOutcome verify_quote(const Quote& q, const TcbCollateral& collateral) {
    const auto& chain = q.chain;
    bool chain_ok = chain.root.role == CertRole::Root && chain.pck.role == CertRole::Pck &&
                    chain.attestation_key.role == CertRole::AttestationKey;
    chain_ok = chain_ok && chain.root.subject == collateral.issuer;
    chain_ok = chain_ok &&
               crypto::verify(chain.root.subject,
                              cert_tbs(CertRole::Root, chain.root.subject, chain.root.fmspc,
                                       chain.root.tcb_svn),
                              chain.root.issuer_signature);
    chain_ok = chain_ok &&
               crypto::verify(chain.root.subject,
                              cert_tbs(CertRole::Pck, chain.pck.subject, chain.pck.fmspc,
                                       chain.pck.tcb_svn),
                              chain.pck.issuer_signature);
    chain_ok = chain_ok &&
               crypto::verify(chain.pck.subject,
                              cert_tbs(CertRole::AttestationKey, chain.attestation_key.subject,
                                       chain.attestation_key.fmspc, chain.attestation_key.tcb_svn),
                              chain.attestation_key.issuer_signature);
    chain_ok = chain_ok && chain.attestation_key.fmspc == q.platform.fmspc &&
               chain.attestation_key.tcb_svn == q.platform.tcb_svn;
    if (!chain_ok) return {QuoteStatus::ChainInvalid, std::nullopt};

    for (const Certificate* c : {&chain.root, &chain.pck, &chain.attestation_key}) {
        if (collateral.revoked.contains(key_id(c->subject)))
            return {QuoteStatus::Revoked, std::nullopt};
    }

    if (q.platform.fmspc != collateral.fmspc) return {QuoteStatus::UnknownFmspc, std::nullopt};

    auto it = collateral.tcb_levels.find(q.platform.tcb_svn);
    QuoteStatus tcb_status = (it != collateral.tcb_levels.end() && it->second == TcbStatus::UpToDate)
                                 ? QuoteStatus::UpToDate
                                 : QuoteStatus::OutOfDate;

    if (!crypto::verify(chain.attestation_key.subject, signed_quote_bytes(q.report, q.platform),
                        q.signature))
        return {QuoteStatus::SignatureInvalid, std::nullopt};

    return {tcb_status, q.report};
}

}  // namespace sras::tee
