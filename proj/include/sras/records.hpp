#pragma once
// Wire types of the RPE protocol: announcements, RPE evidence, PE evidence
// and PE certificates. All are canonical JSON (same rules as the policy)
// wrapped in board record payloads; signing inputs are length-prefixed and
// domain-tagged so records cannot be spliced across kinds, sessions or
// entities. Field tables in docs/FORMATS.md.

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>

#include "sras/crypto.hpp"
#include "sras/policy.hpp"
#include "sras/tee.hpp"

namespace sras::rpe {

using crypto::Digest32;
using crypto::PublicKey;
using crypto::Signature;

// Every simulated RPE runs the same open-source build, so all parties share
// one measurement set.
inline const Digest32 kRpeBuildMeasurement = crypto::digest("sras-rpe-build-1");
inline const Digest32 kRpeBuildSigner = crypto::digest("sras-rpe-signer-1");
inline constexpr std::uint16_t kRpeIsvProdId = 1;
inline constexpr std::uint16_t kRpeIsvSvn = 1;

inline tee::ReportBody rpe_report_body(const Digest32& measurement) {
    return {measurement, kRpeBuildSigner, kRpeIsvProdId, kRpeIsvSvn};
}

// ---------------------------------------------------------------------------
// Signing inputs
// ---------------------------------------------------------------------------

inline Bytes announce_signing_bytes(const std::string& session_id, const std::string& entity) {
    ByteWriter w;
    w.raw(std::string_view("sras/announce-v1"));
    w.var16(session_id);
    w.var16(entity);
    return w.take();
}

inline Bytes consensus_yes_signing_bytes(const std::string& session_id,
                                         const std::string& entity) {
    ByteWriter w;
    w.raw(std::string_view("sras/consensus-yes-v1"));
    w.var16(session_id);
    w.var16(entity);
    return w.take();
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct Announcement {
    std::string entity;
    PublicKey identifier;
    Signature signature;  // over announce_signing_bytes(session, entity)
};

enum class ConsensusStatus { No, Yes };

struct ConsensusResult {
    ConsensusStatus status = ConsensusStatus::No;
    std::optional<Signature> signature;  // present iff Yes
};

struct RpeEvidence {
    std::string entity;
    PublicKey identifier;
    tee::Quote quote;  // report_data = H(identifier) || H(policy)
    ConsensusResult consensus;
};

enum class PeVerdict { Pass, Fail };

enum class PeFailReason {
    KeyBindingMismatch,
    QuoteInvalid,
    IdentityMismatch,
    QeidNotAllowed,
    TcbOutOfDate,
    UnknownFmspc,
};

inline std::string_view to_string(PeFailReason r) {
    switch (r) {
        case PeFailReason::KeyBindingMismatch: return "key_binding_mismatch";
        case PeFailReason::QuoteInvalid: return "quote_invalid";
        case PeFailReason::IdentityMismatch: return "identity_mismatch";
        case PeFailReason::QeidNotAllowed: return "qeid_not_allowed";
        case PeFailReason::TcbOutOfDate: return "tcb_out_of_date";
        case PeFailReason::UnknownFmspc: return "unknown_fmspc";
    }
    return "?";
}

inline std::optional<PeFailReason> pe_fail_reason_from_string(std::string_view s) {
    using R = PeFailReason;
    for (R r : {R::KeyBindingMismatch, R::QuoteInvalid, R::IdentityMismatch, R::QeidNotAllowed,
                R::TcbOutOfDate, R::UnknownFmspc}) {
        if (s == to_string(r)) return r;
    }
    return std::nullopt;
}

struct PeResult {
    PeVerdict verdict = PeVerdict::Fail;
    std::optional<PeFailReason> reason;  // present iff Fail
    PublicKey pe_public_key;
    std::string session_id;
};

struct PeEvidence {
    std::string entity;  // the PE entity
    PeResult result;
    Signature signature;  // by the issuing RPE, over pe_result_signing_bytes
};

struct PeCertificate {
    PublicKey pe_public_key;
    std::string session_id;
    std::array<std::uint8_t, 32> nonce{};
    Signature rpe_report;  // over pe_certificate_signing_bytes
};

// ---------------------------------------------------------------------------
// Canonical JSON codecs. Decoders are strict: exact key sets, exact enum
// values, fixed-length hex; anything else is a malformed record.
// ---------------------------------------------------------------------------

namespace detail {

inline bool keys_exactly(const nlohmann::json& obj, const std::set<std::string>& keys) {
    if (!obj.is_object() || obj.size() != keys.size()) return false;
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!keys.contains(it.key())) return false;
    return true;
}

inline std::optional<std::string> get_string(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || !obj.at(key).is_string()) return std::nullopt;
    return obj.at(key).get<std::string>();
}

inline std::optional<nlohmann::json> parse_payload(ByteView payload) {
    auto j = nlohmann::json::parse(payload.begin(), payload.end(), nullptr,
                                   /*allow_exceptions=*/false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

}  // namespace detail

inline nlohmann::json consensus_to_json(const ConsensusResult& c) {
    nlohmann::json j;
    j["status"] = c.status == ConsensusStatus::Yes ? "yes" : "no";
    if (c.status == ConsensusStatus::Yes) j["signature"] = c.signature->hex();
    return j;
}

inline Bytes encode_announcement(const Announcement& a) {
    nlohmann::json j;
    j["entity"] = a.entity;
    j["identifier"] = a.identifier.hex();
    j["signature"] = a.signature.hex();
    j["suite"] = std::string(crypto::kSuiteId);
    return to_bytes(j.dump());
}

inline std::optional<Announcement> decode_announcement(ByteView payload) {
    auto j = detail::parse_payload(payload);
    if (!j || !detail::keys_exactly(*j, {"entity", "identifier", "signature", "suite"}))
        return std::nullopt;
    if (detail::get_string(*j, "suite") != std::string(crypto::kSuiteId)) return std::nullopt;
    Announcement a;
    auto entity = detail::get_string(*j, "entity");
    auto id_hex = detail::get_string(*j, "identifier");
    auto sig_hex = detail::get_string(*j, "signature");
    if (!entity || !id_hex || !sig_hex) return std::nullopt;
    auto id = PublicKey::from_hex(*id_hex);
    auto sig = Signature::from_hex(*sig_hex);
    if (!id || !sig) return std::nullopt;
    a.entity = *entity;
    a.identifier = *id;
    a.signature = *sig;
    return a;
}

inline Bytes encode_rpe_evidence(const RpeEvidence& ev) {
    nlohmann::json j;
    j["consensus"] = consensus_to_json(ev.consensus);
    j["entity"] = ev.entity;
    j["identifier"] = ev.identifier.hex();
    j["quote"] = to_hex(tee::encode_quote(ev.quote));
    j["suite"] = std::string(crypto::kSuiteId);
    return to_bytes(j.dump());
}

inline std::optional<RpeEvidence> decode_rpe_evidence(ByteView payload) {
    auto j = detail::parse_payload(payload);
    if (!j || !detail::keys_exactly(*j, {"consensus", "entity", "identifier", "quote", "suite"}))
        return std::nullopt;
    if (detail::get_string(*j, "suite") != std::string(crypto::kSuiteId)) return std::nullopt;
    RpeEvidence ev;
    auto entity = detail::get_string(*j, "entity");
    auto id_hex = detail::get_string(*j, "identifier");
    auto quote_hex = detail::get_string(*j, "quote");
    if (!entity || !id_hex || !quote_hex) return std::nullopt;
    auto id = PublicKey::from_hex(*id_hex);
    if (!id) return std::nullopt;
    auto quote_raw = from_hex(*quote_hex);
    if (!quote_raw) return std::nullopt;
    auto quote = tee::decode_quote(*quote_raw);
    if (!quote) return std::nullopt;

    const auto& cj = j->at("consensus");
    auto status = detail::get_string(cj, "status");
    if (!status) return std::nullopt;
    ConsensusResult consensus;
    if (*status == "yes") {
        if (!detail::keys_exactly(cj, {"status", "signature"})) return std::nullopt;
        auto sig_hex = detail::get_string(cj, "signature");
        if (!sig_hex) return std::nullopt;
        auto sig = Signature::from_hex(*sig_hex);
        if (!sig) return std::nullopt;
        consensus = {ConsensusStatus::Yes, *sig};
    } else if (*status == "no") {
        if (!detail::keys_exactly(cj, {"status"})) return std::nullopt;
        consensus = {ConsensusStatus::No, std::nullopt};
    } else {
        return std::nullopt;
    }

    ev.entity = *entity;
    ev.identifier = *id;
    ev.quote = *quote;
    ev.consensus = consensus;
    return ev;
}

inline nlohmann::json pe_result_to_json(const PeResult& r) {
    nlohmann::json j;
    j["pe_public_key"] = r.pe_public_key.hex();
    j["session_id"] = r.session_id;
    if (r.verdict == PeVerdict::Pass) {
        j["verdict"] = "pass";
    } else {
        j["verdict"] = "fail";
        j["reason"] = std::string(to_string(*r.reason));
    }
    return j;
}

// The bytes the issuing RPE signs: domain tag, the PE entity, then the
// canonical result object.
inline Bytes pe_result_signing_bytes(const std::string& entity, const PeResult& r) {
    ByteWriter w;
    w.raw(std::string_view("sras/pe-evidence-v1"));
    w.var16(entity);
    w.var16(pe_result_to_json(r).dump());
    return w.take();
}

inline Bytes encode_pe_evidence(const PeEvidence& ev) {
    nlohmann::json j;
    j["entity"] = ev.entity;
    j["result"] = pe_result_to_json(ev.result);
    j["signature"] = ev.signature.hex();
    j["suite"] = std::string(crypto::kSuiteId);
    return to_bytes(j.dump());
}

inline std::optional<PeEvidence> decode_pe_evidence(ByteView payload) {
    auto j = detail::parse_payload(payload);
    if (!j || !detail::keys_exactly(*j, {"entity", "result", "signature", "suite"}))
        return std::nullopt;
    if (detail::get_string(*j, "suite") != std::string(crypto::kSuiteId)) return std::nullopt;
    auto entity = detail::get_string(*j, "entity");
    auto sig_hex = detail::get_string(*j, "signature");
    if (!entity || !sig_hex) return std::nullopt;
    auto sig = Signature::from_hex(*sig_hex);
    if (!sig) return std::nullopt;

    const auto& rj = j->at("result");
    auto verdict = detail::get_string(rj, "verdict");
    auto pk_hex = detail::get_string(rj, "pe_public_key");
    auto session = detail::get_string(rj, "session_id");
    if (!verdict || !pk_hex || !session) return std::nullopt;
    auto pk = PublicKey::from_hex(*pk_hex);
    if (!pk) return std::nullopt;

    PeResult result;
    result.pe_public_key = *pk;
    result.session_id = *session;
    if (*verdict == "pass") {
        if (!detail::keys_exactly(rj, {"pe_public_key", "session_id", "verdict"}))
            return std::nullopt;
        result.verdict = PeVerdict::Pass;
    } else if (*verdict == "fail") {
        if (!detail::keys_exactly(rj, {"pe_public_key", "reason", "session_id", "verdict"}))
            return std::nullopt;
        auto reason = detail::get_string(rj, "reason");
        if (!reason) return std::nullopt;
        auto parsed = pe_fail_reason_from_string(*reason);
        if (!parsed) return std::nullopt;
        result.verdict = PeVerdict::Fail;
        result.reason = parsed;
    } else {
        return std::nullopt;
    }

    PeEvidence ev;
    ev.entity = *entity;
    ev.result = result;
    ev.signature = *sig;
    return ev;
}

inline Digest32 pe_certificate_digest(const PublicKey& pe_public_key,
                                      const std::string& session_id,
                                      const std::array<std::uint8_t, 32>& nonce) {
    ByteWriter w;
    w.raw(pe_public_key.bytes);
    w.raw(std::string_view(session_id));
    w.raw(nonce);
    return crypto::digest(w.buffer());
}

inline Bytes pe_certificate_signing_bytes(const Digest32& digest) {
    ByteWriter w;
    w.raw(std::string_view("sras/pe-cert-v1"));
    w.raw(digest.bytes);
    return w.take();
}

inline Bytes encode_pe_certificate(const PeCertificate& c) {
    nlohmann::json j;
    j["nonce"] = to_hex(c.nonce);
    j["pe_public_key"] = c.pe_public_key.hex();
    j["rpe_report"] = c.rpe_report.hex();
    j["session_id"] = c.session_id;
    j["suite"] = std::string(crypto::kSuiteId);
    return to_bytes(j.dump());
}

inline std::optional<PeCertificate> decode_pe_certificate(ByteView payload) {
    auto j = detail::parse_payload(payload);
    if (!j ||
        !detail::keys_exactly(*j, {"nonce", "pe_public_key", "rpe_report", "session_id", "suite"}))
        return std::nullopt;
    if (detail::get_string(*j, "suite") != std::string(crypto::kSuiteId)) return std::nullopt;
    auto nonce_hex = detail::get_string(*j, "nonce");
    auto pk_hex = detail::get_string(*j, "pe_public_key");
    auto sig_hex = detail::get_string(*j, "rpe_report");
    auto session = detail::get_string(*j, "session_id");
    if (!nonce_hex || !pk_hex || !sig_hex || !session) return std::nullopt;
    auto nonce = fixed_from_hex<32>(*nonce_hex);
    auto pk = PublicKey::from_hex(*pk_hex);
    auto sig = Signature::from_hex(*sig_hex);
    if (!nonce || !pk || !sig) return std::nullopt;
    PeCertificate c;
    c.nonce = *nonce;
    c.pe_public_key = *pk;
    c.rpe_report = *sig;
    c.session_id = *session;
    return c;
}

// ---------------------------------------------------------------------------
// Collateral resolution against the policy
// ---------------------------------------------------------------------------

// First collateral among `tcb_ids` whose policy entry matches the platform
// fmspc and whose blob decodes. The policy entry's fmspc is authoritative.
inline std::optional<tee::TcbCollateral> resolve_collateral(
    const policy::Policy& p, const std::vector<std::string>& tcb_ids, const std::string& fmspc) {
    for (const auto& id : tcb_ids) {
        const auto* entry = policy::find_tcb(p.tcbs, id);
        if (!entry || entry->fmspc != fmspc) continue;
        auto collateral = tee::decode_collateral_blob(entry->data);
        if (!collateral) continue;
        collateral->fmspc = entry->fmspc;
        return collateral;
    }
    return std::nullopt;
}

// Any collateral in the policy's TCB list for this fmspc (used for local PE
// quotes, whose platform is pinned by qeid rather than by tcb id).
inline std::optional<tee::TcbCollateral> resolve_collateral_by_fmspc(const policy::Policy& p,
                                                                     const std::string& fmspc) {
    for (const auto& entry : p.tcbs) {
        if (entry.fmspc != fmspc) continue;
        auto collateral = tee::decode_collateral_blob(entry.data);
        if (!collateral) continue;
        collateral->fmspc = entry.fmspc;
        return collateral;
    }
    return std::nullopt;
}

// True iff the (fmspc, svn) pair is marked out of date by one of the job's
// out_of_tcb entries.
inline bool matches_out_of_date_tcb(const policy::Policy& p, const policy::Job& job,
                                    const std::string& fmspc, std::uint32_t svn) {
    for (const auto& id : job.out_of_tcb) {
        const auto* entry = policy::find_tcb(p.out_of_date_tcbs, id);
        if (!entry || entry->fmspc != fmspc) continue;
        auto collateral = tee::decode_collateral_blob(entry->data);
        if (!collateral) continue;
        auto it = collateral->tcb_levels.find(svn);
        if (it != collateral->tcb_levels.end() && it->second == tee::TcbStatus::OutOfDate)
            return true;
    }
    return false;
}

}  // namespace sras::rpe
