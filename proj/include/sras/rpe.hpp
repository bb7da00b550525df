#pragma once
// The Relying Party Enclave: a four-phase state machine that completes
// registration, mutually attests peers over the board, verifies the local
// privacy enclave, checks peer results, and issues/validates PE
// certificates. One instance per party, driven by a single owning thread.

#include <map>
#include <memory>
#include <set>

#include "sras/records.hpp"
#include "sras/vnet.hpp"

namespace sras::rpe {

enum class Phase { Created, Registered, MutuallyAttested, LocallyVerified, Ready };

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Created: return "Created";
        case Phase::Registered: return "Registered";
        case Phase::MutuallyAttested: return "MutuallyAttested";
        case Phase::LocallyVerified: return "LocallyVerified";
        case Phase::Ready: return "Ready";
    }
    return "?";
}

enum class RejectReason {
    Malformed,
    UnknownEntity,
    EntityMismatch,
    QuoteInvalid,
    MeasurementMismatch,
    PolicyMismatch,
    IdentifierMismatch,
    QeidNotAllowed,
    ConsensusNotYes,
    BadSignature,
    PeerVerdictFail,
    SessionMismatch,
    UnknownIssuer,
    NoSuchPeer,
};

inline std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::Malformed: return "Malformed";
        case RejectReason::UnknownEntity: return "UnknownEntity";
        case RejectReason::EntityMismatch: return "EntityMismatch";
        case RejectReason::QuoteInvalid: return "QuoteInvalid";
        case RejectReason::MeasurementMismatch: return "MeasurementMismatch";
        case RejectReason::PolicyMismatch: return "PolicyMismatch";
        case RejectReason::IdentifierMismatch: return "IdentifierMismatch";
        case RejectReason::QeidNotAllowed: return "QeidNotAllowed";
        case RejectReason::ConsensusNotYes: return "ConsensusNotYes";
        case RejectReason::BadSignature: return "BadSignature";
        case RejectReason::PeerVerdictFail: return "PeerVerdictFail";
        case RejectReason::SessionMismatch: return "SessionMismatch";
        case RejectReason::UnknownIssuer: return "UnknownIssuer";
        case RejectReason::NoSuchPeer: return "NoSuchPeer";
    }
    return "?";
}

struct Verdict {
    bool accepted = false;
    std::optional<RejectReason> reason;
    std::string detail;

    static Verdict ok() { return {true, std::nullopt, {}}; }
    static Verdict reject(RejectReason r, std::string detail = {}) {
        return {false, r, std::move(detail)};
    }
    explicit operator bool() const { return accepted; }
};

struct PhaseError : std::logic_error {
    explicit PhaseError(const std::string& what) : std::logic_error(what) {}
};
struct InvalidPolicy : std::runtime_error {
    explicit InvalidPolicy(const std::string& what) : std::runtime_error(what) {}
};
struct ChannelFailure : std::runtime_error {
    explicit ChannelFailure(const std::string& what) : std::runtime_error(what) {}
};
struct QuotingFailure : std::runtime_error {
    explicit QuotingFailure(const std::string& what) : std::runtime_error(what) {}
};

class Enclave {
public:
    Enclave(std::string entity, std::shared_ptr<tee::Platform> platform,
            std::shared_ptr<vnet::Board> board, std::shared_ptr<crypto::Rng> rng,
            Digest32 measurement = kRpeBuildMeasurement)
        : entity_(std::move(entity)), platform_(std::move(platform)), board_(std::move(board)),
          rng_(std::move(rng)), measurement_(measurement) {
        channel_key_ = crypto::generate_kx_keypair(*rng_);
    }

    const std::string& entity() const { return entity_; }
    Phase phase() const { return phase_; }
    const policy::Policy& policy() const { return policy_; }
    const crypto::KxPublicKey& channel_public_key() const { return channel_key_.public_key; }
    const PublicKey& identifier() const { return keypair_.public_key; }
    const std::map<std::string, PublicKey>& peer_identifiers() const { return peer_identifiers_; }
    std::shared_ptr<vnet::Board> board() const { return board_; }
    const Digest32& measurement() const { return measurement_; }

    // Registration quote for the local RPO; report_data binds the channel key.
    tee::Quote registration_quote() {
        std::array<std::uint8_t, tee::kReportDataLen> rd{};
        auto d = crypto::digest(channel_key_.public_key.bytes);
        std::copy(d.bytes.begin(), d.bytes.end(), rd.begin());
        registration_quote_ = platform_->generate_quote(rpe_report_body(measurement_), rd);
        return *registration_quote_;
    }

    // Policy delivery over the RA-bound channel (see rpo::Owner).
    void receive_policy_box(const crypto::KxPublicKey& ephemeral_pub, ByteView box) {
        if (!registration_quote_) throw ChannelFailure("no registration quote");
        auto key = channel_key_for(ephemeral_pub, *registration_quote_, channel_key_.private_key);
        auto opened = crypto::aead_open(key, crypto::counter_nonce(0), box,
                                        to_bytes(std::string_view("sras/policy")));
        if (!opened) throw ChannelFailure("policy box failed to open");
        policy::Policy p;
        try {
            p = policy::parse_policy(sras::to_string(*opened));
        } catch (const policy::ParseError& e) {
            throw InvalidPolicy(e.what());
        }
        on_policy_received(std::move(p));
    }

    static crypto::AeadKey channel_key_for(const crypto::KxPublicKey& ephemeral_pub,
                                           const tee::Quote& registration_quote,
                                           const crypto::KxPrivateKey& channel_priv) {
        auto shared = crypto::kx_shared(channel_priv, ephemeral_pub);
        auto prk = crypto::hkdf_extract(to_bytes(std::string_view("sras/rpo-channel-v1")), shared);
        auto quote_digest = crypto::digest(tee::encode_quote(registration_quote));
        return crypto::derive32(prk, "policy", quote_digest.bytes);
    }

    void on_policy_received(policy::Policy p) {
        require_phase(Phase::Created, "on_policy_received");
        auto errors = policy::validate_policy(p);
        if (!errors.empty())
            throw InvalidPolicy("policy failed validation: " + errors.front().reference);
        if (!policy::find_rpe(p, entity_))
            throw InvalidPolicy("own entity missing from policy: " + entity_);
        policy_ = std::move(p);
        policy_hash_ = policy::policy_hash(policy_);
        keypair_ = crypto::generate_keypair(*rng_);

        Announcement a;
        a.entity = entity_;
        a.identifier = keypair_.public_key;
        a.signature = crypto::sign(keypair_.private_key,
                                   announce_signing_bytes(policy_.session_id, entity_));
        board_->publish(entity_, vnet::RecordKind::Announcement, encode_announcement(a));
        phase_ = Phase::Registered;
    }

    RpeEvidence generate_rpe_evidence() {
        require_phase(Phase::Registered, "generate_rpe_evidence");
        std::array<std::uint8_t, tee::kReportDataLen> rd{};
        auto id_digest = crypto::digest(keypair_.public_key.bytes);
        std::copy(id_digest.bytes.begin(), id_digest.bytes.end(), rd.begin());
        std::copy(policy_hash_.bytes.begin(), policy_hash_.bytes.end(), rd.begin() + 32);

        RpeEvidence ev;
        ev.entity = entity_;
        ev.identifier = keypair_.public_key;
        try {
            ev.quote = platform_->generate_quote(rpe_report_body(measurement_), rd);
        } catch (const std::exception& e) {
            throw QuotingFailure(e.what());
        }
        ev.consensus = {ConsensusStatus::No, std::nullopt};
        own_evidence_ = ev;
        board_->publish(entity_, vnet::RecordKind::RpeEvidence, encode_rpe_evidence(ev));
        return ev;
    }

    // The three verification items plus quote validation; records the peer's
    // identifier on acceptance.
    Verdict verify_peer_rpe_evidence(const RpeEvidence& ev) {
        if (phase_ < Phase::Registered) throw PhaseError("not registered");
        if (ev.entity == entity_)
            return Verdict::reject(RejectReason::UnknownEntity, "own entity");
        const auto* entry = policy::find_rpe(policy_, ev.entity);
        if (!entry) return Verdict::reject(RejectReason::UnknownEntity, ev.entity);

        // (0) quote verifies as up to date against the entity's pinned TCBs,
        //     and the RPE measurement matches ours
        auto collateral = resolve_collateral(policy_, entry->tcb_allowed, ev.quote.platform.fmspc);
        if (!collateral)
            return Verdict::reject(RejectReason::QuoteInvalid,
                                   "no collateral for fmspc " + ev.quote.platform.fmspc);
        auto outcome = tee::verify_quote(ev.quote, *collateral);
        if (outcome.status != tee::QuoteStatus::UpToDate)
            return Verdict::reject(RejectReason::QuoteInvalid,
                                   std::string(tee::to_string(outcome.status)));
        if (ev.quote.report.mrenclave != measurement_)
            return Verdict::reject(RejectReason::MeasurementMismatch);

        // (1) policy hash carried in report_data matches the local policy
        if (!std::equal(policy_hash_.bytes.begin(), policy_hash_.bytes.end(),
                        ev.quote.report.report_data.begin() + 32))
            return Verdict::reject(RejectReason::PolicyMismatch);

        // (2) identifier matches the key hash bound into the quote
        auto id_digest = crypto::digest(ev.identifier.bytes);
        if (!std::equal(id_digest.bytes.begin(), id_digest.bytes.end(),
                        ev.quote.report.report_data.begin()))
            return Verdict::reject(RejectReason::IdentifierMismatch);

        // (3) platform qeid is one of the entity's allowed platforms
        auto qeid_digest = crypto::digest(ev.quote.platform.qeid).hex();
        if (std::find(entry->qeid_allowed.begin(), entry->qeid_allowed.end(), qeid_digest) ==
            entry->qeid_allowed.end())
            return Verdict::reject(RejectReason::QeidNotAllowed, qeid_digest);

        peer_identifiers_[ev.entity] = ev.identifier;
        return Verdict::ok();
    }

    // Full record verification as consumed from the board; optionally also
    // requires a valid consensus-yes signature.
    Verdict verify_peer_rpe_record(ByteView payload, const std::string& expected_entity,
                                   bool require_consensus_yes) {
        auto ev = decode_rpe_evidence(payload);
        if (!ev) return Verdict::reject(RejectReason::Malformed);
        if (ev->entity != expected_entity)
            return Verdict::reject(RejectReason::EntityMismatch, ev->entity);
        auto verdict = verify_peer_rpe_evidence(*ev);
        if (!verdict) return verdict;
        if (require_consensus_yes) {
            if (ev->consensus.status != ConsensusStatus::Yes)
                return Verdict::reject(RejectReason::ConsensusNotYes);
            if (!crypto::verify(ev->identifier,
                                consensus_yes_signing_bytes(policy_.session_id, ev->entity),
                                *ev->consensus.signature))
                return Verdict::reject(RejectReason::BadSignature, "consensus signature");
            consensus_confirmed_.insert(ev->entity);
        }
        return verdict;
    }

    bool all_peers_attested() const {
        for (const auto& r : policy_.rpes)
            if (r.entity != entity_ && !peer_identifiers_.contains(r.entity)) return false;
        return true;
    }

    bool all_peers_consensus_yes() const {
        for (const auto& r : policy_.rpes)
            if (r.entity != entity_ && !consensus_confirmed_.contains(r.entity)) return false;
        return true;
    }

    // Republishes own evidence with a signed yes and advances the phase.
    void complete_mutual_attestation() {
        require_phase(Phase::Registered, "complete_mutual_attestation");
        if (!all_peers_attested()) throw PhaseError("peer evidence pending or rejected");
        own_evidence_->consensus = {
            ConsensusStatus::Yes,
            crypto::sign(keypair_.private_key,
                         consensus_yes_signing_bytes(policy_.session_id, entity_))};
        board_->publish(entity_, vnet::RecordKind::RpeEvidence,
                        encode_rpe_evidence(*own_evidence_));
        phase_ = Phase::MutuallyAttested;
    }

    // Local PE attestation for one of this party's jobs; produces and
    // publishes the signed evidence whether the verdict is pass or fail so
    // peers can distinguish misbehaviour from slowness.
    PeEvidence verify_local_pe(const tee::Quote& pe_quote, const PublicKey& pe_public_key,
                               const std::string& job_id) {
        require_phase(Phase::MutuallyAttested, "verify_local_pe");
        if (!all_peers_consensus_yes())
            throw PhaseError("consensus ra results not all yes");
        const auto* job = policy::find_job(policy_, job_id);
        if (!job || job->rpe != entity_) throw PhaseError("job not owned: " + job_id);

        PeResult result;
        result.pe_public_key = pe_public_key;
        result.session_id = policy_.session_id;
        result.verdict = PeVerdict::Fail;

        auto fail = [&](PeFailReason reason) {
            result.reason = reason;
            return publish_pe_evidence(job->pe, result);
        };

        // (a) quote binds the PE public key
        auto key_digest = crypto::digest(pe_public_key.bytes);
        if (!std::equal(key_digest.bytes.begin(), key_digest.bytes.end(),
                        pe_quote.report.report_data.begin()))
            return fail(PeFailReason::KeyBindingMismatch);

        // (b) quote verifies against policy collateral for the PE platform
        auto collateral = resolve_collateral_by_fmspc(policy_, pe_quote.platform.fmspc);
        if (!collateral) return fail(PeFailReason::UnknownFmspc);
        auto outcome = tee::verify_quote(pe_quote, *collateral);
        if (outcome.status == tee::QuoteStatus::ChainInvalid ||
            outcome.status == tee::QuoteStatus::SignatureInvalid ||
            outcome.status == tee::QuoteStatus::Revoked)
            return fail(PeFailReason::QuoteInvalid);

        // (c) anonymized identity appraisal
        const auto* pe_entry = policy::find_pe(policy_, job->pe);
        if (!pe_entry || !policy::appraise_pe_identity(*pe_entry, pe_quote.report))
            return fail(PeFailReason::IdentityMismatch);

        // (d) PE platform pinned by qeid digest
        auto qeid_digest = crypto::digest(pe_quote.platform.qeid).hex();
        if (std::find(job->pe_qeid_allowed.begin(), job->pe_qeid_allowed.end(), qeid_digest) ==
            job->pe_qeid_allowed.end())
            return fail(PeFailReason::QeidNotAllowed);

        // (e) platform TCB not on the job's out-of-date list
        if (matches_out_of_date_tcb(policy_, *job, pe_quote.platform.fmspc,
                                    pe_quote.platform.tcb_svn))
            return fail(PeFailReason::TcbOutOfDate);

        result.verdict = PeVerdict::Pass;
        result.reason = std::nullopt;
        return publish_pe_evidence(job->pe, result);
    }

    // Signature-based verification of a collaborating party's PE evidence;
    // foreign quotes are never re-verified.
    Verdict verify_peer_pe_evidence(const PeEvidence& ev, const std::string& issuer_entity) {
        auto it = peer_identifiers_.find(issuer_entity);
        if (it == peer_identifiers_.end())
            return Verdict::reject(RejectReason::UnknownIssuer, issuer_entity);
        if (!crypto::verify(it->second, pe_result_signing_bytes(ev.entity, ev.result),
                            ev.signature))
            return Verdict::reject(RejectReason::BadSignature);
        if (ev.result.verdict != PeVerdict::Pass) {
            std::string detail = ev.result.reason ? std::string(to_string(*ev.result.reason)) : "";
            return Verdict::reject(RejectReason::PeerVerdictFail, detail);
        }
        if (ev.result.session_id != policy_.session_id)
            return Verdict::reject(RejectReason::SessionMismatch, ev.result.session_id);
        return Verdict::ok();
    }

    Verdict verify_peer_pe_record(ByteView payload, const std::string& expected_pe_entity,
                                  const std::string& issuer_entity) {
        auto ev = decode_pe_evidence(payload);
        if (!ev) return Verdict::reject(RejectReason::Malformed);
        if (ev->entity != expected_pe_entity)
            return Verdict::reject(RejectReason::EntityMismatch, ev->entity);
        auto verdict = verify_peer_pe_evidence(*ev, issuer_entity);
        if (verdict) accepted_peer_pes_.insert(expected_pe_entity);
        return verdict;
    }

    struct PeerNotVerified : std::runtime_error {
        explicit PeerNotVerified(const std::string& what) : std::runtime_error(what) {}
    };

    PeCertificate issue_pe_certificate(const std::string& job_id) {
        const auto* job = policy::find_job(policy_, job_id);
        if (!job || job->rpe != entity_) throw PhaseError("job not owned: " + job_id);
        auto own = own_pe_results_.find(job_id);
        if (own == own_pe_results_.end() || own->second.verdict != PeVerdict::Pass)
            throw PhaseError("local PE evidence is not a pass for " + job_id);
        for (const auto& [peer_job_id, role] : policy::peers_of(policy_, job_id)) {
            const auto* peer_job = policy::find_job(policy_, peer_job_id);
            if (!peer_job || !accepted_peer_pes_.contains(peer_job->pe))
                throw PeerNotVerified("peer PE evidence not accepted: " + peer_job_id);
        }

        PeCertificate cert;
        cert.pe_public_key = own->second.pe_public_key;
        cert.session_id = policy_.session_id;
        cert.nonce = rng_->fixed<32>();
        cert.rpe_report = crypto::sign(
            keypair_.private_key,
            pe_certificate_signing_bytes(
                pe_certificate_digest(cert.pe_public_key, cert.session_id, cert.nonce)));
        issued_jobs_.insert(job_id);
        if (issued_jobs_.size() == policy::job_for_rpe(policy_, entity_).size())
            phase_ = Phase::LocallyVerified;
        return cert;
    }

    // Called once the local PE holds its certificate.
    void certificate_delivered() {
        require_phase(Phase::LocallyVerified, "certificate_delivered");
        phase_ = Phase::Ready;
    }

    // Collaborative-preparation check of a peer PE's certificate, using the
    // identifier recorded during mutual attestation for the peer job's RPE.
    Verdict verify_pe_certificate(const PeCertificate& cert, const std::string& peer_job_id) {
        if (phase_ != Phase::Ready) throw PhaseError("verify_pe_certificate before Ready");
        bool linked = false;
        for (const auto& own_job : policy::job_for_rpe(policy_, entity_)) {
            for (const auto& [peer, role] : policy::peers_of(policy_, own_job.id))
                if (peer == peer_job_id) linked = true;
        }
        const auto* peer_job = policy::find_job(policy_, peer_job_id);
        if (!linked || !peer_job) return Verdict::reject(RejectReason::NoSuchPeer, peer_job_id);
        auto it = peer_identifiers_.find(peer_job->rpe);
        if (it == peer_identifiers_.end())
            return Verdict::reject(RejectReason::NoSuchPeer, peer_job->rpe);
        if (cert.session_id != policy_.session_id)
            return Verdict::reject(RejectReason::SessionMismatch, cert.session_id);
        if (!crypto::verify(it->second,
                            pe_certificate_signing_bytes(pe_certificate_digest(
                                cert.pe_public_key, cert.session_id, cert.nonce)),
                            cert.rpe_report))
            return Verdict::reject(RejectReason::BadSignature);
        return Verdict::ok();
    }

private:
    void require_phase(Phase expected, const std::string& op) const {
        if (phase_ != expected)
            throw PhaseError(op + " in phase " + std::string(to_string(phase_)));
    }

    PeEvidence publish_pe_evidence(const std::string& pe_entity, const PeResult& result) {
        PeEvidence ev;
        ev.entity = pe_entity;
        ev.result = result;
        ev.signature = crypto::sign(keypair_.private_key, pe_result_signing_bytes(pe_entity, result));
        board_->publish(pe_entity, vnet::RecordKind::PeEvidence, encode_pe_evidence(ev));
        // remember by job id for certificate issuance
        for (const auto& job : policy_.jobs)
            if (job.pe == pe_entity && job.rpe == entity_) own_pe_results_[job.id] = result;
        return ev;
    }

    std::string entity_;
    std::shared_ptr<tee::Platform> platform_;
    std::shared_ptr<vnet::Board> board_;
    std::shared_ptr<crypto::Rng> rng_;
    Digest32 measurement_;

    Phase phase_ = Phase::Created;
    crypto::KxKeyPair channel_key_;
    std::optional<tee::Quote> registration_quote_;
    policy::Policy policy_;
    Digest32 policy_hash_;
    crypto::SigningKeyPair keypair_;
    std::optional<RpeEvidence> own_evidence_;
    std::map<std::string, PublicKey> peer_identifiers_;
    std::set<std::string> consensus_confirmed_;
    std::map<std::string, PeResult> own_pe_results_;  // keyed by job id
    std::set<std::string> accepted_peer_pes_;
    std::set<std::string> issued_jobs_;
};

}  // namespace sras::rpe
