#pragma once
// The Relying Party Owner: per-party trust anchor. Attests the local RPE
// quote against the consensus policy and hands the policy over a channel
// keyed by the quote's report_data binding (the simulator's RA-TLS analog).

#include <chrono>
#include <functional>
#include <memory>
#include <sstream>

#include "sras/rpe.hpp"

namespace sras::rpo {

enum class RejectReason {
    UnknownEntity,
    NoCollateral,
    QuoteNotUpToDate,
    MeasurementMismatch,
    QeidNotAllowed,
};

inline std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::UnknownEntity: return "UnknownEntity";
        case RejectReason::NoCollateral: return "NoCollateral";
        case RejectReason::QuoteNotUpToDate: return "QuoteNotUpToDate";
        case RejectReason::MeasurementMismatch: return "MeasurementMismatch";
        case RejectReason::QeidNotAllowed: return "QeidNotAllowed";
    }
    return "?";
}

struct Verdict {
    bool accepted = false;
    std::optional<RejectReason> reason;
    std::string detail;
    explicit operator bool() const { return accepted; }
};

struct NotAttested : std::logic_error {
    NotAttested() : std::logic_error("deliver_policy before successful attestation") {}
};

struct RpoConfig {
    std::string entity;
    policy::Policy policy;
    crypto::Digest32 trusted_rpe_measurement;
    std::shared_ptr<vnet::Board> board;
};

struct LogEntry {
    std::string phase;
    std::string subject;
    std::string verdict;
    std::string detail;
};

class Owner {
public:
    // The delivery hook models a malicious owner or compromised RPO->RPE
    // channel: it may substitute the policy that actually gets delivered.
    using DeliveryHook = std::function<policy::Policy(policy::Policy)>;

    Owner(RpoConfig cfg, std::shared_ptr<crypto::Rng> rng, DeliveryHook delivery_hook = {})
        : cfg_(std::move(cfg)), rng_(std::move(rng)), delivery_hook_(std::move(delivery_hook)) {}

    const RpoConfig& config() const { return cfg_; }
    const std::vector<LogEntry>& log() const { return log_; }

    // Accept iff the quote verifies UpToDate under the entity's pinned TCB
    // collateral, carries the trusted RPE measurement, and was produced on an
    // allowed platform. Exactly one log verdict per attempt.
    Verdict attest_local_rpe(const tee::Quote& quote) {
        auto verdict = check(quote);
        log_.push_back({"registration", cfg_.entity, verdict ? "accept" : "reject",
                        verdict ? "" : std::string(to_string(*verdict.reason))});
        if (verdict) attested_quote_ = quote;
        return verdict;
    }

    // Seals the policy to the channel key committed in the verified quote and
    // hands it to the RPE. Advances the RPE to Registered.
    void deliver_policy(rpe::Enclave& enclave) {
        if (!attested_quote_) throw NotAttested();
        policy::Policy to_send = cfg_.policy;
        if (delivery_hook_) to_send = delivery_hook_(std::move(to_send));

        const auto& channel_pub = enclave.channel_public_key();
        auto bound = crypto::digest(channel_pub.bytes);
        if (!std::equal(bound.bytes.begin(), bound.bytes.end(),
                        attested_quote_->report.report_data.begin()))
            throw rpe::ChannelFailure("channel key not bound to the attested quote");

        auto ephemeral = crypto::generate_kx_keypair(*rng_);
        auto shared = crypto::kx_shared(ephemeral.private_key, channel_pub);
        auto prk = crypto::hkdf_extract(to_bytes(std::string_view("sras/rpo-channel-v1")), shared);
        auto quote_digest = crypto::digest(tee::encode_quote(*attested_quote_));
        auto key = crypto::derive32(prk, "policy", quote_digest.bytes);
        auto box = crypto::aead_seal(key, crypto::counter_nonce(0),
                                     canonical_bytes(to_send),
                                     to_bytes(std::string_view("sras/policy")));
        enclave.receive_policy_box(ephemeral.public_key, box);
        log_.push_back({"registration", cfg_.entity, "policy-delivered", ""});
    }

    std::string log_text() const {
        std::ostringstream out;
        for (const auto& e : log_)
            out << e.phase << "\t" << e.subject << "\t" << e.verdict
                << (e.detail.empty() ? "" : "\t" + e.detail) << "\n";
        return out.str();
    }

private:
    Verdict check(const tee::Quote& quote) const {
        const auto* entry = policy::find_rpe(cfg_.policy, cfg_.entity);
        if (!entry) return {false, RejectReason::UnknownEntity, cfg_.entity};

        auto collateral =
            rpe::resolve_collateral(cfg_.policy, entry->tcb_allowed, quote.platform.fmspc);
        if (!collateral)
            return {false, RejectReason::NoCollateral, quote.platform.fmspc};
        auto outcome = tee::verify_quote(quote, *collateral);
        if (outcome.status != tee::QuoteStatus::UpToDate)
            return {false, RejectReason::QuoteNotUpToDate,
                    std::string(tee::to_string(outcome.status))};

        if (quote.report.mrenclave != cfg_.trusted_rpe_measurement)
            return {false, RejectReason::MeasurementMismatch, {}};

        auto qeid_digest = crypto::digest(quote.platform.qeid).hex();
        if (std::find(entry->qeid_allowed.begin(), entry->qeid_allowed.end(), qeid_digest) ==
            entry->qeid_allowed.end())
            return {false, RejectReason::QeidNotAllowed, qeid_digest};

        return {true, std::nullopt, {}};
    }

    RpoConfig cfg_;
    std::shared_ptr<crypto::Rng> rng_;
    DeliveryHook delivery_hook_;
    std::optional<tee::Quote> attested_quote_;
    std::vector<LogEntry> log_;
};

}  // namespace sras::rpo
