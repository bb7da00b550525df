#pragma once
// A materialized two-party world mirroring the reference policy document:
// real platforms, collateral and measurement digests substituted for the
// document's placeholder strings, with the same entity/job/connection names.

#include <memory>

#include "sras/records.hpp"
#include "sras/rpe.hpp"
#include "sras/rpo.hpp"
#include "sras/vnet.hpp"

namespace sras::testing {

struct TwoPartyWorld {
    std::shared_ptr<crypto::SeededRng> rng;
    std::shared_ptr<tee::RootAuthority> root;
    // qeid1 hosts rpe-1 and pe-1, qeid2 hosts pe-2, qeid3 hosts rpe-2
    std::shared_ptr<tee::Platform> platform_a;  // "qeid1", fmspc value 1, svn 3
    std::shared_ptr<tee::Platform> platform_b;  // "qeid2", fmspc value 1, svn 3
    std::shared_ptr<tee::Platform> platform_c;  // "qeid3", fmspc value 2, svn 7
    tee::TcbCollateral collateral_1;            // tcb-1
    tee::TcbCollateral collateral_2;            // tcb-2
    tee::TcbCollateral out_of_date_1;           // "Out of Data TCB" entry tcb-1 (svn 2)
    tee::ReportBody pe1_measurements;
    tee::ReportBody pe2_measurements;
    policy::Policy policy;

    std::string qeid_digest(const std::shared_ptr<tee::Platform>& p) const {
        return crypto::digest(p->info().qeid).hex();
    }
};

inline TwoPartyWorld make_two_party_world(const std::string& session_salt = "s1") {
    TwoPartyWorld w;
    w.rng = std::make_shared<crypto::SeededRng>("world-" + session_salt);
    w.root = tee::create_root(*w.rng);

    auto qeid = [](std::uint8_t b) {
        std::array<std::uint8_t, tee::kQeidLen> q{};
        q.fill(b);
        return q;
    };
    auto [pa, c1] = w.root->create_platform(qeid(0xa1), "fmspc value 1", 3, *w.rng);
    auto [pb, c1b] = w.root->create_platform(qeid(0xa2), "fmspc value 1", 3, *w.rng);
    auto [pc, c2] = w.root->create_platform(qeid(0xa3), "fmspc value 2", 7, *w.rng);
    w.platform_a = pa;
    w.platform_b = pb;
    w.platform_c = pc;
    w.collateral_1 = c1;
    w.collateral_2 = c2;
    w.out_of_date_1 = tee::TcbCollateral{w.root->public_key(),
                                         "fmspc value 1",
                                         {{2, tee::TcbStatus::OutOfDate}},
                                         {}};

    w.pe1_measurements = {crypto::digest("pe-1-code"), crypto::digest("vendor-1"), 1, 5};
    w.pe2_measurements = {crypto::digest("pe-2-code"), crypto::digest("vendor-2"), 0, 5};

    policy::Policy p;
    p.session_id = "session-" + session_salt;
    p.tcbs = {{"tcb-1", "fmspc value 1", tee::encode_collateral_blob(w.collateral_1)},
              {"tcb-2", "fmspc value 2", tee::encode_collateral_blob(w.collateral_2)}};
    p.out_of_date_tcbs = {{"tcb-1", "fmspc value 1", tee::encode_collateral_blob(w.out_of_date_1)}};
    p.rpes = {{"rpe-1", {w.qeid_digest(pa), w.qeid_digest(pb)}, {"tcb-1"}},
              {"rpe-2", {w.qeid_digest(pc)}, {"tcb-1", "tcb-2"}}};
    {
        policy::PeEntry pe1;
        pe1.entity = "pe-1";
        pe1.mrenclave = w.pe1_measurements.mrenclave.hex();
        policy::PeEntry pe2;
        pe2.entity = "pe-2";
        pe2.mrsigner = w.pe2_measurements.mrsigner.hex();
        pe2.isvprodid = 0;
        pe2.isvsvn_minimum = 0;
        p.pes = {pe1, pe2};
    }
    p.jobs = {{"job-1", "rpe-1", "pe-1", {w.qeid_digest(pa)}, {"tcb-1"}},
              {"job-2", "rpe-2", "pe-2", {w.qeid_digest(pb)}, {"tcb-1"}}};
    p.connections = {{"job-2", {"job-1"}}};
    w.policy = p;
    return w;
}

// Quote a PE key on a platform: report_data = H(pk) || zeros.
inline tee::Quote pe_quote(const tee::Platform& platform, const tee::ReportBody& measurements,
                           const crypto::PublicKey& pe_public_key) {
    std::array<std::uint8_t, tee::kReportDataLen> rd{};
    auto d = crypto::digest(pe_public_key.bytes);
    std::copy(d.bytes.begin(), d.bytes.end(), rd.begin());
    return platform.generate_quote(measurements, rd);
}

// Drives both parties of `w` through registration and mutual attestation on
// one board. Returns the two enclaves (rpe-1 on platform_a, rpe-2 on
// platform_c) in phase MutuallyAttested with consensus confirmed.
struct AttestedPair {
    std::shared_ptr<rpe::Enclave> rpe1;
    std::shared_ptr<rpe::Enclave> rpe2;
    std::shared_ptr<vnet::InMemoryBoard> board;
};

inline AttestedPair run_mutual_attestation(const TwoPartyWorld& w) {
    auto board = std::make_shared<vnet::InMemoryBoard>();
    auto rng1 = std::make_shared<crypto::SeededRng>("party-1-" + w.policy.session_id);
    auto rng2 = std::make_shared<crypto::SeededRng>("party-2-" + w.policy.session_id);
    auto rpe1 = std::make_shared<rpe::Enclave>("rpe-1", w.platform_a, board, rng1);
    auto rpe2 = std::make_shared<rpe::Enclave>("rpe-2", w.platform_c, board, rng2);

    for (auto& [enclave, rng] :
         {std::pair{rpe1, rng1}, std::pair{rpe2, rng2}}) {
        rpo::Owner owner({enclave->entity(), w.policy, rpe::kRpeBuildMeasurement, board}, rng);
        auto verdict = owner.attest_local_rpe(enclave->registration_quote());
        if (!verdict) throw std::runtime_error("fixture attestation failed");
        owner.deliver_policy(*enclave);
    }
    auto ev1 = rpe1->generate_rpe_evidence();
    auto ev2 = rpe2->generate_rpe_evidence();
    if (!rpe1->verify_peer_rpe_evidence(ev2)) throw std::runtime_error("fixture verify failed");
    if (!rpe2->verify_peer_rpe_evidence(ev1)) throw std::runtime_error("fixture verify failed");
    rpe1->complete_mutual_attestation();
    rpe2->complete_mutual_attestation();

    for (auto& [mine, peer] : {std::pair{rpe1, rpe2}, std::pair{rpe2, rpe1}}) {
        auto rec = board->fetch(peer->entity(), vnet::RecordKind::RpeEvidence);
        auto verdict = mine->verify_peer_rpe_record(rec->payload, peer->entity(),
                                                    /*require_consensus_yes=*/true);
        if (!verdict) throw std::runtime_error("fixture consensus failed");
    }
    return {rpe1, rpe2, board};
}

}  // namespace sras::testing
