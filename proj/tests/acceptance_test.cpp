// Acceptance suite: one test per criterion, each printing its own pass/fail
// line through the runner. Criteria cover the honest end-to-end flow,
// latency reporting, the adversary scenarios, the two independent oracles,
// and the handshake matrix.

#include <gtest/gtest.h>

#include <future>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "reference_policy.hpp"
#include "sras/harness.hpp"
#include "sras/pe.hpp"
#include "support.hpp"

using namespace sras;
using namespace sras::harness;
using namespace std::chrono_literals;

namespace {

// Config mirroring the reference policy document: rpe-1 and pe-1 share one
// platform family ("fmspc value 1"), rpe-2 runs on "fmspc value 2", pe-2 on
// a second fmspc-1 platform; pe-1 pins mrenclave, pe-2 pins signer/prodid
// with an svn floor.
ScenarioConfig reference_config() {
    ScenarioConfig cfg;
    auto qeid = [](std::uint8_t b) {
        std::array<std::uint8_t, tee::kQeidLen> q{};
        q.fill(b);
        return q;
    };
    PartySpec p1;
    p1.entity = "rpe-1";
    p1.rpe_platform = {qeid(0xa1), "fmspc value 1", 3};
    p1.pe.entity = "pe-1";
    p1.pe.platform = {qeid(0xa1), "fmspc value 1", 3};
    p1.pe.measurements = {crypto::digest("pe-1-code"), crypto::digest("vendor-1"), 1, 5};
    p1.pe.pin_mrenclave = true;

    PartySpec p2;
    p2.entity = "rpe-2";
    p2.rpe_platform = {qeid(0xa3), "fmspc value 2", 7};
    p2.pe.entity = "pe-2";
    p2.pe.platform = {qeid(0xa2), "fmspc value 1", 3};
    p2.pe.measurements = {crypto::digest("pe-2-code"), crypto::digest("vendor-2"), 0, 5};
    p2.pe.pin_mrenclave = false;
    p2.pe.pin_mrsigner = true;
    p2.pe.pin_isvprodid = true;
    p2.pe.isvsvn_minimum = 0;

    cfg.parties = {p1, p2};
    cfg.seed = 2024;
    cfg.timeout = 3000ms;
    return cfg;
}

bool has_reason(const ScenarioReport& report, const std::string& reason) {
    return std::any_of(report.detections.begin(), report.detections.end(),
                       [&](const DetectionRecord& d) { return d.reason == reason; });
}

}  // namespace

// 1. Honest end-to-end: the two-party scenario mirroring the reference
//    document completes all four phases, establishes the job-1<->job-2
//    channel and round-trips data, in under five seconds in memory.
TEST(Acceptance, Criterion1_HonestEndToEnd) {
    auto start = std::chrono::steady_clock::now();
    auto cfg = reference_config();
    auto report = run_scenario(cfg);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    EXPECT_TRUE(report.ok()) << render_report(report);
    EXPECT_TRUE(report.all_ready());
    ASSERT_EQ(report.connections.size(), 1u);
    EXPECT_EQ(report.connections[0].server_job, "job-2");
    EXPECT_EQ(report.connections[0].client_job, "job-1");
    EXPECT_TRUE(report.connections[0].established)
        << "established implies the exchange_data round-trip succeeded";
    EXPECT_LT(elapsed, 5.0) << "seconds";

    // the generated policy carries the document's structure
    auto p = policy::parse_policy(report.policy_text);
    EXPECT_EQ(p.tcbs.size(), 2u);
    EXPECT_EQ(p.out_of_date_tcbs.size(), 1u);
    EXPECT_EQ(p.rpes.size(), 2u);
    EXPECT_EQ(p.pes.size(), 2u);
    EXPECT_EQ(p.jobs.size(), 2u);
    ASSERT_EQ(p.connections.size(), 1u);
    EXPECT_EQ(p.connections[0].server, "job-2");
}

// 2. Latency envelope: all four phases are reported in Before/After/Total
//    categories, and an honest 3-party in-memory run finishes registration
//    through channel establishment in under one second of wall clock.
TEST(Acceptance, Criterion2_LatencyEnvelope) {
    auto cfg = default_config(3);
    cfg.timeout = 5000ms;
    auto start = std::chrono::steady_clock::now();
    auto report = run_scenario(cfg);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ASSERT_TRUE(report.ok()) << render_report(report);
    EXPECT_LT(elapsed, 1.0) << "seconds, wall clock";

    // category pattern mirrors the published table: Registration has no
    // download step, Collaborative Preparation reports a total only
    const auto& rows = report.latency;
    EXPECT_FALSE(rows[0].before_na);
    EXPECT_TRUE(rows[0].after_na);
    EXPECT_FALSE(rows[1].before_na);
    EXPECT_FALSE(rows[1].after_na);
    EXPECT_FALSE(rows[2].before_na);
    EXPECT_FALSE(rows[2].after_na);
    EXPECT_TRUE(rows[3].before_na);
    EXPECT_TRUE(rows[3].after_na);
    for (int i = 0; i < 4; ++i) EXPECT_GT(rows[i].total_ms, 0.0) << "row " << i;

    auto text = render_report(report);
    for (const char* row : {"Registration", "Mutual Attestation", "Local Verification",
                            "Collaborative Preparation"})
        EXPECT_NE(text.find(row), std::string::npos) << row;
    std::cout << text;
}

// 3. Forged-policy detection: 100 random single-field mutations against one
//    party all stop mutual attestation with PolicyMismatch.
TEST(Acceptance, Criterion3_ForgedPolicyDetection) {
    std::mt19937_64 prng(33);
    const auto& mutations = policy_mutations();
    int detected = 0;
    for (int i = 0; i < 100; ++i) {
        auto cfg = default_config(2);
        cfg.timeout = 1500ms;
        cfg.seed = 10'000 + i;
        AttackSpec attack;
        attack.kind = AttackKind::ForgedPolicy;
        attack.target = prng() % 2 ? "rpe-1" : "rpe-2";
        attack.mutation = mutations[prng() % mutations.size()];
        cfg.attacks.push_back(attack);

        auto report = run_scenario(cfg);
        bool mismatch = has_reason(report, "PolicyMismatch");
        bool none_mutual = std::all_of(
            report.parties.begin(), report.parties.end(), [](const auto& kv) {
                return kv.second.reached < rpe::Phase::MutuallyAttested;
            });
        EXPECT_TRUE(mismatch) << "run " << i << " mutation " << attack.mutation << "\n"
                              << render_report(report);
        EXPECT_TRUE(none_mutual) << "run " << i;
        if (mismatch && none_mutual) ++detected;
    }
    EXPECT_EQ(detected, 100);
    std::cout << "forged-policy detections: " << detected << "/100\n";
}

// 4. Replay detection: previous-session policies, RPE evidence, PE evidence
//    and PE certificates are all rejected, with one of the documented
//    reasons, in 100/100 randomized trials.
TEST(Acceptance, Criterion4_ReplayDetection) {
    std::mt19937_64 prng(44);

    // one previous collaboration round, same platforms (same seed)
    const std::uint64_t kSeed = 777;
    auto old_cfg = default_config(2);
    old_cfg.seed = kSeed;
    old_cfg.session_salt = "old-round";
    old_cfg.timeout = 3000ms;
    auto old_run = run_scenario(old_cfg);
    ASSERT_TRUE(old_run.ok()) << render_report(old_run);
    auto old_payload = [&](const std::string& entity, vnet::RecordKind kind) {
        for (const auto& e : old_run.board)
            if (e.entity == entity && e.kind == kind) return e.payload_hex;
        throw std::runtime_error("old record missing");
    };

    // previous-session certificates come from the protocol-level fixture
    auto old_world = sras::testing::make_two_party_world("cert-old");
    auto old_pair = sras::testing::run_mutual_attestation(old_world);
    crypto::SeededRng old_pe_rng("old-pe");
    auto old_pe2_keys = crypto::generate_keypair(old_pe_rng);
    old_pair.rpe2->verify_local_pe(
        sras::testing::pe_quote(*old_world.platform_b, old_world.pe2_measurements,
                          old_pe2_keys.public_key),
        old_pe2_keys.public_key, "job-2");
    auto rec1 = old_pair.board->fetch("pe-1", vnet::RecordKind::PeEvidence);
    crypto::SeededRng old_pe1_rng("old-pe1");
    auto old_pe1_keys = crypto::generate_keypair(old_pe1_rng);
    old_pair.rpe1->verify_local_pe(
        sras::testing::pe_quote(*old_world.platform_a, old_world.pe1_measurements,
                          old_pe1_keys.public_key),
        old_pe1_keys.public_key, "job-1");
    auto old_ev2 = old_pair.board->fetch("pe-2", vnet::RecordKind::PeEvidence);
    ASSERT_TRUE(old_pair.rpe1->verify_peer_pe_record(old_ev2->payload, "pe-2", "rpe-2").accepted);
    auto old_ev1 = old_pair.board->fetch("pe-1", vnet::RecordKind::PeEvidence);
    ASSERT_TRUE(old_pair.rpe2->verify_peer_pe_record(old_ev1->payload, "pe-1", "rpe-1").accepted);
    auto old_cert = old_pair.rpe2->issue_pe_certificate("job-2");

    // a current-session world for the certificate trials
    auto new_world = sras::testing::make_two_party_world("cert-new");
    auto new_pair = sras::testing::run_mutual_attestation(new_world);
    crypto::SeededRng new_pe_rng("new-pe");
    auto new_keys = crypto::generate_keypair(new_pe_rng);
    new_pair.rpe1->verify_local_pe(
        sras::testing::pe_quote(*new_world.platform_a, new_world.pe1_measurements, new_keys.public_key),
        new_keys.public_key, "job-1");
    auto new_keys2 = crypto::generate_keypair(new_pe_rng);
    new_pair.rpe2->verify_local_pe(
        sras::testing::pe_quote(*new_world.platform_b, new_world.pe2_measurements, new_keys2.public_key),
        new_keys2.public_key, "job-2");
    auto nrec2 = new_pair.board->fetch("pe-2", vnet::RecordKind::PeEvidence);
    ASSERT_TRUE(new_pair.rpe1->verify_peer_pe_record(nrec2->payload, "pe-2", "rpe-2").accepted);
    auto nrec1 = new_pair.board->fetch("pe-1", vnet::RecordKind::PeEvidence);
    ASSERT_TRUE(new_pair.rpe2->verify_peer_pe_record(nrec1->payload, "pe-1", "rpe-1").accepted);
    new_pair.rpe1->issue_pe_certificate("job-1");
    new_pair.rpe2->issue_pe_certificate("job-2");
    new_pair.rpe1->certificate_delivered();
    new_pair.rpe2->certificate_delivered();

    const std::set<std::string> kAllowed = {"PolicyMismatch", "BadSignature", "SessionMismatch"};
    int rejected = 0;
    for (int i = 0; i < 100; ++i) {
        int which = static_cast<int>(prng() % 4);
        if (which == 3) {
            // PE certificate replay, checked at collaborative preparation
            auto verdict = new_pair.rpe1->verify_pe_certificate(old_cert, "job-2");
            bool ok = !verdict.accepted &&
                      kAllowed.contains(std::string(rpe::to_string(*verdict.reason)));
            EXPECT_TRUE(ok) << "trial " << i << " cert replay reason "
                            << (verdict.reason ? rpe::to_string(*verdict.reason) : "accepted");
            if (ok) ++rejected;
            continue;
        }
        auto cfg = default_config(2);
        cfg.seed = kSeed;  // same platforms as the old round
        cfg.session_salt = "new-round-" + std::to_string(i);
        // detection never waits; the short timeout only bounds how long the
        // non-detecting party idles before the run settles
        cfg.timeout = 200ms;
        AttackSpec attack;
        if (which == 0) {
            attack.kind = AttackKind::PolicyReplay;
            attack.target = prng() % 2 ? "rpe-1" : "rpe-2";
            attack.replay_policy_text = old_run.policy_text;
        } else if (which == 1) {
            attack.kind = AttackKind::EvidenceReplay;
            attack.target = prng() % 2 ? "rpe-1" : "rpe-2";
            attack.record_kind = vnet::RecordKind::RpeEvidence;
            attack.replay_payload_hex = old_payload(attack.target, vnet::RecordKind::RpeEvidence);
        } else {
            attack.kind = AttackKind::EvidenceReplay;
            attack.target = prng() % 2 ? "rpe-1" : "rpe-2";
            attack.record_kind = vnet::RecordKind::PeEvidence;
            auto pe_entity = attack.target == "rpe-1" ? "pe-1" : "pe-2";
            attack.replay_payload_hex = old_payload(pe_entity, vnet::RecordKind::PeEvidence);
        }
        cfg.attacks.push_back(attack);
        auto report = run_scenario(cfg);
        bool ok = std::any_of(report.detections.begin(), report.detections.end(),
                              [&](const DetectionRecord& d) { return kAllowed.contains(d.reason); });
        EXPECT_TRUE(ok) << "trial " << i << " kind " << which << "\n" << render_report(report);
        if (ok) ++rejected;
    }
    EXPECT_EQ(rejected, 100);
    std::cout << "replay rejections: " << rejected << "/100\n";
}

// 5. Evidence-tamper detection: every single-byte flip of a stored
//    RpeEvidence and PeEvidence payload is rejected by the consuming RPE.
TEST(Acceptance, Criterion5_EvidenceTamperSweep) {
    auto world = sras::testing::make_two_party_world("sweep");
    auto pair = sras::testing::run_mutual_attestation(world);
    crypto::SeededRng pe_rng("sweep-pe");
    auto pe2_keys = crypto::generate_keypair(pe_rng);
    pair.rpe2->verify_local_pe(
        sras::testing::pe_quote(*world.platform_b, world.pe2_measurements, pe2_keys.public_key),
        pe2_keys.public_key, "job-2");

    // rpe-2's final (consensus-yes) evidence as stored on the board
    auto rpe_record = pair.board->fetch("rpe-2", vnet::RecordKind::RpeEvidence);
    ASSERT_TRUE(rpe_record.has_value());
    ASSERT_TRUE(pair.rpe1
                    ->verify_peer_rpe_record(rpe_record->payload, "rpe-2",
                                             /*require_consensus_yes=*/true)
                    .accepted);
    std::size_t rpe_rejects = 0;
    for (std::size_t i = 0; i < rpe_record->payload.size(); ++i) {
        auto flipped = rpe_record->payload;
        flipped[i] ^= 0x01;
        auto verdict =
            pair.rpe1->verify_peer_rpe_record(flipped, "rpe-2", /*require_consensus_yes=*/true);
        EXPECT_FALSE(verdict.accepted) << "byte " << i;
        if (!verdict.accepted) ++rpe_rejects;
    }
    EXPECT_EQ(rpe_rejects, rpe_record->payload.size());

    auto pe_record = pair.board->fetch("pe-2", vnet::RecordKind::PeEvidence);
    ASSERT_TRUE(pe_record.has_value());
    ASSERT_TRUE(pair.rpe1->verify_peer_pe_record(pe_record->payload, "pe-2", "rpe-2").accepted);
    std::size_t pe_rejects = 0;
    for (std::size_t i = 0; i < pe_record->payload.size(); ++i) {
        auto flipped = pe_record->payload;
        flipped[i] ^= 0x01;
        auto verdict = pair.rpe1->verify_peer_pe_record(flipped, "pe-2", "rpe-2");
        EXPECT_FALSE(verdict.accepted) << "byte " << i;
        if (!verdict.accepted) ++pe_rejects;
    }
    EXPECT_EQ(pe_rejects, pe_record->payload.size());
    std::cout << "tamper sweep: " << rpe_rejects << " RpeEvidence bytes, " << pe_rejects
              << " PeEvidence bytes, all rejected\n";
}

// 6. Platform policing: RPE outside qeid_allowed, PE outside
//    pe_qeid_allowed, PE on an out_of_tcb TCB; each yields its documented
//    rejection in the reference scenario.
TEST(Acceptance, Criterion6_PlatformPolicing) {
    {
        auto cfg = reference_config();
        cfg.timeout = 1000ms;
        cfg.attacks.push_back({.kind = AttackKind::RogueQeid, .target = "rpe-2", .scope = "rpe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool found = std::any_of(report.detections.begin(), report.detections.end(),
                                 [](const DetectionRecord& d) {
                                     return d.reason == "QeidNotAllowed" &&
                                            d.detecting_party == "rpe-2" &&
                                            d.phase == "registration";
                                 });
        EXPECT_TRUE(found) << render_report(report);
    }
    {
        auto cfg = reference_config();
        cfg.timeout = 1000ms;
        cfg.attacks.push_back({.kind = AttackKind::RogueQeid, .target = "rpe-1", .scope = "pe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool found = std::any_of(report.detections.begin(), report.detections.end(),
                                 [](const DetectionRecord& d) {
                                     return d.reason == "QeidNotAllowed" &&
                                            d.detecting_party == "rpe-1" &&
                                            d.phase == "local_verification";
                                 });
        EXPECT_TRUE(found) << render_report(report);
        EXPECT_FALSE(report.all_connections_established());
    }
    {
        // pe-2 runs on its own platform (the document's qeid2), downgraded to
        // the svn its job's out_of_tcb entry marks out of date
        auto cfg = reference_config();
        cfg.timeout = 1000ms;
        cfg.attacks.push_back({.kind = AttackKind::StaleTcb, .target = "rpe-2", .scope = "pe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool found = std::any_of(report.detections.begin(), report.detections.end(),
                                 [](const DetectionRecord& d) {
                                     return d.reason == "TcbOutOfDate" &&
                                            d.detecting_party == "rpe-2" &&
                                            d.phase == "local_verification";
                                 });
        EXPECT_TRUE(found) << render_report(report);
        EXPECT_FALSE(report.all_connections_established());
    }
}

// 7. Quote-layer oracle: the library verifier and the independently scripted
//    verifier agree on 1000 randomized quotes spanning all six statuses.
TEST(Acceptance, Criterion7_QuoteOracleAgreement) {
    sras::testing::QuoteScenarioGen gen(2027);
    std::vector<sras::testing::QuoteScenario> cases;
    std::string input;
    std::map<tee::QuoteStatus, int> coverage;
    for (int i = 0; i < 1000; ++i) {
        auto sc = gen.next();
        nlohmann::json line;
        line["quote"] = to_hex(tee::encode_quote(sc.quote));
        line["collateral"] = nlohmann::json::parse(tee::collateral_to_json(sc.collateral));
        input += line.dump() + "\n";
        ++coverage[sc.expected];
        cases.push_back(std::move(sc));
    }
    for (auto status :
         {tee::QuoteStatus::UpToDate, tee::QuoteStatus::OutOfDate, tee::QuoteStatus::Revoked,
          tee::QuoteStatus::ChainInvalid, tee::QuoteStatus::SignatureInvalid,
          tee::QuoteStatus::UnknownFmspc})
        EXPECT_GT(coverage[status], 0) << tee::to_string(status);

    auto lines = sras::testing::run_oracle("tests/oracle/verify_quote.py", input);
    ASSERT_EQ(lines.size(), cases.size());
    int agreed = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        auto ours = tee::verify_quote(cases[i].quote, cases[i].collateral).status;
        ASSERT_EQ(ours, cases[i].expected) << "case " << i;
        ASSERT_EQ(lines[i], tee::to_string(cases[i].expected)) << "case " << i;
        ++agreed;
    }
    EXPECT_EQ(agreed, 1000);
    std::cout << "quote oracle agreement: " << agreed << "/1000\n";
}

// 8. Canonicalization oracle: the reference document's policy hash matches
//    an independent canonicalize-and-hash script, and 500 random key-order
//    permutations hash identically.
TEST(Acceptance, Criterion8_CanonicalizationOracle) {
    auto p = policy::parse_policy(sras::testing::kReferencePolicyText);
    auto hash = policy::policy_hash(p).hex();

    auto lines =
        sras::testing::run_oracle("tests/oracle/policy_hash.py", sras::testing::kReferencePolicyText);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(hash, lines[0]) << "independent canonicalize+hash disagrees";

    std::mt19937_64 prng(88);
    auto doc = nlohmann::json::parse(sras::testing::kReferencePolicyText);
    std::function<nlohmann::ordered_json(const nlohmann::json&)> shuffle =
        [&](const nlohmann::json& v) -> nlohmann::ordered_json {
        if (v.is_object()) {
            std::vector<std::string> keys;
            for (auto it = v.begin(); it != v.end(); ++it) keys.push_back(it.key());
            std::shuffle(keys.begin(), keys.end(), prng);
            nlohmann::ordered_json out = nlohmann::ordered_json::object();
            for (const auto& k : keys) out[k] = shuffle(v.at(k));
            return out;
        }
        if (v.is_array()) {
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (const auto& e : v) out.push_back(shuffle(e));
            return out;
        }
        return v;
    };
    int identical = 0;
    std::string py_batch;
    for (int i = 0; i < 500; ++i) {
        auto text = shuffle(doc).dump(i % 3);
        if (policy::policy_hash(policy::parse_policy(text)).hex() == hash) ++identical;
        if (i < 5) {
            auto py = sras::testing::run_oracle("tests/oracle/policy_hash.py", text);
            ASSERT_EQ(py.size(), 1u);
            EXPECT_EQ(py[0], hash) << "oracle on permuted text " << i;
        }
    }
    EXPECT_EQ(identical, 500);
    std::cout << "canonicalization: " << identical << "/500 permutations, hash " << hash << "\n";
}

// 9. Handshake matrix: the four accept/reject combinations of the two
//    certificate verifications establish a channel exactly on accept/accept.
TEST(Acceptance, Criterion9_HandshakeMatrix) {
    struct Forced final : pe::CertVerifier {
        bool accept;
        explicit Forced(bool a) : accept(a) {}
        rpe::Verdict verify(const rpe::PeCertificate&, const std::string&) override {
            return accept ? rpe::Verdict::ok()
                          : rpe::Verdict::reject(rpe::RejectReason::BadSignature, "forced");
        }
    };

    int combos_checked = 0;
    for (bool client_accepts : {true, false}) {
        for (bool server_accepts : {true, false}) {
            auto world = sras::testing::make_two_party_world("matrix9");
            auto pair = sras::testing::run_mutual_attestation(world);
            auto pe1 = std::make_shared<pe::PrivacyEnclave>(
                "pe-1", world.pe1_measurements, world.platform_a,
                std::make_shared<crypto::SeededRng>("m9-pe1"));
            auto pe2 = std::make_shared<pe::PrivacyEnclave>(
                "pe-2", world.pe2_measurements, world.platform_b,
                std::make_shared<crypto::SeededRng>("m9-pe2"));
            pe1->bootstrap(*pair.rpe1, "job-1");
            pe2->bootstrap(*pair.rpe2, "job-2");
            auto rec2 = pair.board->fetch("pe-2", vnet::RecordKind::PeEvidence);
            ASSERT_TRUE(pair.rpe1->verify_peer_pe_record(rec2->payload, "pe-2", "rpe-2").accepted);
            auto rec1 = pair.board->fetch("pe-1", vnet::RecordKind::PeEvidence);
            ASSERT_TRUE(pair.rpe2->verify_peer_pe_record(rec1->payload, "pe-1", "rpe-1").accepted);
            pe1->install_certificate(pair.rpe1->issue_pe_certificate("job-1"));
            pe2->install_certificate(pair.rpe2->issue_pe_certificate("job-2"));
            pair.rpe1->certificate_delivered();
            pair.rpe2->certificate_delivered();

            Forced client_verifier(client_accepts);
            Forced server_verifier(server_accepts);
            auto duplex_ends = pe::InMemoryDuplex::make_pair();
            auto& client_io = duplex_ends.first;
            auto& server_io = duplex_ends.second;
            auto server_result = std::async(std::launch::async, [&] {
                return pe::server_handshake(*pe2, *server_io, server_verifier, "job-2", {"job-1"},
                                            2s);
            });
            auto client_result =
                pe::client_handshake(*pe1, *client_io, client_verifier, "job-1", "job-2", 2s);
            auto server = server_result.get();

            bool established = std::holds_alternative<pe::SecureChannel>(client_result) &&
                               std::holds_alternative<pe::SecureChannel>(server);
            EXPECT_EQ(established, client_accepts && server_accepts)
                << "client=" << client_accepts << " server=" << server_accepts;
            ++combos_checked;
        }
    }
    EXPECT_EQ(combos_checked, 4);
}
