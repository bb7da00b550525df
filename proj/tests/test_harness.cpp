// End-to-end scenario runs: honest multi-party flows, determinism, attack
// injection and detection, report rendering.

#include <gtest/gtest.h>

#include "sras/harness.hpp"
#include "support.hpp"

using namespace sras;
using namespace sras::harness;
using namespace std::chrono_literals;

namespace {

ScenarioConfig fast(ScenarioConfig cfg, std::chrono::milliseconds timeout = 1500ms) {
    cfg.timeout = timeout;
    return cfg;
}

}  // namespace

TEST(Harness, TwoPartyHonestRunCompletes) {
    auto report = run_scenario(fast(default_config(2)));
    EXPECT_TRUE(report.ok()) << render_report(report);
    EXPECT_TRUE(report.all_ready());
    ASSERT_EQ(report.connections.size(), 1u);
    EXPECT_EQ(report.connections[0].server_job, "job-2");
    EXPECT_EQ(report.connections[0].client_job, "job-1");
    EXPECT_TRUE(report.connections[0].established);
    EXPECT_TRUE(report.detections.empty());
}

TEST(Harness, GeneratedPolicyIsValidAndSessionsDiffer) {
    auto cfg = default_config(3);
    crypto::SeededRng rng_a("gen-a"), rng_b("gen-b");
    auto policy_a = build_policy(cfg.parties, crypto::keypair_from_seed(to_bytes("r")).public_key,
                                 uuid_from(rng_a));
    auto policy_b = build_policy(cfg.parties, crypto::keypair_from_seed(to_bytes("r")).public_key,
                                 uuid_from(rng_b));
    EXPECT_TRUE(policy::validate_policy(policy_a).empty());
    EXPECT_NE(policy_a.session_id, policy_b.session_id);
    EXPECT_EQ(policy_a.jobs.size(), 3u);
    ASSERT_EQ(policy_a.connections.size(), 1u);
    EXPECT_EQ(policy_a.connections[0].server, "job-3");
    EXPECT_EQ(policy_a.connections[0].clients.size(), 2u);
}

TEST(Harness, NPartyScalingEstablishesDeclaredConnections) {
    for (std::size_t n : {2u, 3u, 5u}) {
        auto report = run_scenario(fast(default_config(n), 4000ms));
        EXPECT_TRUE(report.ok()) << "n=" << n << "\n" << render_report(report);
        EXPECT_EQ(report.connections.size(), n - 1) << "n=" << n;
        EXPECT_TRUE(report.all_connections_established()) << "n=" << n;
    }
}

TEST(Harness, DeterministicUnderFixedSeed) {
    auto cfg = fast(default_config(2));
    cfg.seed = 12345;
    auto a = run_scenario(cfg);
    auto b = run_scenario(cfg);
    ASSERT_TRUE(a.ok());
    ASSERT_TRUE(b.ok());
    EXPECT_EQ(a.session_id, b.session_id);
    ASSERT_EQ(a.board.size(), b.board.size());
    for (std::size_t i = 0; i < a.board.size(); ++i) {
        EXPECT_EQ(a.board[i], b.board[i]) << "board record " << i;
    }
    for (const auto& [entity, outcome] : a.parties) {
        EXPECT_EQ(outcome.reached, b.parties.at(entity).reached);
    }

    auto cfg2 = cfg;
    cfg2.seed = 54321;
    auto c = run_scenario(cfg2);
    EXPECT_NE(a.session_id, c.session_id);
}

TEST(Harness, TcpTransportMatchesInMemoryOutcomes) {
    auto cfg = fast(default_config(2), 4000ms);
    cfg.transport = Transport::Tcp;
    auto report = run_scenario(cfg);
    EXPECT_TRUE(report.ok()) << render_report(report);
    EXPECT_TRUE(report.all_connections_established());

    auto inmem = fast(default_config(2));
    auto baseline = run_scenario(inmem);
    // same outcomes over both transports (sequences aside)
    EXPECT_EQ(report.all_ready(), baseline.all_ready());
    ASSERT_EQ(report.board.size(), baseline.board.size());
}

TEST(Harness, ForgedPolicyStopsMutualAttestation) {
    auto cfg = fast(default_config(2));
    cfg.attacks.push_back({.kind = AttackKind::ForgedPolicy, .target = "rpe-2",
                           .mutation = "session_id"});
    auto report = run_scenario(cfg);
    EXPECT_TRUE(report.ok()) << render_report(report);
    ASSERT_FALSE(report.detections.empty());
    bool policy_mismatch = false;
    for (const auto& d : report.detections) policy_mismatch |= d.reason == "PolicyMismatch";
    EXPECT_TRUE(policy_mismatch);
    for (const auto& [entity, outcome] : report.parties) {
        EXPECT_LT(outcome.reached, rpe::Phase::MutuallyAttested) << entity;
    }
    EXPECT_FALSE(report.all_connections_established());
}

TEST(Harness, AllPolicyMutationsAreDetectedAsPolicyMismatch) {
    for (const auto& mutation : policy_mutations()) {
        auto cfg = fast(default_config(2));
        cfg.attacks.push_back(
            {.kind = AttackKind::ForgedPolicy, .target = "rpe-1", .mutation = mutation});
        auto report = run_scenario(cfg);
        bool policy_mismatch = false;
        for (const auto& d : report.detections) policy_mismatch |= d.reason == "PolicyMismatch";
        EXPECT_TRUE(policy_mismatch) << mutation << "\n" << render_report(report);
        for (const auto& [entity, outcome] : report.parties)
            EXPECT_LT(outcome.reached, rpe::Phase::MutuallyAttested)
                << mutation << " " << entity;
    }
}

TEST(Harness, PolicyReplayIsDetected) {
    auto cfg = fast(default_config(2));
    cfg.seed = 7;
    cfg.session_salt = "round-1";
    auto first = run_scenario(cfg);
    ASSERT_TRUE(first.ok());

    auto second = fast(default_config(2));
    second.seed = 7;  // same platforms, new collaboration round
    second.session_salt = "round-2";
    second.attacks.push_back({.kind = AttackKind::PolicyReplay, .target = "rpe-2",
                              .replay_policy_text = first.policy_text});
    auto report = run_scenario(second);
    EXPECT_TRUE(report.ok()) << render_report(report);
    bool policy_mismatch = false;
    for (const auto& d : report.detections) policy_mismatch |= d.reason == "PolicyMismatch";
    EXPECT_TRUE(policy_mismatch);
}

TEST(Harness, EvidenceTamperIsDetected) {
    // sweep a few byte positions so both structural and signed-content flips
    // are exercised end to end
    for (auto kind : {vnet::RecordKind::RpeEvidence, vnet::RecordKind::PeEvidence}) {
        for (std::size_t byte_index : {7u, 40u, 160u}) {
            auto cfg = fast(default_config(2), 700ms);
            cfg.attacks.push_back({.kind = AttackKind::EvidenceTamper, .target = "rpe-2",
                                   .record_kind = kind, .byte_index = byte_index});
            auto report = run_scenario(cfg);
            EXPECT_TRUE(report.ok()) << render_report(report);
            ASSERT_FALSE(report.detections.empty()) << vnet::to_string(kind);
            for (const auto& d : report.detections) {
                EXPECT_NE(d.detecting_party, "rpe-2") << "victims detect, not the source";
                EXPECT_NE(d.reason, "Timeout");
            }
            EXPECT_FALSE(report.all_connections_established());
        }
    }
}

TEST(Harness, EvidenceReplayFromOldRunIsDetected) {
    auto cfg = fast(default_config(2));
    cfg.seed = 9;
    cfg.session_salt = "era-1";
    auto first = run_scenario(cfg);
    ASSERT_TRUE(first.ok());
    std::string old_rpe_evidence;
    for (const auto& e : first.board) {
        if (e.entity == "rpe-2" && e.kind == vnet::RecordKind::RpeEvidence)
            old_rpe_evidence = e.payload_hex;
    }
    ASSERT_FALSE(old_rpe_evidence.empty());

    auto second = fast(default_config(2));
    second.seed = 9;
    second.session_salt = "era-2";
    second.attacks.push_back({.kind = AttackKind::EvidenceReplay, .target = "rpe-2",
                              .record_kind = vnet::RecordKind::RpeEvidence,
                              .replay_payload_hex = old_rpe_evidence});
    auto report = run_scenario(second);
    EXPECT_TRUE(report.ok()) << render_report(report);
    bool matched = false;
    for (const auto& d : report.detections)
        matched |= d.reason == "PolicyMismatch" || d.reason == "BadSignature" ||
                   d.reason == "SessionMismatch";
    EXPECT_TRUE(matched) << render_report(report);
}

TEST(Harness, PlatformPolicingAttacks) {
    {
        auto cfg = fast(default_config(2));
        cfg.attacks.push_back({.kind = AttackKind::RogueQeid, .target = "rpe-2", .scope = "rpe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool qeid = false;
        for (const auto& d : report.detections)
            qeid |= d.reason == "QeidNotAllowed" && d.detecting_party == "rpe-2";
        EXPECT_TRUE(qeid) << render_report(report);
    }
    {
        auto cfg = fast(default_config(2));
        cfg.attacks.push_back({.kind = AttackKind::RogueQeid, .target = "rpe-1", .scope = "pe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool qeid = false;
        for (const auto& d : report.detections) qeid |= d.reason == "QeidNotAllowed";
        EXPECT_TRUE(qeid) << render_report(report);
        EXPECT_FALSE(report.all_connections_established());
    }
    {
        auto cfg = fast(default_config(2));
        cfg.attacks.push_back({.kind = AttackKind::StaleTcb, .target = "rpe-1", .scope = "pe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool stale = false;
        for (const auto& d : report.detections) stale |= d.reason == "TcbOutOfDate";
        EXPECT_TRUE(stale) << render_report(report);
    }
    {
        auto cfg = fast(default_config(2));
        cfg.attacks.push_back(
            {.kind = AttackKind::WrongMeasurement, .target = "rpe-2", .scope = "rpe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool wrong = false;
        for (const auto& d : report.detections) wrong |= d.reason == "MeasurementMismatch";
        EXPECT_TRUE(wrong) << render_report(report);
    }
    {
        auto cfg = fast(default_config(2));
        cfg.attacks.push_back(
            {.kind = AttackKind::WrongMeasurement, .target = "rpe-2", .scope = "pe"});
        auto report = run_scenario(cfg);
        EXPECT_TRUE(report.ok()) << render_report(report);
        bool wrong = false;
        for (const auto& d : report.detections) wrong |= d.reason == "IdentityMismatch";
        EXPECT_TRUE(wrong) << render_report(report);
    }
}

TEST(Harness, ReportRenderHasFourPhaseRows) {
    auto report = run_scenario(fast(default_config(2)));
    auto text = render_report(report);
    EXPECT_NE(text.find("Registration"), std::string::npos);
    EXPECT_NE(text.find("Mutual Attestation"), std::string::npos);
    EXPECT_NE(text.find("Local Verification"), std::string::npos);
    EXPECT_NE(text.find("Collaborative Preparation"), std::string::npos);
    EXPECT_NE(text.find("N/A"), std::string::npos) << "registration After column";
    EXPECT_NE(text.find("RESULT: ok"), std::string::npos);
}

TEST(Harness, ConfigErrors) {
    ScenarioConfig empty;
    EXPECT_THROW(run_scenario(empty), ConfigError);

    auto dup = default_config(2);
    dup.parties[1].entity = "rpe-1";
    EXPECT_THROW(run_scenario(dup), ConfigError);

    auto bad_attack = default_config(2);
    bad_attack.attacks.push_back({.kind = AttackKind::ForgedPolicy, .target = "rpe-9"});
    EXPECT_THROW(run_scenario(bad_attack), ConfigError);

    auto bad_kind = default_config(2);
    bad_kind.attacks.push_back({.kind = AttackKind::EvidenceTamper, .target = "rpe-1",
                                .record_kind = vnet::RecordKind::Announcement});
    EXPECT_THROW(run_scenario(bad_kind), ConfigError);
}
