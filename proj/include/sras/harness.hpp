#pragma once
// Scenario runner: builds N parties on simulated platforms, drives all four
// phases end to end over a shared board, injects adversary scenarios at
// module seams (policy delivery hook, board interception, platform
// substitution), and reports per-phase latency in before-upload /
// after-download / total categories.

#include <algorithm>
#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include "sras/pe.hpp"
#include "sras/rpe.hpp"
#include "sras/rpo.hpp"
#include "sras/vnet_tcp.hpp"

namespace sras::harness {

using Clock = std::chrono::steady_clock;

enum class Transport { InMem, Tcp };

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct PlatformSpec {
    std::array<std::uint8_t, tee::kQeidLen> qeid{};
    std::string fmspc = "fmspc value 1";
    std::uint32_t tcb_svn = 3;
};

struct PeSpec {
    std::string entity;
    PlatformSpec platform;
    tee::ReportBody measurements;
    // which measurements the generated policy pins; unpinned ones are
    // published as allow-any
    bool pin_mrenclave = true;
    bool pin_mrsigner = false;
    bool pin_isvprodid = false;
    std::optional<std::uint16_t> isvsvn_minimum;
};

struct PartySpec {
    std::string entity;  // RPE entity
    PlatformSpec rpe_platform;
    PeSpec pe;
    crypto::Digest32 trusted_rpe_measurement = rpe::kRpeBuildMeasurement;
};

enum class AttackKind {
    ForgedPolicy,
    PolicyReplay,
    EvidenceTamper,
    EvidenceReplay,
    RogueQeid,
    StaleTcb,
    WrongMeasurement,
};

inline std::string_view to_string(AttackKind k) {
    switch (k) {
        case AttackKind::ForgedPolicy: return "forged_policy";
        case AttackKind::PolicyReplay: return "policy_replay";
        case AttackKind::EvidenceTamper: return "evidence_tamper";
        case AttackKind::EvidenceReplay: return "evidence_replay";
        case AttackKind::RogueQeid: return "rogue_qeid";
        case AttackKind::StaleTcb: return "stale_tcb";
        case AttackKind::WrongMeasurement: return "wrong_measurement";
    }
    return "?";
}

struct AttackSpec {
    AttackKind kind = AttackKind::ForgedPolicy;
    std::string target;  // party entity
    // ForgedPolicy: which field to mutate (see mutate_policy); PolicyReplay
    // uses replay_policy_text instead.
    std::string mutation = "session_id";
    // EvidenceTamper / EvidenceReplay
    vnet::RecordKind record_kind = vnet::RecordKind::RpeEvidence;
    std::size_t byte_index = 0;
    std::string replay_payload_hex;
    std::string replay_policy_text;
    // RogueQeid / WrongMeasurement: "rpe" or "pe"
    std::string scope = "rpe";

    std::string describe() const {
        return std::string(to_string(kind)) + "(" + target + ")";
    }
};

struct ScenarioConfig {
    std::vector<PartySpec> parties;
    std::optional<std::string> policy_text;  // generated when absent
    Transport transport = Transport::InMem;
    std::string coordinator_host;  // empty: self-host when transport == Tcp
    std::uint16_t coordinator_port = 0;
    std::vector<AttackSpec> attacks;
    std::chrono::milliseconds timeout{10'000};
    std::optional<std::uint64_t> seed;
    std::string session_salt = "0";  // vary to start a new collaboration round
};

struct PhaseOutcome {
    rpe::Phase reached = rpe::Phase::Created;
    bool failed = false;
    std::string detail;
};

struct LatencyRow {
    bool before_na = false;
    bool after_na = false;
    double before_ms = 0;
    double after_ms = 0;
    double total_ms = 0;
};

struct ConnectionOutcome {
    std::string server_job;
    std::string client_job;
    bool established = false;
    std::string detail;
};

struct DetectionRecord {
    std::string attack;
    std::string detecting_party;
    std::string phase;
    std::string reason;
};

struct BoardEntry {
    std::string entity;
    vnet::RecordKind kind;
    std::string payload_hex;
    bool operator==(const BoardEntry&) const = default;
};

struct ScenarioReport {
    std::string session_id;
    std::string policy_text;
    std::map<std::string, PhaseOutcome> parties;
    std::array<LatencyRow, 4> latency{};  // Registration, Mutual, Local, Collaborative
    std::vector<ConnectionOutcome> connections;
    std::vector<DetectionRecord> detections;
    std::vector<std::string> undetected_attacks;
    std::vector<BoardEntry> board;
    bool honest = true;  // no attacks configured
    std::uint64_t seed_used = 0;

    bool all_ready() const {
        return std::all_of(parties.begin(), parties.end(), [](const auto& kv) {
            return kv.second.reached == rpe::Phase::Ready && !kv.second.failed;
        });
    }
    bool all_connections_established() const {
        return std::all_of(connections.begin(), connections.end(),
                           [](const ConnectionOutcome& c) { return c.established; });
    }
    bool ok() const {
        if (honest) return all_ready() && all_connections_established();
        return undetected_attacks.empty();
    }
};

// ---------------------------------------------------------------------------
// Policy generation
// ---------------------------------------------------------------------------

inline std::string uuid_from(crypto::Rng& rng) {
    auto raw = rng.fixed<16>();
    raw[6] = static_cast<std::uint8_t>(0x40 | (raw[6] & 0x0f));
    raw[8] = static_cast<std::uint8_t>(0x80 | (raw[8] & 0x3f));
    auto hex = to_hex(raw);
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
           hex.substr(16, 4) + "-" + hex.substr(20);
}

namespace detail {

struct FmspcInfo {
    std::set<std::uint32_t> svns;  // honest svns seen for this fmspc
    bool hosts_pe = false;
    std::string tcb_id;
    std::string out_id;
    std::optional<std::uint32_t> stale_svn;
};

inline std::map<std::string, FmspcInfo> collect_fmspcs(const std::vector<PartySpec>& parties) {
    std::map<std::string, FmspcInfo> out;
    for (const auto& p : parties) {
        out[p.rpe_platform.fmspc].svns.insert(p.rpe_platform.tcb_svn);
        out[p.pe.platform.fmspc].svns.insert(p.pe.platform.tcb_svn);
        out[p.pe.platform.fmspc].hosts_pe = true;
    }
    int i = 1;
    for (auto& [fmspc, info] : out) {
        info.tcb_id = "tcb-" + std::to_string(i);
        info.out_id = "tcb-" + std::to_string(i);  // ids are namespaced per list
        auto min_svn = *info.svns.begin();
        // out-of-date entries exist for the families that host PEs, which is
        // what jobs' out_of_tcb lists can reference
        if (info.hosts_pe && min_svn > 0) info.stale_svn = min_svn - 1;
        ++i;
    }
    return out;
}

}  // namespace detail

// Builds a policy in the reference document's shape from the party specs:
// one TCB entry per platform family, an out-of-date entry marking the svn
// just below the lowest honest one, one job per party, and a single
// connection in which the last party's job serves all the others.
inline policy::Policy build_policy(const std::vector<PartySpec>& parties,
                                   const crypto::PublicKey& root_key,
                                   const std::string& session_id) {
    if (parties.size() < 2) throw ConfigError("need at least two parties");
    policy::Policy p;
    p.session_id = session_id;

    auto fmspcs = detail::collect_fmspcs(parties);
    for (const auto& [fmspc, info] : fmspcs) {
        tee::TcbCollateral collateral;
        collateral.issuer = root_key;
        collateral.fmspc = fmspc;
        for (auto svn : info.svns) collateral.tcb_levels[svn] = tee::TcbStatus::UpToDate;
        p.tcbs.push_back({info.tcb_id, fmspc, tee::encode_collateral_blob(collateral)});
        if (info.stale_svn) {
            tee::TcbCollateral stale;
            stale.issuer = root_key;
            stale.fmspc = fmspc;
            stale.tcb_levels[*info.stale_svn] = tee::TcbStatus::OutOfDate;
            p.out_of_date_tcbs.push_back({info.out_id, fmspc, tee::encode_collateral_blob(stale)});
        }
    }

    for (std::size_t i = 0; i < parties.size(); ++i) {
        const auto& party = parties[i];
        const auto& rpe_info = fmspcs.at(party.rpe_platform.fmspc);
        p.rpes.push_back({party.entity,
                          {crypto::digest(party.rpe_platform.qeid).hex()},
                          {rpe_info.tcb_id}});

        policy::PeEntry pe;
        pe.entity = party.pe.entity;
        if (party.pe.pin_mrenclave) pe.mrenclave = party.pe.measurements.mrenclave.hex();
        if (party.pe.pin_mrsigner) pe.mrsigner = party.pe.measurements.mrsigner.hex();
        if (party.pe.pin_isvprodid) pe.isvprodid = party.pe.measurements.isvprodid;
        if (party.pe.isvsvn_minimum) pe.isvsvn_minimum = *party.pe.isvsvn_minimum;
        p.pes.push_back(pe);

        policy::Job job;
        job.id = "job-" + std::to_string(i + 1);
        job.rpe = party.entity;
        job.pe = party.pe.entity;
        job.pe_qeid_allowed = {crypto::digest(party.pe.platform.qeid).hex()};
        const auto& pe_info = fmspcs.at(party.pe.platform.fmspc);
        if (pe_info.stale_svn) job.out_of_tcb = {pe_info.out_id};
        p.jobs.push_back(job);
    }

    policy::Connection c;
    c.server = p.jobs.back().id;
    for (std::size_t i = 0; i + 1 < p.jobs.size(); ++i) c.clients.push_back(p.jobs[i].id);
    p.connections.push_back(c);
    return p;
}

// Valid single-field mutations that keep the forged party's own registration
// gates passing, so detection happens at mutual attestation as PolicyMismatch.
inline policy::Policy mutate_policy(policy::Policy p, const std::string& mutation,
                                    const std::string& target_entity, std::uint64_t salt) {
    auto tag = "-m" + std::to_string(salt % 1000);
    if (mutation == "session_id") {
        p.session_id += tag;
    } else if (mutation == "qeid_append") {
        p.rpes[salt % p.rpes.size()].qeid_allowed.push_back("qeid" + tag);
    } else if (mutation == "pe_qeid") {
        p.jobs[salt % p.jobs.size()].pe_qeid_allowed.push_back("qeid" + tag);
    } else if (mutation == "pe_measurement") {
        auto& pe = p.pes[salt % p.pes.size()];
        if (pe.mrenclave) *pe.mrenclave += tag;
        else pe.mrenclave = crypto::digest("mut" + tag).hex();
    } else if (mutation == "isvsvn_minimum") {
        auto& pe = p.pes[salt % p.pes.size()];
        pe.isvsvn_minimum = pe.isvsvn_minimum ? *pe.isvsvn_minimum + 1 : 1;
    } else if (mutation == "other_tcb_data") {
        // corrupt collateral of a TCB the target does not depend on; fall back
        // to the session id when every tcb is load-bearing for the target
        const auto* entry = policy::find_rpe(p, target_entity);
        for (auto& tcb : p.tcbs) {
            bool used = entry && std::find(entry->tcb_allowed.begin(), entry->tcb_allowed.end(),
                                           tcb.id) != entry->tcb_allowed.end();
            if (!used) {
                tcb.data += "00";
                return p;
            }
        }
        p.session_id += tag;
    } else if (mutation == "out_of_tcb_data") {
        if (!p.out_of_date_tcbs.empty()) p.out_of_date_tcbs[salt % p.out_of_date_tcbs.size()].data += "00";
        else p.session_id += tag;
    } else {
        throw ConfigError("unknown policy mutation: " + mutation);
    }
    return p;
}

inline const std::vector<std::string>& policy_mutations() {
    static const std::vector<std::string> kMutations = {
        "session_id",  "qeid_append",    "pe_qeid",        "pe_measurement",
        "isvsvn_minimum", "other_tcb_data", "out_of_tcb_data",
    };
    return kMutations;
}

// ---------------------------------------------------------------------------
// Run journal
// ---------------------------------------------------------------------------

namespace detail {

// Journal reasons use one vocabulary; PE verdict reasons are snake_case on
// the wire and are mapped here.
inline std::string reason_name(rpe::PeFailReason r) {
    switch (r) {
        case rpe::PeFailReason::KeyBindingMismatch: return "KeyBindingMismatch";
        case rpe::PeFailReason::QuoteInvalid: return "QuoteInvalid";
        case rpe::PeFailReason::IdentityMismatch: return "IdentityMismatch";
        case rpe::PeFailReason::QeidNotAllowed: return "QeidNotAllowed";
        case rpe::PeFailReason::TcbOutOfDate: return "TcbOutOfDate";
        case rpe::PeFailReason::UnknownFmspc: return "UnknownFmspc";
    }
    return "?";
}

struct Journal {
    std::mutex mu;
    std::vector<DetectionRecord> rejections;  // every rejection event
    std::vector<ConnectionOutcome> connections;

    void reject(const std::string& party, const std::string& phase, const std::string& reason,
                const std::string& subject) {
        std::lock_guard lock(mu);
        rejections.push_back({subject, party, phase, reason});
    }
    void connection(ConnectionOutcome outcome) {
        std::lock_guard lock(mu);
        for (auto& c : connections) {
            if (c.server_job == outcome.server_job && c.client_job == outcome.client_job) {
                if (!outcome.established) c = outcome;  // failures win
                return;
            }
        }
        connections.push_back(std::move(outcome));
    }
};

struct StopWatch {
    Clock::time_point start = Clock::now();
    double stop() const {
        return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    }
};

struct PartyLatency {
    double reg_before = 0;
    double mutual_before = 0, mutual_after = 0;
    double local_before = 0, local_after = 0;
    double collab_total = 0;
    bool collab_participated = false;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

class Scenario {
public:
    explicit Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) { validate_config(); }

    ScenarioReport run() {
        ScenarioReport report;
        report.honest = cfg_.attacks.empty();
        report.seed_used = cfg_.seed.value_or(std::random_device{}());

        crypto::SeededRng world_rng("scenario-" + std::to_string(report.seed_used));
        auto root = tee::create_root(world_rng);

        // platform registry keyed by qeid; attacks substitute platforms here
        std::map<std::string, std::shared_ptr<tee::Platform>> platforms;
        auto platform_for = [&](const PlatformSpec& spec) {
            auto key = to_hex(spec.qeid);
            auto it = platforms.find(key);
            if (it != platforms.end()) {
                if (it->second->info().fmspc != spec.fmspc ||
                    it->second->info().tcb_svn != spec.tcb_svn)
                    throw ConfigError("qeid reused with different platform data");
                return it->second;
            }
            auto [platform, collateral] =
                root->create_platform(spec.qeid, spec.fmspc, spec.tcb_svn, world_rng);
            platforms[key] = platform;
            return platform;
        };

        // session and policy from the honest specs
        crypto::SeededRng session_rng("session-" + std::to_string(report.seed_used) + "-" +
                                      cfg_.session_salt);
        std::string session_id = uuid_from(session_rng);
        policy::Policy the_policy;
        if (cfg_.policy_text) {
            the_policy = policy::parse_policy(*cfg_.policy_text);
            auto errors = policy::validate_policy(the_policy);
            if (!errors.empty()) throw ConfigError("provided policy invalid");
            session_id = the_policy.session_id;
        } else {
            the_policy = build_policy(cfg_.parties, root->public_key(), session_id);
        }
        report.session_id = session_id;
        report.policy_text = policy::to_text(the_policy);

        // board (with interception when the network is attacked)
        std::shared_ptr<vnet::InMemoryBoard> inmem_board;
        std::unique_ptr<vnet::BoardCoordinator> coordinator;
        std::uint16_t board_port = 0;
        if (cfg_.transport == Transport::InMem) {
            inmem_board = std::make_shared<vnet::InMemoryBoard>();
        } else if (cfg_.coordinator_host.empty()) {
            coordinator = std::make_unique<vnet::BoardCoordinator>();
            board_port = coordinator->port();
        } else {
            board_port = cfg_.coordinator_port;
        }

        auto interceptor = make_interceptor();
        auto party_board = [&]() -> std::shared_ptr<vnet::Board> {
            std::shared_ptr<vnet::Board> b;
            if (cfg_.transport == Transport::InMem) {
                b = inmem_board;
            } else {
                b = std::make_shared<vnet::TcpBoard>(
                    cfg_.coordinator_host.empty() ? "127.0.0.1" : cfg_.coordinator_host,
                    board_port);
            }
            if (interceptor) b = std::make_shared<vnet::InterceptingBoard>(b, interceptor);
            return b;
        };

        // per-party runtimes
        struct Party {
            PartySpec spec;
            std::shared_ptr<crypto::Rng> rng;
            std::shared_ptr<vnet::Board> board;
            std::shared_ptr<rpe::Enclave> enclave;
            std::unique_ptr<rpo::Owner> owner;
            std::shared_ptr<pe::PrivacyEnclave> workload;
            PhaseOutcome outcome;
            detail::PartyLatency latency;
        };
        std::vector<Party> parties(cfg_.parties.size());
        for (std::size_t i = 0; i < cfg_.parties.size(); ++i) {
            auto& party = parties[i];
            party.spec = cfg_.parties[i];
            apply_platform_attacks(party.spec);
            party.rng = std::make_shared<crypto::SeededRng>(
                "party-" + std::to_string(report.seed_used) + "-" + cfg_.session_salt + "-" +
                party.spec.entity);
            party.board = party_board();

            auto rpe_measurement = rpe::kRpeBuildMeasurement;
            if (has_attack(AttackKind::WrongMeasurement, party.spec.entity, "rpe"))
                rpe_measurement = crypto::digest("patched-rpe-build");
            party.enclave = std::make_shared<rpe::Enclave>(
                party.spec.entity, platform_for(party.spec.rpe_platform), party.board, party.rng,
                rpe_measurement);

            rpo::Owner::DeliveryHook hook = make_policy_hook(party.spec.entity, report.seed_used);
            party.owner = std::make_unique<rpo::Owner>(
                rpo::RpoConfig{party.spec.entity, the_policy,
                               party.spec.trusted_rpe_measurement, party.board},
                party.rng, std::move(hook));

            auto pe_measurements = party.spec.pe.measurements;
            if (has_attack(AttackKind::WrongMeasurement, party.spec.entity, "pe"))
                pe_measurements.mrenclave = crypto::digest("trojan-" + party.spec.pe.entity);
            party.workload = std::make_shared<pe::PrivacyEnclave>(
                party.spec.pe.entity, pe_measurements, platform_for(party.spec.pe.platform),
                party.rng);
        }

        // channel rendezvous per (server job, client job)
        struct Rendezvous {
            std::unique_ptr<pe::Duplex> client_end;
            std::unique_ptr<pe::Duplex> server_end;
            std::unique_ptr<pe::TcpListener> listener;
        };
        std::map<std::pair<std::string, std::string>, Rendezvous> channels;
        for (const auto& conn : the_policy.connections) {
            for (const auto& client : conn.clients) {
                auto key = std::make_pair(conn.server, client);
                Rendezvous rv;
                if (cfg_.transport == Transport::InMem) {
                    auto [a, b] = pe::InMemoryDuplex::make_pair();
                    rv.client_end = std::move(a);
                    rv.server_end = std::move(b);
                } else {
                    rv.listener = std::make_unique<pe::TcpListener>();
                }
                channels.emplace(key, std::move(rv));
            }
        }

        detail::Journal journal;
        std::vector<std::thread> threads;
        threads.reserve(parties.size());
        for (auto& party : parties) {
            auto* p = &party;
            threads.emplace_back(
                [this, p, &channels, &journal] { run_party(*p, channels, journal); });
        }
        for (auto& t : threads) t.join();

        // assemble the report
        for (auto& party : parties) report.parties[party.spec.entity] = party.outcome;
        {
            std::lock_guard lock(journal.mu);
            report.connections = journal.connections;
            // connections that never produced an outcome (an endpoint died
            // earlier) are reported as not established
            for (const auto& conn : the_policy.connections) {
                for (const auto& client : conn.clients) {
                    bool seen = std::any_of(report.connections.begin(), report.connections.end(),
                                            [&](const ConnectionOutcome& c) {
                                                return c.server_job == conn.server &&
                                                       c.client_job == client;
                                            });
                    if (!seen)
                        report.connections.push_back(
                            {conn.server, client, false, "no endpoint reached phase four"});
                }
            }
            match_attacks(journal, report);
        }
        fill_latency(parties, report);

        if (inmem_board) {
            for (const auto& rec : inmem_board->snapshot())
                report.board.push_back({rec.entity, rec.kind, to_hex(rec.payload)});
        } else if (coordinator) {
            for (const auto& rec : coordinator->board()->snapshot())
                report.board.push_back({rec.entity, rec.kind, to_hex(rec.payload)});
        }
        std::sort(report.board.begin(), report.board.end(), [](const auto& a, const auto& b) {
            return std::tie(a.entity, a.kind) < std::tie(b.entity, b.kind);
        });

        if (coordinator) coordinator->stop();
        return report;
    }

private:
    void validate_config() const {
        if (cfg_.parties.size() < 2) throw ConfigError("need at least two parties");
        std::set<std::string> entities;
        for (const auto& p : cfg_.parties) {
            if (!entities.insert(p.entity).second)
                throw ConfigError("duplicate party entity " + p.entity);
            if (p.entity.empty() || p.pe.entity.empty()) throw ConfigError("empty entity name");
        }
        for (const auto& a : cfg_.attacks) {
            bool known = std::any_of(cfg_.parties.begin(), cfg_.parties.end(),
                                     [&](const PartySpec& p) { return p.entity == a.target; });
            if (!known) throw ConfigError("attack targets unknown party " + a.target);
            if ((a.kind == AttackKind::EvidenceTamper || a.kind == AttackKind::EvidenceReplay) &&
                a.record_kind != vnet::RecordKind::RpeEvidence &&
                a.record_kind != vnet::RecordKind::PeEvidence)
                throw ConfigError("tamper/replay supports RpeEvidence and PeEvidence records");
        }
    }

    bool has_attack(AttackKind kind, const std::string& target, const std::string& scope = "") const {
        return std::any_of(cfg_.attacks.begin(), cfg_.attacks.end(), [&](const AttackSpec& a) {
            return a.kind == kind && a.target == target && (scope.empty() || a.scope == scope);
        });
    }

    // RogueQeid and StaleTcb change the platform a component actually runs
    // on, while the policy keeps the honest values.
    void apply_platform_attacks(PartySpec& spec) const {
        for (const auto& a : cfg_.attacks) {
            if (a.target != spec.entity) continue;
            if (a.kind == AttackKind::RogueQeid) {
                auto rogue = crypto::digest("rogue-qeid-" + spec.entity + "-" + a.scope);
                PlatformSpec* p = a.scope == "pe" ? &spec.pe.platform : &spec.rpe_platform;
                std::copy_n(rogue.bytes.begin(), tee::kQeidLen, p->qeid.begin());
            } else if (a.kind == AttackKind::StaleTcb) {
                // same (allowed) platform identity, downgraded TCB level
                PlatformSpec* p = a.scope == "pe" ? &spec.pe.platform : &spec.rpe_platform;
                p->tcb_svn = p->tcb_svn > 0 ? p->tcb_svn - 1 : 0;
            }
        }
    }

    rpo::Owner::DeliveryHook make_policy_hook(const std::string& entity,
                                              std::uint64_t seed) const {
        for (const auto& a : cfg_.attacks) {
            if (a.target != entity) continue;
            if (a.kind == AttackKind::ForgedPolicy) {
                auto mutation = a.mutation;
                return [mutation, entity, seed](policy::Policy p) {
                    return mutate_policy(std::move(p), mutation, entity, seed);
                };
            }
            if (a.kind == AttackKind::PolicyReplay) {
                auto text = a.replay_policy_text;
                return [text](policy::Policy) { return policy::parse_policy(text); };
            }
        }
        return {};
    }

    // Entities whose board records an attack on `target` affects.
    std::vector<std::string> attacked_entities(const AttackSpec& a) const {
        if (a.record_kind == vnet::RecordKind::PeEvidence) {
            for (const auto& p : cfg_.parties)
                if (p.entity == a.target) return {p.pe.entity};
            return {};
        }
        return {a.target};
    }

    vnet::InterceptingBoard::Interceptor make_interceptor() const {
        std::vector<std::tuple<std::string, vnet::RecordKind, std::size_t>> tampers;
        std::vector<std::tuple<std::string, vnet::RecordKind, Bytes>> replays;
        for (const auto& a : cfg_.attacks) {
            for (const auto& entity : attacked_entities(a)) {
                if (a.kind == AttackKind::EvidenceTamper) {
                    tampers.emplace_back(entity, a.record_kind, a.byte_index);
                } else if (a.kind == AttackKind::EvidenceReplay) {
                    auto raw = from_hex(a.replay_payload_hex);
                    if (!raw) throw ConfigError("evidence_replay payload is not hex");
                    replays.emplace_back(entity, a.record_kind, *raw);
                }
            }
        }
        if (tampers.empty() && replays.empty()) return {};
        return [tampers, replays](const std::string& entity, vnet::RecordKind kind, Bytes& p) {
            for (const auto& [e, k, payload] : replays) {
                if (e == entity && k == kind) p = payload;
            }
            for (const auto& [e, k, index] : tampers) {
                if (e == entity && k == kind && !p.empty()) p[index % p.size()] ^= 0x01;
            }
        };
    }

    struct Halt {};

    template <typename Channels>
    void run_party(auto& party, Channels& channels, detail::Journal& journal) {
        auto fail = [&](const std::string& phase, const std::string& reason,
                        const std::string& subject) {
            journal.reject(party.spec.entity, phase, reason, subject);
            party.outcome.failed = true;
            party.outcome.detail = phase + ": " + reason +
                                   (subject.empty() ? "" : " (" + subject + ")");
            throw Halt{};
        };

        try {
            auto& enclave = *party.enclave;
            const auto& entity = party.spec.entity;

            // ---- Registration
            {
                detail::StopWatch watch;
                auto quote = enclave.registration_quote();
                auto verdict = party.owner->attest_local_rpe(quote);
                if (!verdict)
                    fail("registration", std::string(rpo::to_string(*verdict.reason)), entity);
                try {
                    party.owner->deliver_policy(enclave);
                } catch (const rpe::InvalidPolicy& e) {
                    fail("registration", "InvalidPolicy", entity);
                } catch (const rpe::ChannelFailure& e) {
                    fail("registration", "ChannelFailure", entity);
                }
                party.latency.reg_before = watch.stop();
            }
            const auto& local_policy = enclave.policy();

            std::vector<std::string> peers;
            for (const auto& r : local_policy.rpes)
                if (r.entity != entity) peers.push_back(r.entity);

            // peers must have announced before mutual attestation starts; the
            // announcement is a liveness signal only, trust in identifiers is
            // established by the quotes exchanged next
            for (const auto& peer : peers) {
                auto rec = party.board->await_record(peer, vnet::RecordKind::Announcement,
                                                     cfg_.timeout);
                if (!rec) fail("mutual_attestation", "Timeout", peer);
                auto announcement = rpe::decode_announcement(rec->payload);
                if (!announcement || announcement->entity != peer)
                    fail("mutual_attestation", "Malformed", peer);
            }

            // ---- Mutual attestation
            {
                detail::StopWatch watch;
                enclave.generate_rpe_evidence();
                party.latency.mutual_before = watch.stop();
            }
            for (const auto& peer : peers) {
                auto rec =
                    party.board->await_record(peer, vnet::RecordKind::RpeEvidence, cfg_.timeout);
                if (!rec) fail("mutual_attestation", "Timeout", peer);
                detail::StopWatch watch;
                auto verdict = enclave.verify_peer_rpe_record(rec->payload, peer,
                                                              /*require_consensus_yes=*/false);
                party.latency.mutual_after += watch.stop();
                if (!verdict)
                    fail("mutual_attestation", std::string(rpe::to_string(*verdict.reason)), peer);
            }
            {
                detail::StopWatch watch;
                enclave.complete_mutual_attestation();
                party.latency.mutual_before += watch.stop();
            }

            // consensus gate: wait for every peer's yes
            for (const auto& peer : peers) {
                auto rec = party.board->fetch(peer, vnet::RecordKind::RpeEvidence);
                auto deadline = Clock::now() + cfg_.timeout;
                for (;;) {
                    std::uint64_t last_seen = 0;
                    if (rec) {
                        auto decoded = rpe::decode_rpe_evidence(rec->payload);
                        bool has_yes =
                            decoded && decoded->consensus.status == rpe::ConsensusStatus::Yes;
                        if (has_yes || !decoded) {
                            // verify yes records; a record that no longer
                            // decodes is handed to verification for rejection
                            detail::StopWatch watch;
                            auto verdict = enclave.verify_peer_rpe_record(
                                rec->payload, peer, /*require_consensus_yes=*/true);
                            party.latency.local_after += watch.stop();
                            if (!verdict)
                                fail("local_verification",
                                     std::string(rpe::to_string(*verdict.reason)), peer);
                            break;
                        }
                        last_seen = rec->sequence;
                    }
                    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - Clock::now());
                    if (remaining.count() <= 0) fail("local_verification", "Timeout", peer);
                    rec = party.board->await_record(peer, vnet::RecordKind::RpeEvidence,
                                                    remaining, last_seen);
                }
            }

            // ---- Local verification
            auto own_jobs = policy::job_for_rpe(local_policy, entity);
            for (const auto& job : own_jobs) {
                detail::StopWatch watch;
                try {
                    party.workload->bootstrap(enclave, job.id);
                    party.latency.local_before += watch.stop();
                } catch (const pe::LocalVerificationFailed& e) {
                    party.latency.local_before += watch.stop();
                    fail("local_verification", detail::reason_name(e.reason), job.pe);
                } catch (const rpe::QuotingFailure&) {
                    fail("local_verification", "QuotingFailure", job.pe);
                }
            }
            for (const auto& job : own_jobs) {
                for (const auto& [peer_job_id, role] : policy::peers_of(local_policy, job.id)) {
                    const auto* peer_job = policy::find_job(local_policy, peer_job_id);
                    auto rec = party.board->await_record(peer_job->pe,
                                                         vnet::RecordKind::PeEvidence,
                                                         cfg_.timeout);
                    if (!rec) fail("local_verification", "Timeout", peer_job->pe);
                    detail::StopWatch watch;
                    auto verdict =
                        enclave.verify_peer_pe_record(rec->payload, peer_job->pe, peer_job->rpe);
                    party.latency.local_after += watch.stop();
                    if (!verdict)
                        fail("local_verification", std::string(rpe::to_string(*verdict.reason)),
                             peer_job->pe);
                }
            }
            for (const auto& job : own_jobs) {
                detail::StopWatch watch;
                try {
                    party.workload->install_certificate(enclave.issue_pe_certificate(job.id));
                } catch (const rpe::Enclave::PeerNotVerified& e) {
                    fail("local_verification", "PeerNotVerified", job.id);
                }
                party.latency.local_after += watch.stop();
            }
            enclave.certificate_delivered();

            // ---- Collaborative preparation
            std::vector<std::thread> endpoints;
            std::atomic<bool> any_failed{false};
            for (const auto& conn : local_policy.connections) {
                const auto server_job_id = conn.server;
                const auto client_jobs = conn.clients;
                const auto* server_job = policy::find_job(local_policy, server_job_id);
                if (server_job->rpe == entity) {
                    for (const auto& client : client_jobs) {
                        endpoints.emplace_back([&party, &journal, &channels, &any_failed, this,
                                                entity, server_job_id, client_jobs, client] {
                            auto& rv = channels.at(std::make_pair(server_job_id, client));
                            std::unique_ptr<pe::Duplex> accepted;
                            pe::Duplex* io = rv.server_end.get();
                            if (!io) {
                                accepted = rv.listener->accept(cfg_.timeout);
                                io = accepted.get();
                            }
                            if (!io) {
                                journal.connection({server_job_id, client, false, "accept timeout"});
                                any_failed = true;
                                return;
                            }
                            pe::RpeCertVerifier verifier(*party.enclave);
                            auto result = pe::server_handshake(*party.workload, *io, verifier,
                                                               server_job_id, client_jobs,
                                                               cfg_.timeout);
                            if (auto* err = std::get_if<pe::HandshakeError>(&result)) {
                                journal.reject(entity, "collaborative_preparation",
                                               std::string(pe::to_string(err->kind)), client);
                                journal.connection({server_job_id, client, false, err->detail});
                                any_failed = true;
                                return;
                            }
                            auto& channel = std::get<pe::SecureChannel>(result);
                            auto got = pe::receive_data(channel, *io, cfg_.timeout);
                            if (auto* data = std::get_if<Bytes>(&got)) {
                                auto reply = *data;
                                auto ack = to_bytes(std::string_view(":ack"));
                                reply.insert(reply.end(), ack.begin(), ack.end());
                                pe::send_data(channel, *io, reply);
                            } else {
                                journal.connection({server_job_id, client, false, "no app data"});
                                any_failed = true;
                            }
                        });
                    }
                }
                for (const auto& client : client_jobs) {
                    const auto* client_job = policy::find_job(local_policy, client);
                    if (client_job->rpe != entity) continue;
                    endpoints.emplace_back([&party, &journal, &channels, &any_failed, this,
                                            entity, server_job_id, client] {
                        auto& rv = channels.at(std::make_pair(server_job_id, client));
                        detail::StopWatch watch;
                        std::unique_ptr<pe::Duplex> connected;
                        pe::Duplex* io = rv.client_end.get();
                        if (!io) {
                            connected = pe::TcpDuplex::connect("127.0.0.1", rv.listener->port());
                            io = connected.get();
                        }
                        pe::RpeCertVerifier verifier(*party.enclave);
                        auto result = pe::client_handshake(*party.workload, *io, verifier, client,
                                                           server_job_id, cfg_.timeout);
                        if (auto* err = std::get_if<pe::HandshakeError>(&result)) {
                            journal.reject(entity, "collaborative_preparation",
                                           std::string(pe::to_string(err->kind)), server_job_id);
                            journal.connection({server_job_id, client, false, err->detail});
                            any_failed = true;
                            return;
                        }
                        auto& channel = std::get<pe::SecureChannel>(result);
                        auto ping = to_bytes("ping:" + client);
                        pe::send_data(channel, *io, ping);
                        auto echoed = pe::receive_data(channel, *io, cfg_.timeout);
                        auto expected = ping;
                        auto ack = to_bytes(std::string_view(":ack"));
                        expected.insert(expected.end(), ack.begin(), ack.end());
                        if (!std::holds_alternative<Bytes>(echoed) ||
                            std::get<Bytes>(echoed) != expected) {
                            journal.connection({server_job_id, client, false, "exchange failed"});
                            any_failed = true;
                            return;
                        }
                        party.latency.collab_total += watch.stop();
                        party.latency.collab_participated = true;
                        journal.connection({server_job_id, client, true, ""});
                    });
                }
            }
            for (auto& t : endpoints) t.join();
            if (any_failed) {
                party.outcome.failed = true;
                if (party.outcome.detail.empty())
                    party.outcome.detail = "collaborative_preparation failed";
            }
        } catch (const Halt&) {
        } catch (const std::exception& e) {
            journal.reject(party.spec.entity, "run", e.what(), "");
            party.outcome.failed = true;
            party.outcome.detail = e.what();
        }
        party.outcome.reached = party.enclave->phase();
    }

    void match_attacks(detail::Journal& journal, ScenarioReport& report) const {
        for (const auto& attack : cfg_.attacks) {
            std::vector<std::string> subjects = attacked_entities(attack);
            auto matches = [&](const DetectionRecord& r) {
                switch (attack.kind) {
                    case AttackKind::ForgedPolicy:
                    case AttackKind::PolicyReplay:
                        return r.reason == "PolicyMismatch" || r.reason == "InvalidPolicy";
                    case AttackKind::EvidenceTamper:
                    case AttackKind::EvidenceReplay:
                        return std::find(subjects.begin(), subjects.end(), r.attack) !=
                                   subjects.end() &&
                               r.reason != "Timeout";
                    case AttackKind::RogueQeid:
                        return r.reason == "QeidNotAllowed" || r.reason == "NoCollateral";
                    case AttackKind::StaleTcb:
                        return r.reason == "TcbOutOfDate" || r.reason == "QuoteNotUpToDate" ||
                               (r.reason == "PeerVerdictFail" &&
                                r.detecting_party != attack.target);
                    case AttackKind::WrongMeasurement:
                        return r.reason == "MeasurementMismatch" ||
                               r.reason == "IdentityMismatch";
                }
                return false;
            };
            bool detected = false;
            for (const auto& r : journal.rejections) {
                if (matches(r)) {
                    report.detections.push_back(
                        {attack.describe(), r.detecting_party, r.phase, r.reason});
                    detected = true;
                }
            }
            if (!detected) report.undetected_attacks.push_back(attack.describe());
        }
        // honest runs must see no rejections at all
        if (cfg_.attacks.empty()) {
            for (const auto& r : journal.rejections)
                report.detections.push_back({"(unexpected)", r.detecting_party, r.phase, r.reason});
        }
    }

    template <typename Parties>
    void fill_latency(const Parties& parties, ScenarioReport& report) const {
        auto mean = [&](auto getter) {
            double sum = 0;
            int n = 0;
            for (const auto& p : parties) {
                auto v = getter(p.latency);
                if (v) {
                    sum += *v;
                    ++n;
                }
            }
            return n ? sum / n : 0.0;
        };
        using L = detail::PartyLatency;
        auto& rows = report.latency;
        rows[0] = {false, true, mean([](const L& l) { return std::optional(l.reg_before); }), 0,
                   0};
        rows[0].total_ms = rows[0].before_ms;
        rows[1] = {false, false, mean([](const L& l) { return std::optional(l.mutual_before); }),
                   mean([](const L& l) { return std::optional(l.mutual_after); }), 0};
        rows[1].total_ms = rows[1].before_ms + rows[1].after_ms;
        rows[2] = {false, false, mean([](const L& l) { return std::optional(l.local_before); }),
                   mean([](const L& l) { return std::optional(l.local_after); }), 0};
        rows[2].total_ms = rows[2].before_ms + rows[2].after_ms;
        rows[3] = {true, true, 0, 0, mean([](const L& l) {
                       return l.collab_participated ? std::optional(l.collab_total) : std::nullopt;
                   })};
    }

    ScenarioConfig cfg_;
};

inline ScenarioReport run_scenario(ScenarioConfig cfg) { return Scenario(std::move(cfg)).run(); }

// Policy text for a config, using the same seed-derived root and session as
// run_scenario, so a generated file stays verifiable by a later run with the
// same config and seed.
inline std::string generate_policy_text(const ScenarioConfig& cfg) {
    std::uint64_t seed = cfg.seed.value_or(std::random_device{}());
    crypto::SeededRng world_rng("scenario-" + std::to_string(seed));
    auto root = tee::create_root(world_rng);
    crypto::SeededRng session_rng("session-" + std::to_string(seed) + "-" + cfg.session_salt);
    auto p = build_policy(cfg.parties, root->public_key(), uuid_from(session_rng));
    return policy::to_text(p);
}

// Default N-party specs: distinct platforms per component, measurement pins
// on mrenclave.
inline ScenarioConfig default_config(std::size_t n_parties) {
    ScenarioConfig cfg;
    for (std::size_t i = 1; i <= n_parties; ++i) {
        PartySpec party;
        party.entity = "rpe-" + std::to_string(i);
        auto rpe_qeid = crypto::digest("qeid-rpe-" + std::to_string(i));
        std::copy_n(rpe_qeid.bytes.begin(), tee::kQeidLen, party.rpe_platform.qeid.begin());
        party.pe.entity = "pe-" + std::to_string(i);
        auto pe_qeid = crypto::digest("qeid-pe-" + std::to_string(i));
        std::copy_n(pe_qeid.bytes.begin(), tee::kQeidLen, party.pe.platform.qeid.begin());
        party.pe.measurements = {crypto::digest("pe-" + std::to_string(i) + "-code"),
                                 crypto::digest("vendor-" + std::to_string(i)),
                                 static_cast<std::uint16_t>(i), 5};
        cfg.parties.push_back(party);
    }
    cfg.seed = 1;
    return cfg;
}

// Text rendering of a report, phase rows first in the Before/After/Total
// layout, then parties, connections and detections.
inline std::string render_report(const ScenarioReport& report) {
    std::ostringstream out;
    auto cell = [](bool na, double v) {
        if (na) return std::string("N/A");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    out << "Session: " << report.session_id << "\n";
    out << "Phase                      | Before/ms | After/ms | Total/ms\n";
    out << "---------------------------+-----------+----------+---------\n";
    const char* names[4] = {"Registration", "Mutual Attestation", "Local Verification",
                            "Collaborative Preparation"};
    for (int i = 0; i < 4; ++i) {
        const auto& row = report.latency[i];
        char line[128];
        std::snprintf(line, sizeof line, "%-27s| %9s | %8s | %s\n", names[i],
                      cell(row.before_na, row.before_ms).c_str(),
                      cell(row.after_na, row.after_ms).c_str(),
                      cell(false, row.total_ms).c_str());
        out << line;
    }
    out << "\nParties:\n";
    for (const auto& [entity, outcome] : report.parties) {
        out << "  " << entity << ": " << rpe::to_string(outcome.reached)
            << (outcome.failed ? " FAILED " + outcome.detail : "") << "\n";
    }
    out << "Connections:\n";
    for (const auto& c : report.connections) {
        out << "  " << c.client_job << " -> " << c.server_job << ": "
            << (c.established ? "established" : "not established") << " " << c.detail << "\n";
    }
    if (!report.detections.empty()) {
        out << "Detections:\n";
        for (const auto& d : report.detections)
            out << "  " << d.attack << " detected by " << d.detecting_party << " at " << d.phase
                << " (" << d.reason << ")\n";
    }
    for (const auto& u : report.undetected_attacks) out << "UNDETECTED: " << u << "\n";
    out << (report.ok() ? "RESULT: ok" : "RESULT: failed") << "\n";
    return out.str();
}

}  // namespace sras::harness
