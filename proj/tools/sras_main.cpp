// sras: multi-party remote-attestation simulator CLI.
//
//   sras run --config cfg.json [--transport inmem|tcp] [--attack spec] ...
//   sras gen-policy --config cfg.json [-o policy.json]
//   sras policy-hash --policy policy.json
//   sras board --listen <port>
//
// Config and attack formats are described in the README.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "sras/harness.hpp"

using namespace sras;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::array<std::uint8_t, tee::kQeidLen> qeid_from(const nlohmann::json& platform,
                                                  const std::string& fallback_tag) {
    if (platform.contains("qeid")) {
        auto raw = fixed_from_hex<tee::kQeidLen>(platform.at("qeid").get<std::string>());
        if (!raw) throw harness::ConfigError("qeid must be 32 hex chars");
        return *raw;
    }
    std::array<std::uint8_t, tee::kQeidLen> q{};
    auto d = crypto::digest("qeid:" + fallback_tag);
    std::copy_n(d.bytes.begin(), q.size(), q.begin());
    return q;
}

harness::PlatformSpec platform_from(const nlohmann::json& j, const std::string& tag) {
    harness::PlatformSpec spec;
    spec.qeid = qeid_from(j, tag);
    if (j.contains("fmspc")) spec.fmspc = j.at("fmspc").get<std::string>();
    if (j.contains("tcb_svn")) spec.tcb_svn = j.at("tcb_svn").get<std::uint32_t>();
    return spec;
}

crypto::Digest32 digest_field(const nlohmann::json& j, const char* key,
                              const std::string& fallback_seed) {
    if (j.contains(key)) {
        auto d = crypto::Digest32::from_hex(j.at(key).get<std::string>());
        if (!d) throw harness::ConfigError(std::string(key) + " must be 64 hex chars");
        return *d;
    }
    return crypto::digest(fallback_seed);
}

harness::ScenarioConfig load_config(const std::string& path) {
    auto j = nlohmann::json::parse(read_file(path));
    harness::ScenarioConfig cfg;
    if (!j.contains("parties") || !j.at("parties").is_array())
        throw harness::ConfigError("config needs a parties array");
    for (const auto& pj : j.at("parties")) {
        harness::PartySpec party;
        party.entity = pj.at("entity").get<std::string>();
        party.rpe_platform = platform_from(pj.value("rpe_platform", nlohmann::json::object()),
                                           "rpe:" + party.entity);
        auto pej = pj.value("pe", nlohmann::json::object());
        party.pe.entity = pej.value("entity", "pe-" + party.entity);
        party.pe.platform = platform_from(pej.value("platform", nlohmann::json::object()),
                                          "pe:" + party.entity);
        party.pe.measurements.mrenclave =
            digest_field(pej, "mrenclave", party.pe.entity + "-code");
        party.pe.measurements.mrsigner =
            digest_field(pej, "mrsigner", party.pe.entity + "-signer");
        party.pe.measurements.isvprodid = pej.value("isvprodid", 0);
        party.pe.measurements.isvsvn = pej.value("isvsvn", 5);
        if (pej.contains("pin")) {
            party.pe.pin_mrenclave = false;
            for (const auto& f : pej.at("pin")) {
                auto name = f.get<std::string>();
                if (name == "mrenclave") party.pe.pin_mrenclave = true;
                else if (name == "mrsigner") party.pe.pin_mrsigner = true;
                else if (name == "isvprodid") party.pe.pin_isvprodid = true;
                else throw harness::ConfigError("unknown pin field " + name);
            }
        }
        if (pej.contains("isvsvn_minimum"))
            party.pe.isvsvn_minimum = pej.at("isvsvn_minimum").get<std::uint16_t>();
        if (pj.contains("rpe_measurement")) {
            auto d = crypto::Digest32::from_hex(pj.at("rpe_measurement").get<std::string>());
            if (!d) throw harness::ConfigError("rpe_measurement must be 64 hex chars");
            party.trusted_rpe_measurement = *d;
        }
        cfg.parties.push_back(std::move(party));
    }
    if (j.contains("transport"))
        cfg.transport = j.at("transport").get<std::string>() == "tcp" ? harness::Transport::Tcp
                                                                      : harness::Transport::InMem;
    if (j.contains("timeout_ms"))
        cfg.timeout = std::chrono::milliseconds(j.at("timeout_ms").get<std::uint64_t>());
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("session_salt")) cfg.session_salt = j.at("session_salt").get<std::string>();
    if (j.contains("policy_file")) cfg.policy_text = read_file(j.at("policy_file").get<std::string>());
    return cfg;
}

// Attack spec: kind:target[:key=value[,key=value...]]
// e.g. forged_policy:rpe-2:mutation=session_id
//      evidence_tamper:rpe-2:kind=pe_evidence,byte=7
//      rogue_qeid:rpe-1:scope=pe
//      policy_replay:rpe-2:file=old_policy.json
//      evidence_replay:rpe-2:kind=rpe_evidence,file=old_payload.hex
harness::AttackSpec parse_attack(const std::string& text) {
    harness::AttackSpec spec;
    auto first = text.find(':');
    if (first == std::string::npos) throw harness::ConfigError("attack spec needs kind:target");
    auto second = text.find(':', first + 1);
    std::string kind = text.substr(0, first);
    spec.target = text.substr(first + 1, second == std::string::npos ? std::string::npos
                                                                     : second - first - 1);
    using K = harness::AttackKind;
    if (kind == "forged_policy") spec.kind = K::ForgedPolicy;
    else if (kind == "policy_replay") spec.kind = K::PolicyReplay;
    else if (kind == "evidence_tamper") spec.kind = K::EvidenceTamper;
    else if (kind == "evidence_replay") spec.kind = K::EvidenceReplay;
    else if (kind == "rogue_qeid") spec.kind = K::RogueQeid;
    else if (kind == "stale_tcb") spec.kind = K::StaleTcb;
    else if (kind == "wrong_measurement") spec.kind = K::WrongMeasurement;
    else throw harness::ConfigError("unknown attack kind " + kind);

    if (second == std::string::npos) return spec;
    std::istringstream params(text.substr(second + 1));
    std::string kv;
    while (std::getline(params, kv, ',')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw harness::ConfigError("attack param needs key=value");
        auto key = kv.substr(0, eq);
        auto value = kv.substr(eq + 1);
        if (key == "mutation") spec.mutation = value;
        else if (key == "scope") spec.scope = value;
        else if (key == "byte") spec.byte_index = std::stoul(value);
        else if (key == "kind")
            spec.record_kind = value == "pe_evidence" ? vnet::RecordKind::PeEvidence
                                                      : vnet::RecordKind::RpeEvidence;
        else if (key == "file") {
            auto content = read_file(value);
            if (spec.kind == K::PolicyReplay) spec.replay_policy_text = content;
            else {
                while (!content.empty() && (content.back() == '\n' || content.back() == '\r'))
                    content.pop_back();
                spec.replay_payload_hex = content;
            }
        } else if (key == "payload") spec.replay_payload_hex = value;
        else throw harness::ConfigError("unknown attack param " + key);
    }
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SRAS multi-party remote-attestation simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a scenario end to end");
    std::string config_path, policy_path, report_path, transport, coordinator, measurement_hex;
    std::vector<std::string> attack_specs;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::uint64_t timeout_ms = 0;
    run->add_option("--config", config_path, "scenario config JSON")->required();
    run->add_option("--policy", policy_path, "policy file overriding the generated one");
    run->add_option("--transport", transport, "inmem|tcp");
    run->add_option("--coordinator", coordinator, "host:port of an external board coordinator");
    run->add_option("--attack", attack_specs, "attack spec kind:target[:k=v,...] (repeatable)");
    run->add_option("--seed", seed, "deterministic run seed")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--timeout", timeout_ms, "per-wait timeout in milliseconds");
    run->add_option("--report", report_path, "write the report to this path");
    run->add_option("--rpe-measurement", measurement_hex,
                    "trusted RPE measurement (hex), all parties");

    // gen-policy
    auto* gen = app.add_subcommand("gen-policy", "generate a policy from a scenario config");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "scenario config JSON")->required();
    gen->add_option("-o,--output", gen_out, "output path (default stdout)");

    // policy-hash
    auto* hash = app.add_subcommand("policy-hash", "canonical hash of a policy file");
    std::string hash_policy;
    hash->add_option("--policy", hash_policy, "policy JSON file")->required();

    // board
    auto* board = app.add_subcommand("board", "host a TCP board coordinator");
    std::uint16_t listen_port = 0;
    board->add_option("--listen", listen_port, "port (0 picks one)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto cfg = load_config(config_path);
            if (!policy_path.empty()) cfg.policy_text = read_file(policy_path);
            if (!transport.empty())
                cfg.transport =
                    transport == "tcp" ? harness::Transport::Tcp : harness::Transport::InMem;
            if (!coordinator.empty()) {
                auto colon = coordinator.find(':');
                if (colon == std::string::npos)
                    throw harness::ConfigError("--coordinator needs host:port");
                cfg.coordinator_host = coordinator.substr(0, colon);
                cfg.coordinator_port =
                    static_cast<std::uint16_t>(std::stoul(coordinator.substr(colon + 1)));
                cfg.transport = harness::Transport::Tcp;
            }
            for (const auto& a : attack_specs) cfg.attacks.push_back(parse_attack(a));
            if (seed_set) cfg.seed = seed;
            if (timeout_ms) cfg.timeout = std::chrono::milliseconds(timeout_ms);
            if (!measurement_hex.empty()) {
                auto d = crypto::Digest32::from_hex(measurement_hex);
                if (!d) throw harness::ConfigError("--rpe-measurement must be 64 hex chars");
                for (auto& p : cfg.parties) p.trusted_rpe_measurement = *d;
            }
            auto report = harness::run_scenario(cfg);
            auto text = harness::render_report(report);
            std::cout << text;
            if (!report_path.empty()) {
                std::ofstream out(report_path, std::ios::binary);
                out << text;
            }
            return report.ok() ? 0 : 1;
        }
        if (gen->parsed()) {
            auto cfg = load_config(gen_config);
            auto text = harness::generate_policy_text(cfg);
            if (gen_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(gen_out, std::ios::binary);
                out << text;
            }
            return 0;
        }
        if (hash->parsed()) {
            auto p = policy::parse_policy(read_file(hash_policy));
            std::cout << policy::policy_hash(p).hex() << "\n";
            return 0;
        }
        if (board->parsed()) {
            vnet::BoardCoordinator coordinator_server(listen_port);
            std::cout << "board coordinator listening on 127.0.0.1:" << coordinator_server.port()
                      << std::endl;
            ::pause();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
