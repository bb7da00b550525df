#pragma once
// The consensus policy document: model, strict parsing, referential
// validation, canonical serialization, hashing, and the lookups the
// protocol phases run against it.
//
// File format: UTF-8 JSON with exactly the top-level keys "Session ID",
// "TCB", "Out of Data TCB", "RPE", "PE", "Job", "Connection" (the document
// uses the "Out of Data" spelling; see docs/FORMATS.md). Unknown keys
// anywhere are a hard parse error: the policy is a consensus object and
// silent extensions would break cross-party hash equality.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sras/crypto.hpp"
#include "sras/tee.hpp"

namespace sras::policy {

using crypto::Digest32;

struct TcbRef {
    std::string id;
    std::string fmspc;
    std::string data;  // opaque collateral blob; decoded at attestation time
    bool operator==(const TcbRef&) const = default;
};

struct RpeEntry {
    std::string entity;
    std::vector<std::string> qeid_allowed;  // hex digests of platform qeids
    std::vector<std::string> tcb_allowed;   // ids into tcbs
    bool operator==(const RpeEntry&) const = default;
};

// For each measurement, either a concrete value or allow-any (nullopt).
struct PeEntry {
    std::string entity;
    std::optional<std::string> mrenclave;
    std::optional<std::string> mrsigner;
    std::optional<std::uint16_t> isvprodid;
    std::optional<std::uint16_t> isvsvn_minimum;
    bool operator==(const PeEntry&) const = default;
};

struct Job {
    std::string id;
    std::string rpe;
    std::string pe;
    std::vector<std::string> pe_qeid_allowed;
    std::vector<std::string> out_of_tcb;  // ids into out_of_date_tcbs
    bool operator==(const Job&) const = default;
};

struct Connection {
    std::string server;                // job id
    std::vector<std::string> clients;  // job ids
    bool operator==(const Connection&) const = default;
};

struct Policy {
    std::string session_id;
    std::vector<TcbRef> tcbs;
    std::vector<TcbRef> out_of_date_tcbs;
    std::vector<RpeEntry> rpes;
    std::vector<PeEntry> pes;
    std::vector<Job> jobs;
    std::vector<Connection> connections;
    bool operator==(const Policy&) const = default;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ParseErrorKind { Syntax, MissingField, UnknownKey, BadType, DuplicateId, ConflictingField };

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::string context)
        : std::runtime_error("policy parse error at " + context), kind_(kind),
          context_(std::move(context)) {}
    ParseErrorKind kind() const { return kind_; }
    const std::string& context() const { return context_; }

private:
    ParseErrorKind kind_;
    std::string context_;
};

enum class ValidationErrorKind { EmptySessionId, DuplicateId, UnresolvedReference, SelfConnection };

struct ValidationError {
    ValidationErrorKind kind;
    std::string reference;  // the offending id/reference, e.g. "job-1.pe"
    bool operator==(const ValidationError&) const = default;
};

struct UnknownEntity : std::runtime_error {
    explicit UnknownEntity(const std::string& e) : std::runtime_error("unknown entity: " + e) {}
};
struct UnknownJob : std::runtime_error {
    explicit UnknownJob(const std::string& j) : std::runtime_error("unknown job: " + j) {}
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& ctx) {
    if (!obj.contains(key)) throw ParseError(ParseErrorKind::MissingField, ctx + "." + key);
    return obj.at(key);
}

inline std::string require_string(const nlohmann::json& obj, const char* key,
                                  const std::string& ctx) {
    const auto& v = require(obj, key, ctx);
    if (!v.is_string()) throw ParseError(ParseErrorKind::BadType, ctx + "." + key);
    return v.get<std::string>();
}

inline std::vector<std::string> require_string_list(const nlohmann::json& obj, const char* key,
                                                    const std::string& ctx) {
    const auto& v = require(obj, key, ctx);
    if (!v.is_array()) throw ParseError(ParseErrorKind::BadType, ctx + "." + key);
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ParseError(ParseErrorKind::BadType, ctx + "." + key + "[]");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline std::uint16_t require_u16(const nlohmann::json& v, const std::string& ctx) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ParseError(ParseErrorKind::BadType, ctx);
    auto n = v.get<std::int64_t>();
    if (n < 0 || n > 0xffff) throw ParseError(ParseErrorKind::BadType, ctx);
    return static_cast<std::uint16_t>(n);
}

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.contains(it.key()))
            throw ParseError(ParseErrorKind::UnknownKey, ctx + "." + it.key());
    }
}

inline TcbRef parse_tcb(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_object()) throw ParseError(ParseErrorKind::BadType, ctx);
    reject_unknown_keys(j, {"id", "fmspc", "data"}, ctx);
    TcbRef t;
    t.id = require_string(j, "id", ctx);
    t.fmspc = require_string(j, "fmspc", ctx);
    t.data = require_string(j, "data", ctx);
    return t;
}

// One measurement field of a PE entry: either "<name>" with a concrete value
// or "<name>_allow_any": true, never both, never neither.
template <typename T, typename Get>
std::optional<T> parse_allow_any(const nlohmann::json& j, const std::string& name,
                                 const std::string& allow_key, const std::string& ctx, Get get) {
    bool has_value = j.contains(name);
    bool has_allow = j.contains(allow_key);
    if (has_value && has_allow) throw ParseError(ParseErrorKind::ConflictingField, ctx + "." + name);
    if (!has_value && !has_allow) throw ParseError(ParseErrorKind::MissingField, ctx + "." + name);
    if (has_allow) {
        const auto& v = j.at(allow_key);
        if (!v.is_boolean() || !v.get<bool>())
            throw ParseError(ParseErrorKind::BadType, ctx + "." + allow_key);
        return std::nullopt;
    }
    return get(j.at(name), ctx + "." + name);
}

}  // namespace detail

inline Policy parse_policy(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
        throw ParseError(ParseErrorKind::Syntax, "(document)");

    detail::reject_unknown_keys(
        j, {"Session ID", "TCB", "Out of Data TCB", "RPE", "PE", "Job", "Connection"}, "policy");

    Policy p;
    p.session_id = detail::require_string(j, "Session ID", "policy");

    auto parse_tcb_list = [&](const char* key, std::vector<TcbRef>& out) {
        const auto& arr = detail::require(j, key, "policy");
        if (!arr.is_array()) throw ParseError(ParseErrorKind::BadType, std::string("policy.") + key);
        std::set<std::string> seen;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string ctx = std::string(key) + "[" + std::to_string(i) + "]";
            out.push_back(detail::parse_tcb(arr[i], ctx));
            if (!seen.insert(out.back().id).second)
                throw ParseError(ParseErrorKind::DuplicateId, ctx + ".id=" + out.back().id);
        }
    };
    parse_tcb_list("TCB", p.tcbs);
    parse_tcb_list("Out of Data TCB", p.out_of_date_tcbs);

    {
        const auto& arr = detail::require(j, "RPE", "policy");
        if (!arr.is_array()) throw ParseError(ParseErrorKind::BadType, "policy.RPE");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string ctx = "RPE[" + std::to_string(i) + "]";
            const auto& e = arr[i];
            if (!e.is_object()) throw ParseError(ParseErrorKind::BadType, ctx);
            detail::reject_unknown_keys(e, {"entity", "qeid_allowed", "tcb_allowed"}, ctx);
            RpeEntry r;
            r.entity = detail::require_string(e, "entity", ctx);
            r.qeid_allowed = detail::require_string_list(e, "qeid_allowed", ctx);
            r.tcb_allowed = detail::require_string_list(e, "tcb_allowed", ctx);
            if (!seen.insert(r.entity).second)
                throw ParseError(ParseErrorKind::DuplicateId, ctx + ".entity=" + r.entity);
            p.rpes.push_back(std::move(r));
        }
    }
    {
        const auto& arr = detail::require(j, "PE", "policy");
        if (!arr.is_array()) throw ParseError(ParseErrorKind::BadType, "policy.PE");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string ctx = "PE[" + std::to_string(i) + "]";
            const auto& e = arr[i];
            if (!e.is_object()) throw ParseError(ParseErrorKind::BadType, ctx);
            detail::reject_unknown_keys(e,
                                        {"entity", "mrenclave", "mrenclave_allow_any", "mrsigner",
                                         "mrsigner_allow_any", "isvprodid", "isvprodid_allow_any",
                                         "isvsvn_minimum", "isvsvn_allow_any"},
                                        ctx);
            PeEntry pe;
            pe.entity = detail::require_string(e, "entity", ctx);
            auto get_string = [](const nlohmann::json& v, const std::string& c) {
                if (!v.is_string()) throw ParseError(ParseErrorKind::BadType, c);
                return v.get<std::string>();
            };
            auto get_u16 = [](const nlohmann::json& v, const std::string& c) {
                return detail::require_u16(v, c);
            };
            pe.mrenclave =
                detail::parse_allow_any<std::string>(e, "mrenclave", "mrenclave_allow_any", ctx,
                                                     get_string);
            pe.mrsigner = detail::parse_allow_any<std::string>(e, "mrsigner", "mrsigner_allow_any",
                                                               ctx, get_string);
            pe.isvprodid = detail::parse_allow_any<std::uint16_t>(e, "isvprodid",
                                                                  "isvprodid_allow_any", ctx,
                                                                  get_u16);
            pe.isvsvn_minimum = detail::parse_allow_any<std::uint16_t>(e, "isvsvn_minimum",
                                                                       "isvsvn_allow_any", ctx,
                                                                       get_u16);
            if (!seen.insert(pe.entity).second)
                throw ParseError(ParseErrorKind::DuplicateId, ctx + ".entity=" + pe.entity);
            p.pes.push_back(std::move(pe));
        }
    }
    {
        const auto& arr = detail::require(j, "Job", "policy");
        if (!arr.is_array()) throw ParseError(ParseErrorKind::BadType, "policy.Job");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string ctx = "Job[" + std::to_string(i) + "]";
            const auto& e = arr[i];
            if (!e.is_object()) throw ParseError(ParseErrorKind::BadType, ctx);
            detail::reject_unknown_keys(e, {"id", "rpe", "pe", "pe_qeid_allowed", "out_of_tcb"},
                                        ctx);
            Job job;
            job.id = detail::require_string(e, "id", ctx);
            job.rpe = detail::require_string(e, "rpe", ctx);
            job.pe = detail::require_string(e, "pe", ctx);
            job.pe_qeid_allowed = detail::require_string_list(e, "pe_qeid_allowed", ctx);
            job.out_of_tcb = detail::require_string_list(e, "out_of_tcb", ctx);
            if (!seen.insert(job.id).second)
                throw ParseError(ParseErrorKind::DuplicateId, ctx + ".id=" + job.id);
            p.jobs.push_back(std::move(job));
        }
    }
    {
        const auto& arr = detail::require(j, "Connection", "policy");
        if (!arr.is_array()) throw ParseError(ParseErrorKind::BadType, "policy.Connection");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string ctx = "Connection[" + std::to_string(i) + "]";
            const auto& e = arr[i];
            if (!e.is_object()) throw ParseError(ParseErrorKind::BadType, ctx);
            detail::reject_unknown_keys(e, {"server", "clients"}, ctx);
            Connection c;
            c.server = detail::require_string(e, "server", ctx);
            c.clients = detail::require_string_list(e, "clients", ctx);
            p.connections.push_back(std::move(c));
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline std::vector<ValidationError> validate_policy(const Policy& p) {
    std::vector<ValidationError> errors;
    auto err = [&errors](ValidationErrorKind k, std::string ref) {
        errors.push_back({k, std::move(ref)});
    };

    if (p.session_id.empty()) err(ValidationErrorKind::EmptySessionId, "Session ID");

    auto check_unique = [&err](const auto& list, auto key_fn, const std::string& what) {
        std::set<std::string> seen;
        for (const auto& e : list) {
            if (!seen.insert(key_fn(e)).second)
                err(ValidationErrorKind::DuplicateId, what + "=" + key_fn(e));
        }
    };
    check_unique(p.tcbs, [](const TcbRef& t) { return t.id; }, "TCB.id");
    check_unique(p.out_of_date_tcbs, [](const TcbRef& t) { return t.id; }, "Out of Data TCB.id");
    check_unique(p.rpes, [](const RpeEntry& r) { return r.entity; }, "RPE.entity");
    check_unique(p.pes, [](const PeEntry& e) { return e.entity; }, "PE.entity");
    check_unique(p.jobs, [](const Job& j) { return j.id; }, "Job.id");

    std::set<std::string> tcb_ids, out_tcb_ids, rpe_entities, pe_entities, job_ids;
    for (const auto& t : p.tcbs) tcb_ids.insert(t.id);
    for (const auto& t : p.out_of_date_tcbs) out_tcb_ids.insert(t.id);
    for (const auto& r : p.rpes) rpe_entities.insert(r.entity);
    for (const auto& e : p.pes) pe_entities.insert(e.entity);
    for (const auto& j : p.jobs) job_ids.insert(j.id);

    for (const auto& r : p.rpes) {
        for (const auto& id : r.tcb_allowed) {
            if (!tcb_ids.contains(id))
                err(ValidationErrorKind::UnresolvedReference, r.entity + ".tcb_allowed=" + id);
        }
    }
    for (const auto& job : p.jobs) {
        if (!rpe_entities.contains(job.rpe))
            err(ValidationErrorKind::UnresolvedReference, job.id + ".rpe=" + job.rpe);
        if (!pe_entities.contains(job.pe))
            err(ValidationErrorKind::UnresolvedReference, job.id + ".pe=" + job.pe);
        for (const auto& id : job.out_of_tcb) {
            if (!out_tcb_ids.contains(id))
                err(ValidationErrorKind::UnresolvedReference, job.id + ".out_of_tcb=" + id);
        }
    }
    for (std::size_t i = 0; i < p.connections.size(); ++i) {
        const auto& c = p.connections[i];
        std::string ctx = "Connection[" + std::to_string(i) + "]";
        if (!job_ids.contains(c.server))
            err(ValidationErrorKind::UnresolvedReference, ctx + ".server=" + c.server);
        for (const auto& cl : c.clients) {
            if (!job_ids.contains(cl))
                err(ValidationErrorKind::UnresolvedReference, ctx + ".clients=" + cl);
            if (cl == c.server) err(ValidationErrorKind::SelfConnection, ctx + ".server=" + c.server);
        }
    }
    return errors;
}

// ---------------------------------------------------------------------------
// Canonical serialization and hashing
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json to_json(const Policy& p) {
    nlohmann::json j;  // object keys sort lexicographically
    j["Session ID"] = p.session_id;
    auto tcb_list = [](const std::vector<TcbRef>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : list)
            arr.push_back({{"id", t.id}, {"fmspc", t.fmspc}, {"data", t.data}});
        return arr;
    };
    j["TCB"] = tcb_list(p.tcbs);
    j["Out of Data TCB"] = tcb_list(p.out_of_date_tcbs);
    {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : p.rpes)
            arr.push_back({{"entity", r.entity},
                           {"qeid_allowed", r.qeid_allowed},
                           {"tcb_allowed", r.tcb_allowed}});
        j["RPE"] = arr;
    }
    {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : p.pes) {
            nlohmann::json o;
            o["entity"] = e.entity;
            if (e.mrenclave) o["mrenclave"] = *e.mrenclave;
            else o["mrenclave_allow_any"] = true;
            if (e.mrsigner) o["mrsigner"] = *e.mrsigner;
            else o["mrsigner_allow_any"] = true;
            if (e.isvprodid) o["isvprodid"] = *e.isvprodid;
            else o["isvprodid_allow_any"] = true;
            if (e.isvsvn_minimum) o["isvsvn_minimum"] = *e.isvsvn_minimum;
            else o["isvsvn_allow_any"] = true;
            arr.push_back(o);
        }
        j["PE"] = arr;
    }
    {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& job : p.jobs)
            arr.push_back({{"id", job.id},
                           {"rpe", job.rpe},
                           {"pe", job.pe},
                           {"pe_qeid_allowed", job.pe_qeid_allowed},
                           {"out_of_tcb", job.out_of_tcb}});
        j["Job"] = arr;
    }
    {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : p.connections)
            arr.push_back({{"server", c.server}, {"clients", c.clients}});
        j["Connection"] = arr;
    }
    return j;
}

}  // namespace detail

// Deterministic bytes: object keys sorted lexicographically, no insignificant
// whitespace, JSON minimal escaping, arrays in document order.
inline Bytes canonical_bytes(const Policy& p) {
    return to_bytes(detail::to_json(p).dump());
}

inline Digest32 policy_hash(const Policy& p) { return crypto::digest(canonical_bytes(p)); }

// Pretty JSON for files the CLI writes; hashing always goes through
// canonical_bytes.
inline std::string to_text(const Policy& p) { return detail::to_json(p).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Lookups
// ---------------------------------------------------------------------------

inline const RpeEntry* find_rpe(const Policy& p, const std::string& entity) {
    for (const auto& r : p.rpes)
        if (r.entity == entity) return &r;
    return nullptr;
}

inline const PeEntry* find_pe(const Policy& p, const std::string& entity) {
    for (const auto& e : p.pes)
        if (e.entity == entity) return &e;
    return nullptr;
}

inline const Job* find_job(const Policy& p, const std::string& id) {
    for (const auto& j : p.jobs)
        if (j.id == id) return &j;
    return nullptr;
}

inline const TcbRef* find_tcb(const std::vector<TcbRef>& list, const std::string& id) {
    for (const auto& t : list)
        if (t.id == id) return &t;
    return nullptr;
}

inline std::vector<Job> job_for_rpe(const Policy& p, const std::string& rpe_entity) {
    if (!find_rpe(p, rpe_entity)) throw UnknownEntity(rpe_entity);
    std::vector<Job> out;
    for (const auto& j : p.jobs)
        if (j.rpe == rpe_entity) out.push_back(j);
    return out;
}

enum class Role { Server, Client };

inline std::string_view to_string(Role r) { return r == Role::Server ? "server" : "client"; }

// For a client job: its server(s); for a server job: all its clients. The
// role describes the peer.
inline std::vector<std::pair<std::string, Role>> peers_of(const Policy& p,
                                                          const std::string& job_id) {
    if (!find_job(p, job_id)) throw UnknownJob(job_id);
    std::vector<std::pair<std::string, Role>> out;
    for (const auto& c : p.connections) {
        if (c.server == job_id) {
            for (const auto& cl : c.clients) out.emplace_back(cl, Role::Client);
        } else if (std::find(c.clients.begin(), c.clients.end(), job_id) != c.clients.end()) {
            out.emplace_back(c.server, Role::Server);
        }
    }
    return out;
}

// True iff every non-allow-any measurement matches; the svn field is a
// minimum, the rest are equalities. Concrete digests are hex-encoded in the
// policy.
inline bool appraise_pe_identity(const PeEntry& entry, const tee::EnclaveReport& report) {
    if (entry.mrenclave && *entry.mrenclave != report.mrenclave.hex()) return false;
    if (entry.mrsigner && *entry.mrsigner != report.mrsigner.hex()) return false;
    if (entry.isvprodid && *entry.isvprodid != report.isvprodid) return false;
    if (entry.isvsvn_minimum && report.isvsvn < *entry.isvsvn_minimum) return false;
    return true;
}

}  // namespace sras::policy
