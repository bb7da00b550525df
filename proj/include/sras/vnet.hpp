#pragma once
// The Virtual Network: an entity-keyed, latest-wins broadcast board that
// carries signed records between parties and logs all traffic. Integrity
// comes from RPE signatures, never from the transport, so the board also
// exposes a test-only tamper surface for adversary scenarios.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sras/bytes.hpp"

namespace sras::vnet {

enum class RecordKind : std::uint8_t {
    Announcement = 1,
    RpeEvidence = 2,
    PeEvidence = 3,
    ConsensusResult = 4,
};

inline std::string_view to_string(RecordKind k) {
    switch (k) {
        case RecordKind::Announcement: return "Announcement";
        case RecordKind::RpeEvidence: return "RpeEvidence";
        case RecordKind::PeEvidence: return "PeEvidence";
        case RecordKind::ConsensusResult: return "ConsensusResult";
    }
    return "?";
}

struct BoardRecord {
    std::string entity;
    RecordKind kind = RecordKind::Announcement;
    Bytes payload;
    std::uint64_t sequence = 0;
};

struct LogEntry {
    std::chrono::system_clock::time_point at;
    std::string direction;  // publish / fetch / await / tamper / erase
    std::string summary;
};

struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class Board {
public:
    virtual ~Board() = default;

    virtual std::uint64_t publish(const std::string& entity, RecordKind kind, Bytes payload) = 0;
    virtual std::optional<BoardRecord> fetch(const std::string& entity, RecordKind kind) = 0;
    // Latest record per entity for the kind.
    virtual std::vector<BoardRecord> fetch_all(RecordKind kind) = 0;
    // Blocks until a record newer than after_sequence exists, or the timeout
    // elapses (nullopt). after_sequence = 0 waits for any record.
    virtual std::optional<BoardRecord> await_record(const std::string& entity, RecordKind kind,
                                                    std::chrono::milliseconds timeout,
                                                    std::uint64_t after_sequence = 0) = 0;

    // Test-only tamper surface ("compromised network"): mutate or drop a
    // stored payload in place; sequence numbers are unchanged.
    virtual bool tamper(const std::string& entity, RecordKind kind,
                        const std::function<void(Bytes&)>& mutator) = 0;
    virtual bool erase(const std::string& entity, RecordKind kind) = 0;

    virtual std::vector<LogEntry> log() const = 0;
};

class InMemoryBoard final : public Board {
public:
    std::uint64_t publish(const std::string& entity, RecordKind kind, Bytes payload) override {
        std::lock_guard lock(mu_);
        std::uint64_t seq = ++sequence_;
        records_[key(entity, kind)].push_back(BoardRecord{entity, kind, std::move(payload), seq});
        append_log("publish", entity, kind, seq);
        cv_.notify_all();
        return seq;
    }

    std::optional<BoardRecord> fetch(const std::string& entity, RecordKind kind) override {
        std::lock_guard lock(mu_);
        append_log("fetch", entity, kind, 0);
        return latest(entity, kind);
    }

    std::vector<BoardRecord> fetch_all(RecordKind kind) override {
        std::lock_guard lock(mu_);
        append_log("fetch_all", "*", kind, 0);
        std::vector<BoardRecord> out;
        for (const auto& [k, history] : records_) {
            if (!history.empty() && history.back().kind == kind) out.push_back(history.back());
        }
        return out;
    }

    std::optional<BoardRecord> await_record(const std::string& entity, RecordKind kind,
                                            std::chrono::milliseconds timeout,
                                            std::uint64_t after_sequence = 0) override {
        std::unique_lock lock(mu_);
        auto deadline = std::chrono::steady_clock::now() + timeout;
        std::optional<BoardRecord> found;
        bool ok = cv_.wait_until(lock, deadline, [&] {
            found = latest(entity, kind);
            return found.has_value() && found->sequence > after_sequence;
        });
        append_log(ok ? "await" : "await-timeout", entity, kind, ok ? found->sequence : 0);
        if (!ok) return std::nullopt;
        return found;
    }

    bool tamper(const std::string& entity, RecordKind kind,
                const std::function<void(Bytes&)>& mutator) override {
        std::lock_guard lock(mu_);
        auto it = records_.find(key(entity, kind));
        if (it == records_.end() || it->second.empty()) return false;
        mutator(it->second.back().payload);
        append_log("tamper", entity, kind, it->second.back().sequence);
        cv_.notify_all();
        return true;
    }

    bool erase(const std::string& entity, RecordKind kind) override {
        std::lock_guard lock(mu_);
        auto it = records_.find(key(entity, kind));
        if (it == records_.end() || it->second.empty()) return false;
        records_.erase(it);
        append_log("erase", entity, kind, 0);
        return true;
    }

    std::vector<LogEntry> log() const override {
        std::lock_guard lock(mu_);
        return log_;
    }

    // Final board state, one latest record per key; used by determinism checks.
    std::vector<BoardRecord> snapshot() const {
        std::lock_guard lock(mu_);
        std::vector<BoardRecord> out;
        for (const auto& [k, history] : records_)
            if (!history.empty()) out.push_back(history.back());
        return out;
    }

private:
    static std::string key(const std::string& entity, RecordKind kind) {
        return entity + "\x1f" + std::string(to_string(kind));
    }
    std::optional<BoardRecord> latest(const std::string& entity, RecordKind kind) const {
        auto it = records_.find(key(entity, kind));
        if (it == records_.end() || it->second.empty()) return std::nullopt;
        return it->second.back();
    }
    void append_log(std::string direction, const std::string& entity, RecordKind kind,
                    std::uint64_t seq) {
        log_.push_back({std::chrono::system_clock::now(), std::move(direction),
                        entity + "/" + std::string(to_string(kind)) +
                            (seq ? "#" + std::to_string(seq) : "")});
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, std::vector<BoardRecord>> records_;
    std::vector<LogEntry> log_;
    std::uint64_t sequence_ = 0;
};

// Decorator used by the attack harness: rewrites matching payloads as they
// are published, the way a compromised network agent would.
class InterceptingBoard final : public Board {
public:
    using Interceptor = std::function<void(const std::string& entity, RecordKind kind, Bytes&)>;

    InterceptingBoard(std::shared_ptr<Board> inner, Interceptor interceptor)
        : inner_(std::move(inner)), interceptor_(std::move(interceptor)) {}

    std::uint64_t publish(const std::string& entity, RecordKind kind, Bytes payload) override {
        interceptor_(entity, kind, payload);
        return inner_->publish(entity, kind, std::move(payload));
    }
    std::optional<BoardRecord> fetch(const std::string& entity, RecordKind kind) override {
        return inner_->fetch(entity, kind);
    }
    std::vector<BoardRecord> fetch_all(RecordKind kind) override { return inner_->fetch_all(kind); }
    std::optional<BoardRecord> await_record(const std::string& entity, RecordKind kind,
                                            std::chrono::milliseconds timeout,
                                            std::uint64_t after_sequence = 0) override {
        return inner_->await_record(entity, kind, timeout, after_sequence);
    }
    bool tamper(const std::string& entity, RecordKind kind,
                const std::function<void(Bytes&)>& mutator) override {
        return inner_->tamper(entity, kind, mutator);
    }
    bool erase(const std::string& entity, RecordKind kind) override {
        return inner_->erase(entity, kind);
    }
    std::vector<LogEntry> log() const override { return inner_->log(); }

private:
    std::shared_ptr<Board> inner_;
    Interceptor interceptor_;
};

}  // namespace sras::vnet
