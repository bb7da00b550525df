#pragma once
// TCP transport for the virtual network: one coordinator process hosts the
// board, parties connect as clients. Frames are length-prefixed; layout in
// docs/FORMATS.md.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <set>
#include <thread>

#include "sras/vnet.hpp"

namespace sras::vnet {

namespace wire {

enum Verb : std::uint8_t {
    kPublish = 1,
    kFetch = 2,
    kAwait = 3,
    kResponse = 4,
    kFetchAll = 5,
    kTamper = 6,
    kErase = 7,
};

enum Status : std::uint8_t { kOk = 0, kMissing = 1, kTimeout = 2, kError = 3 };

struct Frame {
    std::uint8_t verb = 0;
    std::uint8_t kind = 0;
    std::uint8_t status = kOk;
    std::string entity;
    std::uint32_t timeout_ms = 0;
    std::uint64_t sequence = 0;
    Bytes payload;
};

inline Bytes encode_frame(const Frame& f) {
    ByteWriter body;
    body.u8(f.verb);
    body.u8(f.kind);
    body.u8(f.status);
    body.var16(f.entity);
    body.u32le(f.timeout_ms);
    body.u64le(f.sequence);
    body.var32(f.payload);
    ByteWriter out;
    out.var32(body.buffer());
    return out.take();
}

inline Frame decode_frame_body(ByteView body) {
    ByteReader r(body);
    Frame f;
    f.verb = r.u8();
    f.kind = r.u8();
    f.status = r.u8();
    f.entity = r.var16_string();
    f.timeout_ms = r.u32le();
    f.sequence = r.u64le();
    f.payload = r.var32();
    r.expect_done();
    return f;
}

inline bool send_all(int fd, ByteView data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

inline bool recv_all(int fd, std::uint8_t* out, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::recv(fd, out + off, len - off, 0);
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

inline std::optional<Frame> read_frame(int fd, std::size_t max_len = 1 << 24) {
    std::uint8_t len_raw[4];
    if (!recv_all(fd, len_raw, 4)) return std::nullopt;
    std::uint32_t len = static_cast<std::uint32_t>(len_raw[0]) | (len_raw[1] << 8) |
                        (len_raw[2] << 16) | (static_cast<std::uint32_t>(len_raw[3]) << 24);
    if (len > max_len) return std::nullopt;
    Bytes body(len);
    if (len > 0 && !recv_all(fd, body.data(), len)) return std::nullopt;
    try {
        return decode_frame_body(body);
    } catch (const WireError&) {
        return std::nullopt;
    }
}

// fetch_all response payload: u32 count, then per record
// u16 entity_len | entity | u64 sequence | u32 payload_len | payload.
inline Bytes encode_record_list(const std::vector<BoardRecord>& records) {
    ByteWriter w;
    w.u32le(static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        w.var16(r.entity);
        w.u64le(r.sequence);
        w.var32(r.payload);
    }
    return w.take();
}

inline std::vector<BoardRecord> decode_record_list(ByteView data, RecordKind kind) {
    ByteReader r(data);
    std::uint32_t count = r.u32le();
    std::vector<BoardRecord> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        BoardRecord rec;
        rec.entity = r.var16_string();
        rec.kind = kind;
        rec.sequence = r.u64le();
        rec.payload = r.var32();
        out.push_back(std::move(rec));
    }
    r.expect_done();
    return out;
}

}  // namespace wire

// Hosts an InMemoryBoard behind the TCP frame protocol. Each connection is
// served by its own thread; AWAIT blocks only that connection's thread.
class BoardCoordinator {
public:
    explicit BoardCoordinator(std::uint16_t port = 0)
        : board_(std::make_shared<InMemoryBoard>()) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw TransportError("socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
            ::listen(listen_fd_, 64) != 0) {
            ::close(listen_fd_);
            throw TransportError("bind/listen failed");
        }
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    ~BoardCoordinator() { stop(); }

    std::uint16_t port() const { return port_; }
    std::shared_ptr<InMemoryBoard> board() { return board_; }

    void stop() {
        bool expected = true;
        if (!running_.compare_exchange_strong(expected, false)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (accept_thread_.joinable()) accept_thread_.join();
        {
            std::lock_guard lock(workers_mu_);
            for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(workers_mu_);
            workers.swap(workers_);
        }
        for (auto& t : workers)
            if (t.joinable()) t.join();
    }

private:
    void accept_loop() {
        while (running_) {
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) break;
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            std::lock_guard lock(workers_mu_);
            open_fds_.insert(fd);
            workers_.emplace_back([this, fd] { serve(fd); });
        }
    }

    void serve(int fd) {
        while (running_) {
            auto req = wire::read_frame(fd);
            if (!req) break;
            wire::Frame resp;
            resp.verb = wire::kResponse;
            resp.kind = req->kind;
            auto kind = static_cast<RecordKind>(req->kind);
            switch (req->verb) {
                case wire::kPublish:
                    resp.sequence = board_->publish(req->entity, kind, std::move(req->payload));
                    break;
                case wire::kFetch: {
                    auto rec = board_->fetch(req->entity, kind);
                    if (rec) {
                        resp.sequence = rec->sequence;
                        resp.payload = std::move(rec->payload);
                    } else {
                        resp.status = wire::kMissing;
                    }
                    break;
                }
                case wire::kAwait: {
                    auto timeout = std::chrono::milliseconds(
                        std::min<std::uint32_t>(req->timeout_ms, 60'000));
                    auto rec = board_->await_record(req->entity, kind, timeout, req->sequence);
                    if (rec) {
                        resp.sequence = rec->sequence;
                        resp.payload = std::move(rec->payload);
                    } else {
                        resp.status = wire::kTimeout;
                    }
                    break;
                }
                case wire::kFetchAll:
                    resp.payload = wire::encode_record_list(board_->fetch_all(kind));
                    break;
                case wire::kTamper: {
                    Bytes replacement = std::move(req->payload);
                    bool ok = board_->tamper(req->entity, kind,
                                             [&replacement](Bytes& p) { p = replacement; });
                    if (!ok) resp.status = wire::kMissing;
                    break;
                }
                case wire::kErase:
                    if (!board_->erase(req->entity, kind)) resp.status = wire::kMissing;
                    break;
                default:
                    resp.status = wire::kError;
                    break;
            }
            if (!wire::send_all(fd, wire::encode_frame(resp))) break;
        }
        ::close(fd);
        std::lock_guard lock(workers_mu_);
        open_fds_.erase(fd);
    }

    std::shared_ptr<InMemoryBoard> board_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{true};
    std::thread accept_thread_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;
    std::set<int> open_fds_;
};

// Client-side Board implementation speaking the frame protocol. One request
// in flight per client; parties run sequentially so this does not block
// unrelated work.
class TcpBoard final : public Board {
public:
    TcpBoard(const std::string& host, std::uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw TransportError("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd_);
            throw TransportError("bad coordinator address: " + host);
        }
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd_);
            throw TransportError("connect to " + host + ":" + std::to_string(port) + " failed");
        }
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }

    ~TcpBoard() override {
        if (fd_ >= 0) ::close(fd_);
    }

    std::uint64_t publish(const std::string& entity, RecordKind kind, Bytes payload) override {
        wire::Frame req;
        req.verb = wire::kPublish;
        req.kind = static_cast<std::uint8_t>(kind);
        req.entity = entity;
        req.payload = std::move(payload);
        auto resp = roundtrip(req);
        append_log("publish", entity, kind);
        return resp.sequence;
    }

    std::optional<BoardRecord> fetch(const std::string& entity, RecordKind kind) override {
        wire::Frame req;
        req.verb = wire::kFetch;
        req.kind = static_cast<std::uint8_t>(kind);
        req.entity = entity;
        auto resp = roundtrip(req);
        append_log("fetch", entity, kind);
        if (resp.status == wire::kMissing) return std::nullopt;
        return BoardRecord{entity, kind, std::move(resp.payload), resp.sequence};
    }

    std::vector<BoardRecord> fetch_all(RecordKind kind) override {
        wire::Frame req;
        req.verb = wire::kFetchAll;
        req.kind = static_cast<std::uint8_t>(kind);
        auto resp = roundtrip(req);
        append_log("fetch_all", "*", kind);
        return wire::decode_record_list(resp.payload, kind);
    }

    std::optional<BoardRecord> await_record(const std::string& entity, RecordKind kind,
                                            std::chrono::milliseconds timeout,
                                            std::uint64_t after_sequence = 0) override {
        wire::Frame req;
        req.verb = wire::kAwait;
        req.kind = static_cast<std::uint8_t>(kind);
        req.entity = entity;
        req.timeout_ms = static_cast<std::uint32_t>(timeout.count());
        req.sequence = after_sequence;
        auto resp = roundtrip(req);
        append_log("await", entity, kind);
        if (resp.status == wire::kTimeout) return std::nullopt;
        return BoardRecord{entity, kind, std::move(resp.payload), resp.sequence};
    }

    bool tamper(const std::string& entity, RecordKind kind,
                const std::function<void(Bytes&)>& mutator) override {
        // fetch-modify-replace; the coordinator applies the replacement
        auto current = fetch(entity, kind);
        if (!current) return false;
        Bytes mutated = current->payload;
        mutator(mutated);
        wire::Frame req;
        req.verb = wire::kTamper;
        req.kind = static_cast<std::uint8_t>(kind);
        req.entity = entity;
        req.payload = std::move(mutated);
        auto resp = roundtrip(req);
        append_log("tamper", entity, kind);
        return resp.status == wire::kOk;
    }

    bool erase(const std::string& entity, RecordKind kind) override {
        wire::Frame req;
        req.verb = wire::kErase;
        req.kind = static_cast<std::uint8_t>(kind);
        req.entity = entity;
        auto resp = roundtrip(req);
        append_log("erase", entity, kind);
        return resp.status == wire::kOk;
    }

    std::vector<LogEntry> log() const override {
        std::lock_guard lock(mu_);
        return log_;
    }

private:
    wire::Frame roundtrip(const wire::Frame& req) {
        std::lock_guard lock(mu_);
        if (!wire::send_all(fd_, wire::encode_frame(req)))
            throw TransportError("send failed");
        auto resp = wire::read_frame(fd_);
        if (!resp || resp->verb != wire::kResponse || resp->status == wire::kError)
            throw TransportError("bad response from coordinator");
        return std::move(*resp);
    }

    void append_log(std::string direction, const std::string& entity, RecordKind kind) {
        std::lock_guard lock(mu_);
        log_.push_back({std::chrono::system_clock::now(), std::move(direction),
                        entity + "/" + std::string(to_string(kind))});
    }

    int fd_ = -1;
    mutable std::mutex mu_;
    std::vector<LogEntry> log_;
};

}  // namespace sras::vnet
