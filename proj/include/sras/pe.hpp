#pragma once
// Privacy Enclave simulation: key generation and quote binding, certificate
// installation, and the two-way handshake that builds a mutually
// authenticated secure channel. The handshake follows the TLS 1.3 message
// flow (ClientHello, ServerHello, EncryptedExtensions, Certificate,
// CertificateVerify, Finished) with a transcript-hash key schedule; the
// certificates are PE certificates validated by each side's local RPE, not
// X.509. Frame bytes in docs/FORMATS.md.

#include <poll.h>

#include <deque>
#include <variant>

#include "sras/records.hpp"
#include "sras/rpe.hpp"
#include "sras/vnet_tcp.hpp"

namespace sras::pe {

using crypto::PublicKey;
using crypto::Signature;

// ---------------------------------------------------------------------------
// Duplex byte channels (in-memory and TCP), one frame per message
// ---------------------------------------------------------------------------

class Duplex {
public:
    virtual ~Duplex() = default;
    virtual void send(Bytes frame) = 0;
    virtual std::optional<Bytes> recv(std::chrono::milliseconds timeout) = 0;
};

class InMemoryDuplex final : public Duplex {
public:
    static std::pair<std::unique_ptr<Duplex>, std::unique_ptr<Duplex>> make_pair() {
        auto a_to_b = std::make_shared<Queue>();
        auto b_to_a = std::make_shared<Queue>();
        return {std::unique_ptr<Duplex>(new InMemoryDuplex(a_to_b, b_to_a)),
                std::unique_ptr<Duplex>(new InMemoryDuplex(b_to_a, a_to_b))};
    }

    void send(Bytes frame) override {
        std::lock_guard lock(out_->mu);
        out_->frames.push_back(std::move(frame));
        out_->cv.notify_all();
    }

    std::optional<Bytes> recv(std::chrono::milliseconds timeout) override {
        std::unique_lock lock(in_->mu);
        if (!in_->cv.wait_for(lock, timeout, [this] { return !in_->frames.empty(); }))
            return std::nullopt;
        Bytes frame = std::move(in_->frames.front());
        in_->frames.pop_front();
        return frame;
    }

private:
    struct Queue {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<Bytes> frames;
    };
    InMemoryDuplex(std::shared_ptr<Queue> out, std::shared_ptr<Queue> in)
        : out_(std::move(out)), in_(std::move(in)) {}
    std::shared_ptr<Queue> out_;
    std::shared_ptr<Queue> in_;
};

// Length-prefixed frames over a connected socket.
class TcpDuplex final : public Duplex {
public:
    explicit TcpDuplex(int fd) : fd_(fd) {}
    ~TcpDuplex() override {
        if (fd_ >= 0) ::close(fd_);
    }
    TcpDuplex(const TcpDuplex&) = delete;
    TcpDuplex& operator=(const TcpDuplex&) = delete;

    static std::unique_ptr<TcpDuplex> connect(const std::string& host, std::uint16_t port) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw vnet::TransportError("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1 ||
            ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd);
            throw vnet::TransportError("connect failed");
        }
        return std::make_unique<TcpDuplex>(fd);
    }

    void send(Bytes frame) override {
        ByteWriter w;
        w.var32(frame);
        if (!vnet::wire::send_all(fd_, w.buffer())) throw vnet::TransportError("send failed");
    }

    std::optional<Bytes> recv(std::chrono::milliseconds timeout) override {
        pollfd pfd{fd_, POLLIN, 0};
        if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return std::nullopt;
        std::uint8_t len_raw[4];
        if (!vnet::wire::recv_all(fd_, len_raw, 4)) return std::nullopt;
        std::uint32_t len = static_cast<std::uint32_t>(len_raw[0]) | (len_raw[1] << 8) |
                            (len_raw[2] << 16) | (static_cast<std::uint32_t>(len_raw[3]) << 24);
        if (len > (1u << 24)) return std::nullopt;
        Bytes frame(len);
        if (len > 0 && !vnet::wire::recv_all(fd_, frame.data(), len)) return std::nullopt;
        return frame;
    }

private:
    int fd_;
};

// One-shot acceptor the harness uses to wire TCP PE channels.
class TcpListener {
public:
    explicit TcpListener(std::uint16_t port = 0) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw vnet::TransportError("socket() failed");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
            ::listen(fd_, 16) != 0) {
            ::close(fd_);
            throw vnet::TransportError("bind/listen failed");
        }
        socklen_t len = sizeof addr;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }
    ~TcpListener() {
        if (fd_ >= 0) ::close(fd_);
    }
    std::uint16_t port() const { return port_; }

    std::unique_ptr<TcpDuplex> accept(std::chrono::milliseconds timeout) {
        pollfd pfd{fd_, POLLIN, 0};
        if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return nullptr;
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) return nullptr;
        return std::make_unique<TcpDuplex>(fd);
    }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// ---------------------------------------------------------------------------
// Handshake frames
// ---------------------------------------------------------------------------

enum class MessageKind : std::uint8_t {
    ClientHello = 1,
    ServerHello = 2,
    EncryptedExtensions = 3,
    Certificate = 4,
    CertificateVerify = 5,
    Finished = 6,
    AppData = 7,
    Abort = 15,
};

enum class HandshakeErrorKind {
    SuiteMismatch,
    RoleMismatch,
    CertificateRejected,
    BadCertificateVerify,
    BadFinished,
    Timeout,
    Malformed,
    PeerAborted,
};

inline std::string_view to_string(HandshakeErrorKind k) {
    switch (k) {
        case HandshakeErrorKind::SuiteMismatch: return "SuiteMismatch";
        case HandshakeErrorKind::RoleMismatch: return "RoleMismatch";
        case HandshakeErrorKind::CertificateRejected: return "CertificateRejected";
        case HandshakeErrorKind::BadCertificateVerify: return "BadCertificateVerify";
        case HandshakeErrorKind::BadFinished: return "BadFinished";
        case HandshakeErrorKind::Timeout: return "Timeout";
        case HandshakeErrorKind::Malformed: return "Malformed";
        case HandshakeErrorKind::PeerAborted: return "PeerAborted";
    }
    return "?";
}

struct HandshakeError {
    HandshakeErrorKind kind;
    std::string detail;
};

// The local-RPE certificate check as seen by a PE.
class CertVerifier {
public:
    virtual ~CertVerifier() = default;
    virtual rpe::Verdict verify(const rpe::PeCertificate& cert, const std::string& peer_job) = 0;
};

class RpeCertVerifier final : public CertVerifier {
public:
    explicit RpeCertVerifier(rpe::Enclave& enclave) : enclave_(enclave) {}
    rpe::Verdict verify(const rpe::PeCertificate& cert, const std::string& peer_job) override {
        return enclave_.verify_pe_certificate(cert, peer_job);
    }

private:
    rpe::Enclave& enclave_;
};

// ---------------------------------------------------------------------------
// Secure channel
// ---------------------------------------------------------------------------

enum class ChannelErrorKind { DecryptFailure, CounterReplay };

struct ChannelError {
    ChannelErrorKind kind;
};

class SecureChannel {
public:
    SecureChannel(policy::Role role, rpe::PeCertificate peer_certificate, crypto::AeadKey send_key,
                  crypto::AeadKey recv_key, crypto::Digest32 transcript_hash)
        : role_(role), peer_certificate_(std::move(peer_certificate)), send_key_(send_key),
          recv_key_(recv_key), transcript_hash_(transcript_hash) {}

    policy::Role role() const { return role_; }
    const rpe::PeCertificate& peer_certificate() const { return peer_certificate_; }
    const crypto::Digest32& transcript_hash() const { return transcript_hash_; }

    // Frame: u64le counter || AEAD ciphertext. The counter doubles as nonce
    // and associated data; each direction counts independently.
    Bytes seal(ByteView plaintext) {
        std::uint64_t counter = send_counter_++;
        ByteWriter w;
        w.u64le(counter);
        w.raw(crypto::aead_seal(send_key_, crypto::counter_nonce(counter), plaintext,
                                aad(counter)));
        return w.take();
    }

    std::variant<Bytes, ChannelError> open(ByteView frame) {
        if (frame.size() < 8) return ChannelError{ChannelErrorKind::DecryptFailure};
        ByteReader r(frame);
        std::uint64_t counter = r.u64le();
        if (counter != recv_expected_) return ChannelError{ChannelErrorKind::CounterReplay};
        auto plaintext = crypto::aead_open(recv_key_, crypto::counter_nonce(counter),
                                           frame.subspan(8), aad(counter));
        if (!plaintext) return ChannelError{ChannelErrorKind::DecryptFailure};
        ++recv_expected_;
        return *plaintext;
    }

private:
    static Bytes aad(std::uint64_t counter) {
        ByteWriter w;
        w.raw(std::string_view("sras/app-v1"));
        w.u64le(counter);
        return w.take();
    }

    policy::Role role_;
    rpe::PeCertificate peer_certificate_;
    crypto::AeadKey send_key_;
    crypto::AeadKey recv_key_;
    crypto::Digest32 transcript_hash_;
    std::uint64_t send_counter_ = 0;
    std::uint64_t recv_expected_ = 0;
};

using HandshakeResult = std::variant<SecureChannel, HandshakeError>;

// ---------------------------------------------------------------------------
// Privacy Enclave
// ---------------------------------------------------------------------------

struct LocalVerificationFailed : std::runtime_error {
    explicit LocalVerificationFailed(rpe::PeFailReason reason)
        : std::runtime_error("local PE verification failed: " +
                             std::string(rpe::to_string(reason))),
          reason(reason) {}
    rpe::PeFailReason reason;
};

class PrivacyEnclave {
public:
    PrivacyEnclave(std::string entity, tee::ReportBody measurements,
                   std::shared_ptr<tee::Platform> platform, std::shared_ptr<crypto::Rng> rng)
        : entity_(std::move(entity)), measurements_(measurements), platform_(std::move(platform)),
          rng_(std::move(rng)) {}

    const std::string& entity() const { return entity_; }
    const PublicKey& public_key() const { return keypair_.public_key; }
    const std::optional<rpe::PeCertificate>& certificate() const { return certificate_; }

    // Generates the signing keypair and a quote binding it, and submits both
    // to the local RPE. Publishes the (pass or fail) evidence; throws on fail.
    rpe::PeEvidence bootstrap(rpe::Enclave& local_rpe, const std::string& job_id) {
        keypair_ = crypto::generate_keypair(*rng_);
        std::array<std::uint8_t, tee::kReportDataLen> rd{};
        auto d = crypto::digest(keypair_.public_key.bytes);
        std::copy(d.bytes.begin(), d.bytes.end(), rd.begin());
        tee::Quote quote;
        try {
            quote = platform_->generate_quote(measurements_, rd);
        } catch (const std::exception& e) {
            throw rpe::QuotingFailure(e.what());
        }
        auto evidence = local_rpe.verify_local_pe(quote, keypair_.public_key, job_id);
        if (evidence.result.verdict != rpe::PeVerdict::Pass)
            throw LocalVerificationFailed(*evidence.result.reason);
        return evidence;
    }

    void install_certificate(rpe::PeCertificate cert) {
        if (!(cert.pe_public_key == keypair_.public_key))
            throw std::invalid_argument("certificate does not match this PE's key");
        certificate_ = std::move(cert);
    }

    Signature sign_transcript(ByteView bytes) const {
        return crypto::sign(keypair_.private_key, bytes);
    }

    crypto::Rng& rng() { return *rng_; }

private:
    std::string entity_;
    tee::ReportBody measurements_;
    std::shared_ptr<tee::Platform> platform_;
    std::shared_ptr<crypto::Rng> rng_;
    crypto::SigningKeyPair keypair_;
    std::optional<rpe::PeCertificate> certificate_;
};

// ---------------------------------------------------------------------------
// Handshake implementation
// ---------------------------------------------------------------------------

namespace detail {

struct Transcript {
    crypto_hash_sha256_state state{};
    Transcript() { crypto_hash_sha256_init(&state); }
    void absorb(ByteView frame) { crypto_hash_sha256_update(&state, frame.data(), frame.size()); }
    crypto::Digest32 hash() const {
        auto copy = state;  // running hash; snapshot at each point
        crypto::Digest32 out;
        crypto_hash_sha256_final(&copy, out.bytes.data());
        return out;
    }
};

inline Bytes frame(MessageKind kind, ByteView body) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    w.raw(body);
    return w.take();
}

struct Endpoint {
    Duplex& io;
    Transcript transcript;
    std::chrono::milliseconds timeout;
    // handshake sealing keys, set after ServerHello
    std::optional<crypto::AeadKey> send_key;
    std::optional<crypto::AeadKey> recv_key;
    std::uint64_t seal_counter = 0;
    std::uint64_t open_counter = 0;

    void send_plain(MessageKind kind, ByteView body) {
        auto f = frame(kind, body);
        transcript.absorb(f);
        io.send(std::move(f));
    }

    // Sealed frames: kind byte in clear (and as AEAD ad), body encrypted.
    // The transcript absorbs the plaintext frame.
    void send_sealed(MessageKind kind, ByteView body) {
        auto plain = frame(kind, body);
        transcript.absorb(plain);
        std::array<std::uint8_t, 1> ad{static_cast<std::uint8_t>(kind)};
        ByteWriter w;
        w.u8(static_cast<std::uint8_t>(kind));
        w.raw(crypto::aead_seal(*send_key, crypto::counter_nonce(seal_counter++), body, ad));
        io.send(w.take());
    }

    void abort(HandshakeErrorKind kind) {
        ByteWriter w;
        w.var16(std::string(to_string(kind)));
        io.send(frame(MessageKind::Abort, w.buffer()));
    }

    struct Received {
        MessageKind kind;
        Bytes body;
    };

    std::variant<Received, HandshakeError> recv_expect(MessageKind expected, bool sealed) {
        auto raw = io.recv(timeout);
        if (!raw) return HandshakeError{HandshakeErrorKind::Timeout, "waiting for message"};
        if (raw->empty()) return HandshakeError{HandshakeErrorKind::Malformed, "empty frame"};
        auto kind = static_cast<MessageKind>((*raw)[0]);
        if (kind == MessageKind::Abort) {
            std::string detail;
            try {
                ByteReader r(ByteView(*raw).subspan(1));
                detail = r.var16_string();
            } catch (const WireError&) {
            }
            return HandshakeError{HandshakeErrorKind::PeerAborted, detail};
        }
        if (kind != expected)
            return HandshakeError{HandshakeErrorKind::Malformed, "unexpected message kind"};
        Bytes body(raw->begin() + 1, raw->end());
        if (sealed) {
            std::array<std::uint8_t, 1> ad{static_cast<std::uint8_t>(kind)};
            auto opened =
                crypto::aead_open(*recv_key, crypto::counter_nonce(open_counter++), body, ad);
            if (!opened)
                return HandshakeError{HandshakeErrorKind::Malformed, "handshake record decrypt"};
            body = std::move(*opened);
        }
        transcript.absorb(frame(kind, body));
        return Received{kind, std::move(body)};
    }
};

inline Bytes cv_signing_bytes(bool server, const crypto::Digest32& th) {
    ByteWriter w;
    w.raw(std::string_view(server ? "sras/hs-cv-server-v1" : "sras/hs-cv-client-v1"));
    w.raw(th.bytes);
    return w.take();
}

struct KeySchedule {
    std::array<std::uint8_t, 32> early_secret{};

    void init(const std::array<std::uint8_t, 32>& shared) {
        early_secret =
            crypto::hkdf_extract(to_bytes(std::string_view("sras/hs-v1")), shared);
    }
    crypto::AeadKey client_hs(const crypto::Digest32& th) const {
        return crypto::derive32(early_secret, "c hs", th.bytes);
    }
    crypto::AeadKey server_hs(const crypto::Digest32& th) const {
        return crypto::derive32(early_secret, "s hs", th.bytes);
    }
    std::array<std::uint8_t, 32> finished_key(bool server, const crypto::Digest32& th) const {
        return crypto::derive32(early_secret, server ? "s fin" : "c fin", th.bytes);
    }
    std::pair<crypto::AeadKey, crypto::AeadKey> app_keys(const crypto::Digest32& th) const {
        auto master = crypto::derive32(early_secret, "master", th.bytes);
        return {crypto::derive32(master, "c ap", th.bytes),
                crypto::derive32(master, "s ap", th.bytes)};
    }
};

}  // namespace detail

// Client side of the two-way handshake. `server_job` names the expected
// peer job per the policy's Connection block.
inline HandshakeResult client_handshake(PrivacyEnclave& pe, Duplex& io, CertVerifier& verifier,
                                        const std::string& own_job, const std::string& server_job,
                                        std::chrono::milliseconds timeout =
                                            std::chrono::milliseconds(10'000)) {
    using detail::Endpoint;
    Endpoint ep{io, {}, timeout};
    auto fail = [&ep](HandshakeErrorKind kind, std::string detail = {}) {
        ep.abort(kind);
        return HandshakeError{kind, std::move(detail)};
    };

    if (!pe.certificate()) return HandshakeError{HandshakeErrorKind::Malformed, "no certificate"};

    // (1) ClientHello: suite, client job, ephemeral key share
    auto ephemeral = crypto::generate_kx_keypair(pe.rng());
    {
        ByteWriter body;
        body.var16(std::string(crypto::kSuiteId));
        body.var16(own_job);
        body.raw(ephemeral.public_key.bytes);
        ep.send_plain(MessageKind::ClientHello, body.buffer());
    }

    // ServerHello
    auto sh = ep.recv_expect(MessageKind::ServerHello, /*sealed=*/false);
    if (auto* err = std::get_if<HandshakeError>(&sh)) return *err;
    crypto::KxPublicKey server_share;
    detail::KeySchedule schedule;
    try {
        ByteReader r(std::get<Endpoint::Received>(sh).body);
        auto peer_job = r.var16_string();
        server_share.bytes = r.fixed<32>();
        r.expect_done();
        if (peer_job != server_job)
            return fail(HandshakeErrorKind::RoleMismatch, "server claims job " + peer_job);
    } catch (const WireError&) {
        return fail(HandshakeErrorKind::Malformed, "ServerHello");
    }

    schedule.init(crypto::kx_shared(ephemeral.private_key, server_share));
    auto th_hello = ep.transcript.hash();
    ep.send_key = schedule.client_hs(th_hello);
    ep.recv_key = schedule.server_hs(th_hello);

    // EncryptedExtensions, server Certificate
    auto ee = ep.recv_expect(MessageKind::EncryptedExtensions, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&ee)) return *err;
    auto scert = ep.recv_expect(MessageKind::Certificate, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&scert)) return *err;
    auto server_cert = rpe::decode_pe_certificate(std::get<Endpoint::Received>(scert).body);
    if (!server_cert) return fail(HandshakeErrorKind::Malformed, "server certificate");

    // (3) the local RPE validates the server certificate
    auto verdict = verifier.verify(*server_cert, server_job);
    if (!verdict)
        return fail(HandshakeErrorKind::CertificateRejected,
                    std::string(rpe::to_string(*verdict.reason)));
    auto th_server_cert = ep.transcript.hash();

    // server CertificateVerify binds the certificate to this transcript
    auto scv = ep.recv_expect(MessageKind::CertificateVerify, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&scv)) return *err;
    if (!crypto::verify_bytes(server_cert->pe_public_key,
                              detail::cv_signing_bytes(true, th_server_cert),
                              std::get<Endpoint::Received>(scv).body))
        return fail(HandshakeErrorKind::BadCertificateVerify);

    // (4) client Certificate + CertificateVerify
    ep.send_sealed(MessageKind::Certificate, rpe::encode_pe_certificate(*pe.certificate()));
    auto th_client_cert = ep.transcript.hash();
    ep.send_sealed(MessageKind::CertificateVerify,
                   pe.sign_transcript(detail::cv_signing_bytes(false, th_client_cert)).bytes);

    // Finished, server first
    auto th_ccv = ep.transcript.hash();
    auto sfin = ep.recv_expect(MessageKind::Finished, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&sfin)) return *err;
    auto expect_mac = crypto::hmac_sha256(schedule.finished_key(true, th_hello), th_ccv.bytes);
    const auto& got = std::get<Endpoint::Received>(sfin).body;
    if (got.size() != expect_mac.size() || !std::equal(got.begin(), got.end(), expect_mac.begin()))
        return fail(HandshakeErrorKind::BadFinished);

    auto th_sfin = ep.transcript.hash();
    auto client_mac = crypto::hmac_sha256(schedule.finished_key(false, th_hello), th_sfin.bytes);
    ep.send_sealed(MessageKind::Finished, client_mac);

    auto th_final = ep.transcript.hash();
    auto [c_app, s_app] = schedule.app_keys(th_final);
    return SecureChannel(policy::Role::Client, *server_cert, c_app, s_app, th_final);
}

// Server side; `expected_clients` are the client jobs the policy connects to
// this server job.
inline HandshakeResult server_handshake(PrivacyEnclave& pe, Duplex& io, CertVerifier& verifier,
                                        const std::string& own_job,
                                        const std::vector<std::string>& expected_clients,
                                        std::chrono::milliseconds timeout =
                                            std::chrono::milliseconds(10'000)) {
    using detail::Endpoint;
    Endpoint ep{io, {}, timeout};
    auto fail = [&ep](HandshakeErrorKind kind, std::string detail = {}) {
        ep.abort(kind);
        return HandshakeError{kind, std::move(detail)};
    };

    if (!pe.certificate()) return HandshakeError{HandshakeErrorKind::Malformed, "no certificate"};

    auto ch = ep.recv_expect(MessageKind::ClientHello, /*sealed=*/false);
    if (auto* err = std::get_if<HandshakeError>(&ch)) return *err;
    std::string client_job;
    crypto::KxPublicKey client_share;
    try {
        ByteReader r(std::get<Endpoint::Received>(ch).body);
        auto suite = r.var16_string();
        client_job = r.var16_string();
        client_share.bytes = r.fixed<32>();
        r.expect_done();
        if (suite != crypto::kSuiteId) return fail(HandshakeErrorKind::SuiteMismatch, suite);
    } catch (const WireError&) {
        return fail(HandshakeErrorKind::Malformed, "ClientHello");
    }
    if (std::find(expected_clients.begin(), expected_clients.end(), client_job) ==
        expected_clients.end())
        return fail(HandshakeErrorKind::RoleMismatch, "client claims job " + client_job);

    // (2) ServerHello + EncryptedExtensions + Certificate + CertificateVerify
    auto ephemeral = crypto::generate_kx_keypair(pe.rng());
    {
        ByteWriter body;
        body.var16(own_job);
        body.raw(ephemeral.public_key.bytes);
        ep.send_plain(MessageKind::ServerHello, body.buffer());
    }
    detail::KeySchedule schedule;
    schedule.init(crypto::kx_shared(ephemeral.private_key, client_share));
    auto th_hello = ep.transcript.hash();
    ep.send_key = schedule.server_hs(th_hello);
    ep.recv_key = schedule.client_hs(th_hello);

    ep.send_sealed(MessageKind::EncryptedExtensions, Bytes{});
    ep.send_sealed(MessageKind::Certificate, rpe::encode_pe_certificate(*pe.certificate()));
    auto th_server_cert = ep.transcript.hash();
    ep.send_sealed(MessageKind::CertificateVerify,
                   pe.sign_transcript(detail::cv_signing_bytes(true, th_server_cert)).bytes);

    // client Certificate -> local RPE, then client CertificateVerify
    auto ccert = ep.recv_expect(MessageKind::Certificate, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&ccert)) return *err;
    auto client_cert = rpe::decode_pe_certificate(std::get<Endpoint::Received>(ccert).body);
    if (!client_cert) return fail(HandshakeErrorKind::Malformed, "client certificate");

    // (5) the local RPE validates the client certificate
    auto verdict = verifier.verify(*client_cert, client_job);
    if (!verdict)
        return fail(HandshakeErrorKind::CertificateRejected,
                    std::string(rpe::to_string(*verdict.reason)));
    auto th_client_cert = ep.transcript.hash();

    auto ccv = ep.recv_expect(MessageKind::CertificateVerify, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&ccv)) return *err;
    if (!crypto::verify_bytes(client_cert->pe_public_key,
                              detail::cv_signing_bytes(false, th_client_cert),
                              std::get<Endpoint::Received>(ccv).body))
        return fail(HandshakeErrorKind::BadCertificateVerify);

    auto th_ccv = ep.transcript.hash();
    ep.send_sealed(MessageKind::Finished,
                   crypto::hmac_sha256(schedule.finished_key(true, th_hello), th_ccv.bytes));
    auto th_sfin = ep.transcript.hash();

    auto cfin = ep.recv_expect(MessageKind::Finished, /*sealed=*/true);
    if (auto* err = std::get_if<HandshakeError>(&cfin)) return *err;
    auto expect_mac = crypto::hmac_sha256(schedule.finished_key(false, th_hello), th_sfin.bytes);
    const auto& got = std::get<Endpoint::Received>(cfin).body;
    if (got.size() != expect_mac.size() || !std::equal(got.begin(), got.end(), expect_mac.begin()))
        return fail(HandshakeErrorKind::BadFinished);

    auto th_final = ep.transcript.hash();
    auto [c_app, s_app] = schedule.app_keys(th_final);
    return SecureChannel(policy::Role::Server, *client_cert, s_app, c_app, th_final);
}

// ---------------------------------------------------------------------------
// Application data over an established channel
// ---------------------------------------------------------------------------

inline void send_data(SecureChannel& channel, Duplex& io, ByteView plaintext) {
    io.send(detail::frame(MessageKind::AppData, channel.seal(plaintext)));
}

inline std::variant<Bytes, ChannelError, HandshakeError> receive_data(
    SecureChannel& channel, Duplex& io,
    std::chrono::milliseconds timeout = std::chrono::milliseconds(10'000)) {
    auto raw = io.recv(timeout);
    if (!raw) return HandshakeError{HandshakeErrorKind::Timeout, "waiting for app data"};
    if (raw->empty() || (*raw)[0] != static_cast<std::uint8_t>(MessageKind::AppData))
        return HandshakeError{HandshakeErrorKind::Malformed, "expected app data"};
    auto result = channel.open(ByteView(*raw).subspan(1));
    if (auto* err = std::get_if<ChannelError>(&result)) return *err;
    return std::get<Bytes>(result);
}

}  // namespace sras::pe
