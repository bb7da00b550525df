#pragma once
// Shared helpers for the test suites: deterministic randomness, the
// randomized quote scenario generator, and glue for invoking the python
// oracle scripts.

#include <gtest/gtest.h>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sras/crypto.hpp"
#include "sras/tee.hpp"

namespace sras::testing {

inline std::string source_path(const std::string& rel) {
    return std::string(SRAS_SOURCE_DIR) + "/" + rel;
}

// Runs a python oracle script with `input` on stdin, returns stdout lines.
inline std::vector<std::string> run_oracle(const std::string& script_rel,
                                           const std::string& input) {
    std::string in_path = std::string(::testing::TempDir()) + "oracle_in.txt";
    std::string out_path = std::string(::testing::TempDir()) + "oracle_out.txt";
    {
        std::ofstream f(in_path, std::ios::binary);
        f << input;
    }
    std::string cmd = std::string(SRAS_PYTHON) + " " + source_path(script_rel) + " < " + in_path +
                      " > " + out_path;
    int rc = std::system(cmd.c_str());
    if (rc != 0) throw std::runtime_error("oracle script failed: " + cmd);
    std::vector<std::string> lines;
    std::ifstream f(out_path);
    std::string line;
    while (std::getline(f, line)) lines.push_back(line);
    return lines;
}

// One randomized quote/collateral pair with a known expected status.
struct QuoteScenario {
    tee::Quote quote;
    tee::TcbCollateral collateral;
    tee::QuoteStatus expected;
};

// Generates scenarios spanning all six verification outcomes.
class QuoteScenarioGen {
public:
    explicit QuoteScenarioGen(std::uint64_t seed)
        : prng_(seed), rng_("quote-scenarios-" + std::to_string(seed)) {}

    QuoteScenario next() {
        using tee::QuoteStatus;
        static constexpr QuoteStatus kStatuses[] = {
            QuoteStatus::UpToDate,       QuoteStatus::OutOfDate, QuoteStatus::Revoked,
            QuoteStatus::ChainInvalid,   QuoteStatus::SignatureInvalid,
            QuoteStatus::UnknownFmspc,
        };
        return make(kStatuses[prng_() % 6]);
    }

    QuoteScenario make(tee::QuoteStatus target) {
        using tee::QuoteStatus;
        auto root = tee::create_root(rng_);
        std::array<std::uint8_t, tee::kQeidLen> qeid{};
        rng_.fill(qeid);
        std::string fmspc = "fmspc-" + std::to_string(prng_() % 1000);
        std::uint32_t svn = static_cast<std::uint32_t>(prng_() % 32);
        auto [platform, collateral] = root->create_platform(qeid, fmspc, svn, rng_);

        tee::ReportBody body;
        rng_.fill(body.mrenclave.bytes);
        rng_.fill(body.mrsigner.bytes);
        body.isvprodid = static_cast<std::uint16_t>(prng_());
        body.isvsvn = static_cast<std::uint16_t>(prng_());
        auto report_data = rng_.fixed<tee::kReportDataLen>();
        tee::Quote quote = platform->generate_quote(body, report_data);

        switch (target) {
            case QuoteStatus::UpToDate:
                break;
            case QuoteStatus::OutOfDate:
                if (prng_() % 2 == 0) {
                    collateral = tee::with_tcb_status(collateral, svn, tee::TcbStatus::OutOfDate);
                } else {
                    collateral.tcb_levels.clear();  // absent svn counts out of date
                }
                break;
            case QuoteStatus::Revoked: {
                const tee::Certificate* certs[] = {&quote.chain.root, &quote.chain.pck,
                                                   &quote.chain.attestation_key};
                collateral = tee::revoke(collateral, tee::key_id(certs[prng_() % 3]->subject));
                break;
            }
            case QuoteStatus::ChainInvalid:
                switch (prng_() % 3) {
                    case 0: {  // collateral anchored at a different root
                        auto other = tee::create_root(rng_);
                        collateral.issuer = other->public_key();
                        break;
                    }
                    case 1:  // corrupt a chain signature
                        quote.chain.pck.issuer_signature.bytes[prng_() % 64] ^= 0x01;
                        break;
                    default:  // platform block no longer matches the AK cert
                        quote.platform.tcb_svn += 1;
                        break;
                }
                break;
            case QuoteStatus::SignatureInvalid:
                if (prng_() % 2 == 0) {
                    quote.signature.bytes[prng_() % 64] ^= 0x01;
                } else {
                    quote.report.isvsvn ^= 1;  // report mutated after signing
                }
                break;
            case QuoteStatus::UnknownFmspc:
                collateral.fmspc = fmspc + "-other";
                break;
        }
        return {quote, collateral, target};
    }

private:
    std::mt19937_64 prng_;
    crypto::SeededRng rng_;
};

}  // namespace sras::testing
