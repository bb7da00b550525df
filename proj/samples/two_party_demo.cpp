// Smallest end-to-end use of the library: two parties, in-memory transport,
// all four phases, one secure channel.

#include <iostream>

#include "sras/harness.hpp"

int main() {
    auto cfg = sras::harness::default_config(2);
    cfg.seed = 42;
    auto report = sras::harness::run_scenario(cfg);
    std::cout << sras::harness::render_report(report);
    return report.ok() ? 0 : 1;
}
