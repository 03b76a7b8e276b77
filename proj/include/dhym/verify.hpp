#pragma once

#include <string>
#include <vector>

#include "dhym/core.hpp"

namespace dhym {

struct OracleOutcome {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<OracleOutcome> oracles;
    bool all_pass = true;
    std::string text() const;
    std::string first_failure() const;
};

/// The identity-oracle battery: matrix identities, the phase-variation
/// finite-difference check, and the pointwise/global inequalities, on
/// `samples` pinned-random draws.  `inject_fault` names an oracle whose
/// formula gets a deliberate sign flip (harness self-test).
VerifyReport run_verify_battery(std::uint64_t seed, int samples, const std::string& inject_fault = "");

} // namespace dhym
