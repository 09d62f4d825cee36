#pragma once

#include "gldp/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gldp {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyOptions {
    int threads = 0;              // 0 = available parallelism
    int identity_samples = 1000;  // per-identity randomized instances
    uint64_t seed = 7;
    std::string model_path;       // optional model for the identity suite
};

/// Run the full verification battery; prints one PASS/FAIL line per
/// criterion to `out` as results arrive and returns them all.
std::vector<CriterionResult> run_verification(const VerifyOptions& options, std::ostream& out);

bool all_passed(const std::vector<CriterionResult>& results);

/// Built-in reference models used throughout the battery.
WalkModel reference_walk_1d(); // one-step walk, p(+1) = 0.7, p(-1) = 0.3
WalkModel reference_walk_2d(); // nearest-neighbor, probs 0.4/0.3/0.2/0.1

/// Random drifted full-lattice model with positively spanning support
/// (2..6 support points, |drift| bounded away from zero).
WalkModel random_drifted_model(uint64_t seed, int dim);

} // namespace gldp
