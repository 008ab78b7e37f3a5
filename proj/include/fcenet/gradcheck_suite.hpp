#pragma once

// Finite-difference checks of the learnable components at tiny shapes.

#include <string>
#include <vector>

#include "fcenet/training.hpp"

namespace fcenet {

struct SuiteResult {
    std::string module;
    GradCheckReport report;
    double seconds = 0.0;
};

// module: fdsm, fefm, sam, network, or all.
std::vector<SuiteResult> run_gradcheck_suite(const std::string& module, std::uint64_t seed,
                                             const GradCheckOptions& options = {});

const std::vector<std::string>& gradcheck_modules();

// Shapes used by the network check.
ModelConfig gradcheck_network_config();

std::string format_gradcheck_table(const std::vector<SuiteResult>& results);

}  // namespace fcenet
