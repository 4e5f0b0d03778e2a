#pragma once

// Self-checks exposed to the command line: a gradient suite running every
// differentiable op and the assembled model losses against central finite
// differences.

#include <string>
#include <vector>

#include "motion_prior/hmvae.hpp"
#include "motion_prior/trajectory.hpp"

namespace mp {

struct GradCheckItem {
    std::string name;
    double worst = 0;  // max relative error across seeds
};

// One entry per op family and per model loss; `seeds` independent random
// draws each. Runtime grows linearly with seeds.
std::vector<GradCheckItem> run_gradient_suite(int seeds);

}  // namespace mp
