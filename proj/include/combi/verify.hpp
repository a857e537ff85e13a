#pragma once

#include <string>
#include <vector>

namespace combi {

struct GradcheckRow {
    std::string name;
    double error = 0;
    bool pass = false;
};

// Finite-difference audit of every differentiable op plus an end-to-end
// 4-ray / 8-sample model step through rendering and all loss terms.
// threshold is the max relative error accepted per row.
std::vector<GradcheckRow> gradcheck_all(double threshold = 1e-5);

}  // namespace combi
