#pragma once

#include <functional>
#include <vector>

#include "combi/tensor.hpp"

namespace combi {

// f: scalar function of a flat parameter vector. grad_f: its claimed
// gradient (typically via Graph::backward). Returns the max over
// coordinates of |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|), central
// differences with the given eps. Non-finite probes count as failures
// (reported as infinity).
double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::function<std::vector<double>(const std::vector<double>&)>& grad_f,
                         const std::vector<double>& x0, double eps = 1e-6);

}  // namespace combi
