#include "combi/gradcheck.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace combi {

double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::function<std::vector<double>(const std::vector<double>&)>& grad_f,
                         const std::vector<double>& x0, double eps) {
    std::vector<double> g_ad = grad_f(x0);
    if (g_ad.size() != x0.size())
        throw std::invalid_argument("finite_diff_check: gradient length mismatch");
    double worst = 0.0;
    std::vector<double> x = x0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        x[i] = x0[i] + eps;
        double fp = f(x);
        x[i] = x0[i] - eps;
        double fm = f(x);
        x[i] = x0[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            return std::numeric_limits<double>::infinity();
        double g_fd = (fp - fm) / (2.0 * eps);
        double err = std::abs(g_ad[i] - g_fd) / std::max(1e-12, std::abs(g_ad[i]) + std::abs(g_fd));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace combi
