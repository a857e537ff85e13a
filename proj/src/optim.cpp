#include "combi/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace combi {

void adam_step(ParamStore& params, const std::unordered_map<int, Tensor>& grads, AdamState& state,
               const std::vector<double>& lr_scale) {
    if (static_cast<int>(state.m.size()) != params.size())
        throw std::invalid_argument("adam_step: state not initialized for this parameter set");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (int key = 0; key < params.size(); ++key) {
        auto it = grads.find(key);
        Tensor& p = params.value(key);
        Tensor& m = state.m[static_cast<std::size_t>(key)];
        Tensor& v = state.v[static_cast<std::size_t>(key)];
        if (!p.same_shape(m))
            throw std::invalid_argument("adam_step: moment shape mismatch for " + params.name(key));
        double lr = state.lr;
        if (!lr_scale.empty()) lr *= lr_scale[static_cast<std::size_t>(key)];
        if (it != grads.end()) {
            bool finite = true;
            for (double g : it->second.data)
                if (!std::isfinite(g)) { finite = false; break; }
            if (!finite) {
                state.skipped_nonfinite += 1;
                continue;
            }
            if (!it->second.same_shape(p))
                throw std::invalid_argument("adam_step: gradient shape mismatch for " +
                                            params.name(key));
        }
        for (std::int64_t i = 0; i < p.numel(); ++i) {
            double g = it != grads.end() ? it->second[i] : 0.0;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            p[i] -= lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

}  // namespace combi
