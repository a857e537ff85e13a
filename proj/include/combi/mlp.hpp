#pragma once

#include <string>
#include <vector>

#include "combi/graph.hpp"
#include "combi/optim.hpp"
#include "combi/rng.hpp"

namespace combi {

enum class Activation { None, Relu, Sigmoid, Softplus };

// Row-sum weight normalization: every row of the result has absolute-value
// row-sum <= softplus(k). Rows already within the bound pass unchanged.
// Differentiable w.r.t. both W and k.
NodeId lipschitz_normalize(Graph& g, NodeId W, NodeId k);

// Plain-value version for checks outside a graph.
Tensor lipschitz_normalize_value(const Tensor& W, double k);

struct MlpLayer {
    int w_key = -1;  // W stored [out, in]
    int b_key = -1;  // b stored [1, out]
    int k_key = -1;  // scalar Lipschitz bound parameter, -1 when disabled
    int in = 0, out = 0;
    Activation act = Activation::None;
};

// Small dense network. When `lipschitz` is set every layer carries a
// trainable bound k_i and applies the row-sum normalization functionally
// on each forward pass; W itself stays unnormalized.
class Mlp {
public:
    Mlp() = default;
    // widths = {in, hidden..., out}
    Mlp(const std::string& name, const std::vector<int>& widths, Activation hidden,
        Activation output, bool lipschitz, ParamStore& params, Rng& rng);
    static Mlp attach(const std::string& name, const std::vector<int>& widths, Activation hidden,
                      Activation output, bool lipschitz, const ParamStore& params);

    NodeId forward(Graph& g, const ParamStore& params, NodeId x) const;

    bool lipschitz() const { return lipschitz_; }
    const std::vector<MlpLayer>& layers() const { return layers_; }

    // Product of softplus(k_i) over layers; an upper bound on the inf-norm
    // Lipschitz constant of the pre-squash network. Rejects plain MLPs.
    double lipschitz_bound(const ParamStore& params) const;

    // Max absolute-value row-sum violation of the softplus(k_i) bound over
    // all normalized layers; 0 means the invariant holds exactly.
    double row_sum_violation(const ParamStore& params) const;

private:
    std::vector<MlpLayer> layers_;
    bool lipschitz_ = false;
};

double apply_activation(Activation a, double x);

}  // namespace combi
