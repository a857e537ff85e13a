#include "combi/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace combi {

namespace {

double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// inverse of softplus: k with ln(1+e^k) = c
double softplus_inverse(double c) {
    if (c > 30.0) return c;
    return std::log(std::expm1(c));
}

double max_abs_row_sum(const Tensor& W) {
    double worst = 0.0;
    for (int r = 0; r < W.dim(0); ++r) {
        double s = 0.0;
        for (int c = 0; c < W.dim(1); ++c) s += std::abs(W.at(r, c));
        worst = std::max(worst, s);
    }
    return worst;
}

}  // namespace

NodeId lipschitz_normalize(Graph& g, NodeId W, NodeId k) {
    NodeId rowsum = g.sum(g.abs(W), 1);  // [out,1]
    NodeId bound = g.softplus(k);        // [1]
    NodeId ratio = g.div(bound, g.max_const(rowsum, 1e-12));
    NodeId scale = g.min_const(ratio, 1.0);
    return g.mul(W, scale);
}

Tensor lipschitz_normalize_value(const Tensor& W, double k) {
    Graph g;
    NodeId w = g.constant(W);
    NodeId kk = g.constant(Tensor::scalar(k));
    return g.value(lipschitz_normalize(g, w, kk));
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::None: return x;
        case Activation::Relu: return x > 0 ? x : 0.0;
        case Activation::Sigmoid: return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                                : std::exp(x) / (1.0 + std::exp(x));
        case Activation::Softplus: return softplus(x);
    }
    return x;
}

Mlp::Mlp(const std::string& name, const std::vector<int>& widths, Activation hidden,
         Activation output, bool lipschitz, ParamStore& params, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    lipschitz_ = lipschitz;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        MlpLayer layer;
        layer.in = widths[i];
        layer.out = widths[i + 1];
        layer.act = (i + 2 == widths.size()) ? output : hidden;
        Tensor W({layer.out, layer.in});
        double lim = std::sqrt(6.0 / (layer.in + layer.out));
        for (double& v : W.data) v = rng.uniform(-lim, lim);
        Tensor b({1, layer.out});
        std::string base = name + "_l" + std::to_string(i);
        // k starts at the initial max row-sum so training begins exactly at
        // the unnormalized function
        if (lipschitz) {
            double k0 = softplus_inverse(std::max(max_abs_row_sum(W), 1e-6));
            layer.k_key = params.add(base + "_k", Tensor::scalar(k0));
        }
        layer.w_key = params.add(base + "_w", std::move(W));
        layer.b_key = params.add(base + "_b", std::move(b));
        layers_.push_back(layer);
    }
}

Mlp Mlp::attach(const std::string& name, const std::vector<int>& widths, Activation hidden,
                Activation output, bool lipschitz, const ParamStore& params) {
    Mlp m;
    m.lipschitz_ = lipschitz;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        MlpLayer layer;
        layer.in = widths[i];
        layer.out = widths[i + 1];
        layer.act = (i + 2 == widths.size()) ? output : hidden;
        std::string base = name + "_l" + std::to_string(i);
        layer.w_key = params.find(base + "_w");
        layer.b_key = params.find(base + "_b");
        if (lipschitz) layer.k_key = params.find(base + "_k");
        if (layer.w_key < 0 || layer.b_key < 0 || (lipschitz && layer.k_key < 0))
            throw std::invalid_argument("Mlp::attach: missing parameters for " + base);
        m.layers_.push_back(layer);
    }
    return m;
}

NodeId Mlp::forward(Graph& g, const ParamStore& params, NodeId x) const {
    NodeId h = x;
    for (const MlpLayer& layer : layers_) {
        NodeId W = g.param(layer.w_key, params.value(layer.w_key));
        if (lipschitz_) {
            NodeId k = g.param(layer.k_key, params.value(layer.k_key));
            W = lipschitz_normalize(g, W, k);
        }
        NodeId b = g.param(layer.b_key, params.value(layer.b_key));
        h = g.add(g.matmul(h, W, true), b);
        switch (layer.act) {
            case Activation::None: break;
            case Activation::Relu: h = g.relu(h); break;
            case Activation::Sigmoid: h = g.sigmoid(h); break;
            case Activation::Softplus: h = g.softplus(h); break;
        }
    }
    return h;
}

double Mlp::lipschitz_bound(const ParamStore& params) const {
    if (!lipschitz_)
        throw std::logic_error("lipschitz_bound: network is not Lipschitz-normalized");
    double bound = 1.0;
    for (const MlpLayer& layer : layers_) bound *= softplus(params.value(layer.k_key)[0]);
    return bound;
}

double Mlp::row_sum_violation(const ParamStore& params) const {
    if (!lipschitz_)
        throw std::logic_error("row_sum_violation: network is not Lipschitz-normalized");
    double worst = 0.0;
    for (const MlpLayer& layer : layers_) {
        double bound = softplus(params.value(layer.k_key)[0]);
        Tensor W = lipschitz_normalize_value(params.value(layer.w_key), params.value(layer.k_key)[0]);
        for (int r = 0; r < W.dim(0); ++r) {
            double s = 0.0;
            for (int c = 0; c < W.dim(1); ++c) s += std::abs(W.at(r, c));
            worst = std::max(worst, s - bound);
        }
    }
    return worst;
}

}  // namespace combi
