#include "combi/render.hpp"

#include <stdexcept>

namespace combi {

std::pair<double, double> anneal_range(int iter, const AnnealConfig& cfg, double t_near,
                                       double t_far) {
    double tm = cfg.midpoint > 0.0 ? cfg.midpoint : 0.5 * (t_near + t_far);
    double eta = static_cast<double>(iter) / cfg.anneal_iters;
    if (eta < cfg.start_fraction) eta = cfg.start_fraction;
    if (eta > 1.0) eta = 1.0;
    return {tm + (t_near - tm) * eta, tm + (t_far - tm) * eta};
}

RaySamples sample_along_ray(double t_near, double t_far, int n, bool stratified, Rng& rng) {
    if (!(t_near < t_far)) throw std::invalid_argument("sample_along_ray: need t_near < t_far");
    if (n < 2) throw std::invalid_argument("sample_along_ray: need n >= 2");
    RaySamples s;
    s.t.resize(static_cast<std::size_t>(n));
    s.delta.resize(static_cast<std::size_t>(n));
    double bin = (t_far - t_near) / n;
    for (int i = 0; i < n; ++i) {
        double u = stratified ? rng.uniform() : 0.5;
        s.t[static_cast<std::size_t>(i)] = t_near + (i + u) * bin;
    }
    for (int i = 0; i + 1 < n; ++i)
        s.delta[static_cast<std::size_t>(i)] =
            s.t[static_cast<std::size_t>(i) + 1] - s.t[static_cast<std::size_t>(i)];
    s.delta[static_cast<std::size_t>(n) - 1] = t_far - s.t[static_cast<std::size_t>(n) - 1];
    return s;
}

RenderNodes volume_render(Graph& g, NodeId sigma, const NodeId color[3], const Tensor& t,
                          const Tensor& delta) {
    if (g.value(sigma).rank() != 2) throw std::invalid_argument("volume_render: sigma must be [B,N]");
    // copy, not reference: pushing nodes below may reallocate the tape
    const std::vector<int> shape = g.value(sigma).shape;
    if (!(t.shape == shape) || !(delta.shape == shape))
        throw std::invalid_argument("volume_render: t/delta shape mismatch");
    for (double v : g.value(sigma).data)
        if (v < 0.0) throw std::invalid_argument("volume_render: negative density");
    for (double v : delta.data)
        if (v <= 0.0) throw std::invalid_argument("volume_render: nonpositive delta");

    RenderNodes out;
    NodeId dl = g.constant(delta);
    NodeId sd = g.mul(sigma, dl);                       // sigma_i * delta_i
    NodeId cum = g.cumsum(sd, 1);                       // inclusive prefix sums
    NodeId excl = g.sub(cum, sd);                       // sum over j < i
    out.trans = g.exp(g.neg(excl));                     // T_i
    out.alpha = g.sub(g.constant(Tensor::full(shape, 1.0)), g.exp(g.neg(sd)));
    out.weight = g.mul(out.trans, out.alpha);
    out.acc = g.sum(out.weight, 1);
    NodeId wt = g.mul(out.weight, g.constant(t));
    out.depth = g.div(g.sum(wt, 1), g.max_const(out.acc, kDepthEps));
    for (int c = 0; c < 3; ++c) out.color[c] = g.sum(g.mul(out.weight, color[c]), 1);
    return out;
}

}  // namespace combi
