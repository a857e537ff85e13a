#pragma once

#include <vector>

#include "combi/graph.hpp"
#include "combi/rng.hpp"

namespace combi {

struct AnnealConfig {
    int anneal_iters = 1;     // N_t
    double start_fraction = 1.0;  // p_s in (0,1]
    double midpoint = 0.0;    // t_m; <= 0 means use (near+far)/2
};

// eta = min(max(iter/N_t, p_s), 1); shrinks [near,far] toward the midpoint
// early in training.
std::pair<double, double> anneal_range(int iter, const AnnealConfig& cfg, double t_near,
                                       double t_far);

struct RaySamples {
    std::vector<double> t;      // [N] sample distances
    std::vector<double> delta;  // [N]; delta[N-1] = t_far - t[N-1]
};

// N uniform bins in [t_near, t_far]; deterministic mode takes bin centers,
// stratified mode draws uniformly within each bin.
RaySamples sample_along_ray(double t_near, double t_far, int n, bool stratified, Rng& rng);

// Node handles for one rendered batch. sigma and the color channels are
// [B,N]; t/delta are fixed sample geometry.
struct RenderNodes {
    NodeId alpha = -1;   // [B,N]
    NodeId trans = -1;   // [B,N] transmittance T_i
    NodeId weight = -1;  // [B,N]
    NodeId acc = -1;     // [B,1]
    NodeId depth = -1;   // [B,1], eps-guarded denominator
    NodeId color[3] = {-1, -1, -1};  // [B,1] each
};

inline constexpr double kDepthEps = 1e-10;

// Differentiable volume-rendering quadrature. sigma must be nonnegative
// and delta positive (contract enforced).
RenderNodes volume_render(Graph& g, NodeId sigma, const NodeId color[3], const Tensor& t,
                          const Tensor& delta);

}  // namespace combi
