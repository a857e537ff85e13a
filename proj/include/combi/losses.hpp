#pragma once

#include <vector>

#include "combi/graph.hpp"
#include "combi/render.hpp"

namespace combi {

struct LossConfig {
    double lambda_dist = 2e-5;
    double lambda_fg = 1e-4;
    double lambda_kl = 1e-5;
    double lambda_ds = 0.1;
    double lambda_entr = 0.0;
    int dist_warmup_iters = 1000;   // lambda_dist forced to 0 before this
    double dist_ray_fraction = 0.5;
    int s_patch = 4;
    double eps_log = 1e-10;         // shared guard inside logs and pdf denominators
    double entropy_threshold = 0.1; // eps_Q on cumulative ray density
    bool kl_alpha_variant = false;  // InfoNeRF-style alpha-based pdf
};

// Per-term values and the weighted total for one step.
struct LossReport {
    double rgb = 0;        // mean per ray
    double rgb_sum = 0;    // total squared error, for logging
    double dist = 0, fg = 0, kl = 0, ds = 0, entr = 0;
    double lambda_dist_eff = 0;
    double mask_x = 1.0;
    double total = 0;
};

double lambda_dist_at(const LossConfig& cfg, int iter);

// Sum over rays of ||C - C*||^2 plus the per-ray mean. gt is [B,3].
struct RgbLossNodes {
    NodeId sum = -1;
    NodeId mean = -1;
};
RgbLossNodes rgb_loss(Graph& g, const NodeId color[3], const Tensor& gt);

// Normalized weight pdf p_i = w_i / max(sum w, eps). Rays whose weight sum
// is below eps are flagged degenerate (excluded from KL).
struct RayPdf {
    NodeId p = -1;              // [B,N]
    std::vector<char> degenerate;
};
RayPdf ray_pdf(Graph& g, NodeId w, double eps);

// Mean KL(p || p_hat) over pairs where neither ray is degenerate; zero
// node when no such pair exists.
NodeId kl_divergence_loss(Graph& g, const RayPdf& p, const RayPdf& p_hat, double eps);

// Depth-weighted distortion on a subset of rays: per ray,
// (1/max(depth,eps)) * (sum_ij w_i w_j |m_i - m_j| + (1/3) sum_i w_i^2 dt_i),
// mean over the subset. edges[r] holds the N+1 bin edges of ray r.
NodeId distortion_loss(Graph& g, NodeId w, NodeId depth,
                       const std::vector<std::vector<double>>& edges,
                       const std::vector<int>& subset, double eps);

// mean over rays of (1 - sum w)^2
NodeId foreground_loss(Graph& g, NodeId acc);

// Squared depth differences over the top-left (S-1)x(S-1) block of each
// patch, mean over kept patches. patch_start[k] is the first row of patch
// k inside `depth`; patches are S*S consecutive rays, row-major.
NodeId depth_smoothness_loss(Graph& g, NodeId depth, const std::vector<int>& patch_start, int s,
                             const std::vector<char>& keep);

// Masked Shannon entropy of the normalized alpha distribution, mean over
// all rays (mask zero where cumulative density <= eps_q).
NodeId entropy_loss(Graph& g, NodeId alpha, double eps_q, double eps);

struct LossNodes {
    NodeId rgb = -1;  // mean variant
    NodeId rgb_sum = -1;
    NodeId dist = -1, fg = -1, kl = -1, ds = -1, entr = -1;
};

// Weighted total with the lambda_dist warmup schedule; -1 terms are
// omitted. Fills `report` from the node values.
NodeId total_loss(Graph& g, const LossNodes& parts, const LossConfig& cfg, int iter,
                  LossReport* report = nullptr);

}  // namespace combi
