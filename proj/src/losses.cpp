#include "combi/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace combi {

double lambda_dist_at(const LossConfig& cfg, int iter) {
    return iter < cfg.dist_warmup_iters ? 0.0 : cfg.lambda_dist;
}

RgbLossNodes rgb_loss(Graph& g, const NodeId color[3], const Tensor& gt) {
    if (gt.rank() != 2 || gt.dim(1) != 3)
        throw std::invalid_argument("rgb_loss: ground truth must be [B,3]");
    int b = g.value(color[0]).dim(0);
    if (gt.dim(0) != b) throw std::invalid_argument("rgb_loss: batch size mismatch");
    NodeId total = -1;
    for (int c = 0; c < 3; ++c) {
        Tensor gc({b, 1});
        for (int r = 0; r < b; ++r) gc[r] = gt.at(r, c);
        NodeId d = g.square(g.sub(color[c], g.constant(gc)));
        total = c == 0 ? d : g.add(total, d);
    }
    RgbLossNodes out;
    out.sum = g.sum(total);
    out.mean = g.scale(out.sum, 1.0 / b);
    return out;
}

RayPdf ray_pdf(Graph& g, NodeId w, double eps) {
    if (g.value(w).rank() != 2) throw std::invalid_argument("ray_pdf: weights must be [B,N]");
    for (double v : g.value(w).data)
        if (v < 0.0) throw std::invalid_argument("ray_pdf: negative weight");
    int b = g.value(w).dim(0);
    NodeId acc = g.sum(w, 1);
    RayPdf out;
    out.p = g.div(w, g.max_const(acc, eps));
    const Tensor& av = g.value(acc);
    out.degenerate.resize(static_cast<std::size_t>(b));
    for (int r = 0; r < b; ++r)
        out.degenerate[static_cast<std::size_t>(r)] = av[r] < eps ? 1 : 0;
    return out;
}

NodeId kl_divergence_loss(Graph& g, const RayPdf& p, const RayPdf& p_hat, double eps) {
    const Tensor& pv = g.value(p.p);
    if (!(pv.shape == g.value(p_hat.p).shape))
        throw std::invalid_argument("kl_divergence_loss: pdf shape mismatch");
    int b = pv.dim(0);
    NodeId epsn = g.scalar(eps);
    NodeId ratio = g.div(g.add(p.p, epsn), g.add(p_hat.p, epsn));
    NodeId per_ray = g.sum(g.mul(p.p, g.log(ratio)), 1);  // [B,1]
    Tensor mask({b, 1});
    int kept = 0;
    for (int r = 0; r < b; ++r) {
        bool ok = !p.degenerate[static_cast<std::size_t>(r)] &&
                  !p_hat.degenerate[static_cast<std::size_t>(r)];
        mask[r] = ok ? 1.0 : 0.0;
        kept += ok;
    }
    if (kept == 0) return g.scalar(0.0);
    return g.scale(g.sum(g.mul(per_ray, g.constant(mask))), 1.0 / kept);
}

NodeId distortion_loss(Graph& g, NodeId w, NodeId depth,
                       const std::vector<std::vector<double>>& edges,
                       const std::vector<int>& subset, double eps) {
    const Tensor& wv = g.value(w);
    int n = wv.dim(1);
    if (subset.empty()) return g.scalar(0.0);
    NodeId acc = -1;
    for (int r : subset) {
        const std::vector<double>& e = edges[static_cast<std::size_t>(r)];
        if (static_cast<int>(e.size()) != n + 1)
            throw std::invalid_argument("distortion_loss: need N+1 bin edges per ray");
        for (int i = 0; i < n; ++i)
            if (!(e[static_cast<std::size_t>(i)] < e[static_cast<std::size_t>(i) + 1]))
                throw std::invalid_argument("distortion_loss: bin edges not increasing");
        Tensor mid_gap({n, n});
        Tensor widths({1, n});
        for (int i = 0; i < n; ++i) {
            double mi = 0.5 * (e[static_cast<std::size_t>(i)] + e[static_cast<std::size_t>(i) + 1]);
            widths[i] = e[static_cast<std::size_t>(i) + 1] - e[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) {
                double mj = 0.5 * (e[static_cast<std::size_t>(j)] + e[static_cast<std::size_t>(j) + 1]);
                mid_gap.at(i, j) = std::abs(mi - mj);
            }
        }
        NodeId wr = g.slice(w, 0, r, 1);  // [1,N]
        // w^T A w counts every ordered pair; halve for the i<j sum
        NodeId pair = g.scale(g.matmul(g.matmul(wr, g.constant(mid_gap)), wr, true), 0.5);
        NodeId interval = g.scale(g.sum(g.mul(g.square(wr), g.constant(widths))), 1.0 / 3.0);
        NodeId dr = g.max_const(g.slice(depth, 0, r, 1), eps);
        NodeId term = g.div(g.add(g.reshape(pair, {1}), interval), g.reshape(dr, {1}));
        acc = acc < 0 ? term : g.add(acc, term);
    }
    return g.scale(acc, 1.0 / static_cast<double>(subset.size()));
}

NodeId foreground_loss(Graph& g, NodeId acc) {
    NodeId one = g.constant(Tensor::full(g.value(acc).shape, 1.0));
    return g.mean(g.square(g.sub(one, acc)));
}

NodeId depth_smoothness_loss(Graph& g, NodeId depth, const std::vector<int>& patch_start, int s,
                             const std::vector<char>& keep) {
    if (s < 2) throw std::invalid_argument("depth_smoothness_loss: patch size must be >= 2");
    const int rows = g.value(depth).dim(0);
    NodeId acc = -1;
    int kept = 0;
    for (std::size_t k = 0; k < patch_start.size(); ++k) {
        if (!keep.empty() && !keep[k]) continue;
        int start = patch_start[k];
        if (start + s * s > rows)
            throw std::invalid_argument("depth_smoothness_loss: incomplete patch");
        NodeId d = g.reshape(g.slice(depth, 0, start, s * s), {s, s});
        NodeId tl = g.slice(g.slice(d, 0, 0, s - 1), 1, 0, s - 1);
        NodeId down = g.slice(g.slice(d, 0, 1, s - 1), 1, 0, s - 1);
        NodeId right = g.slice(g.slice(d, 0, 0, s - 1), 1, 1, s - 1);
        NodeId term = g.add(g.sum(g.square(g.sub(tl, down))), g.sum(g.square(g.sub(tl, right))));
        acc = acc < 0 ? term : g.add(acc, term);
        ++kept;
    }
    if (kept == 0) return g.scalar(0.0);
    return g.scale(acc, 1.0 / kept);
}

NodeId entropy_loss(Graph& g, NodeId alpha, double eps_q, double eps) {
    const Tensor& av = g.value(alpha);
    int b = av.dim(0);
    NodeId q_total = g.sum(alpha, 1);  // cumulative ray density Q(r)
    NodeId q = g.div(alpha, g.max_const(q_total, eps));
    NodeId h = g.neg(g.sum(g.mul(q, g.log(g.add(q, g.scalar(eps)))), 1));  // [B,1]
    const Tensor& qv = g.value(q_total);
    Tensor mask({b, 1});
    for (int r = 0; r < b; ++r) mask[r] = qv[r] > eps_q ? 1.0 : 0.0;
    return g.mean(g.mul(h, g.constant(mask)));
}

NodeId total_loss(Graph& g, const LossNodes& parts, const LossConfig& cfg, int iter,
                  LossReport* report) {
    if (parts.rgb < 0) throw std::invalid_argument("total_loss: rgb term is mandatory");
    double ld = lambda_dist_at(cfg, iter);
    NodeId total = parts.rgb;
    if (parts.dist >= 0) total = g.add(total, g.scale(parts.dist, ld));
    if (parts.fg >= 0) total = g.add(total, g.scale(parts.fg, cfg.lambda_fg));
    if (parts.ds >= 0) total = g.add(total, g.scale(parts.ds, cfg.lambda_ds));
    if (parts.kl >= 0) total = g.add(total, g.scale(parts.kl, cfg.lambda_kl));
    if (parts.entr >= 0) total = g.add(total, g.scale(parts.entr, cfg.lambda_entr));
    if (report) {
        report->rgb = g.value(parts.rgb)[0];
        report->rgb_sum = parts.rgb_sum >= 0 ? g.value(parts.rgb_sum)[0] : 0.0;
        report->dist = parts.dist >= 0 ? g.value(parts.dist)[0] : 0.0;
        report->fg = parts.fg >= 0 ? g.value(parts.fg)[0] : 0.0;
        report->kl = parts.kl >= 0 ? g.value(parts.kl)[0] : 0.0;
        report->ds = parts.ds >= 0 ? g.value(parts.ds)[0] : 0.0;
        report->entr = parts.entr >= 0 ? g.value(parts.entr)[0] : 0.0;
        report->lambda_dist_eff = parts.dist >= 0 ? ld : 0.0;
        report->total = g.value(total)[0];
    }
    return total;
}

}  // namespace combi
