#include "combi/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>

#include "combi/camera.hpp"
#include "combi/gradcheck.hpp"
#include "combi/graph.hpp"
#include "combi/losses.hpp"
#include "combi/mlp.hpp"
#include "combi/model.hpp"
#include "combi/render.hpp"
#include "combi/rng.hpp"

namespace combi {

namespace {

using Builder = std::function<NodeId(Graph&, NodeId x)>;

double check_builder(const Builder& build, const std::vector<double>& x0) {
    auto f = [&](const std::vector<double>& x) {
        Graph g;
        NodeId p = g.param(0, Tensor({static_cast<int>(x.size())}, x));
        return g.value(build(g, p))[0];
    };
    auto grad_f = [&](const std::vector<double>& x) {
        Graph g;
        NodeId p = g.param(0, Tensor({static_cast<int>(x.size())}, x));
        return g.backward(build(g, p)).at(0).data;
    };
    return finite_diff_check(f, grad_f, x0);
}

std::vector<double> random_vec(Rng& rng, int n, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// bounded away from zero, for ops with kinks there
std::vector<double> random_vec_signed(Rng& rng, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    return v;
}

struct OpCase {
    const char* name;
    Builder build;
    bool away_from_zero;
    double lo, hi;
    int n = 8;
};

std::vector<OpCase> op_cases() {
    return {
        {"add", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.add(g.slice(m, 0, 0, 1), g.slice(m, 0, 1, 1)));
         }, false, -1, 1},
        {"sub", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.sub(g.slice(m, 0, 0, 1), g.slice(m, 0, 1, 1)));
         }, false, -1, 1},
        {"mul", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.mul(g.slice(m, 0, 0, 1), g.slice(m, 0, 1, 1)));
         }, false, -1, 1},
        {"div", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.div(g.slice(m, 0, 0, 1), g.slice(m, 0, 1, 1)));
         }, false, 0.5, 2},
        {"matmul", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {4, 4});
             return g.sum(g.matmul(m, m));
         }, false, -1, 1, 16},
        {"matmul_nt", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 8});
             return g.sum(g.matmul(m, m, true));
         }, false, -1, 1, 16},
        {"exp", [](Graph& g, NodeId x) { return g.sum(g.exp(x)); }, false, -1, 1},
        {"log", [](Graph& g, NodeId x) { return g.sum(g.log(x)); }, false, 0.5, 2},
        {"softplus", [](Graph& g, NodeId x) { return g.sum(g.softplus(x)); }, false, -2, 2},
        {"sigmoid", [](Graph& g, NodeId x) { return g.sum(g.sigmoid(x)); }, false, -2, 2},
        {"relu", [](Graph& g, NodeId x) { return g.sum(g.relu(x)); }, true, 0, 0},
        {"square", [](Graph& g, NodeId x) { return g.sum(g.square(x)); }, false, -1, 1},
        {"abs", [](Graph& g, NodeId x) { return g.sum(g.abs(x)); }, true, 0, 0},
        {"min_const", [](Graph& g, NodeId x) { return g.sum(g.min_const(x, 0.0)); }, true, 0, 0},
        {"max_const", [](Graph& g, NodeId x) { return g.sum(g.max_const(x, 0.0)); }, true, 0, 0},
        {"sum_axis", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.square(g.sum(m, 1)));
         }, false, -1, 1},
        {"mean_axis", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.square(g.mean(m, 0)));
         }, false, -1, 1},
        {"cumsum", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.square(g.cumsum(m, 1)));
         }, false, -1, 1},
        {"concat", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             NodeId c = g.concat(g.slice(m, 1, 0, 2), g.slice(m, 1, 2, 2), 1);
             return g.sum(g.square(c));
         }, false, -1, 1},
        {"slice", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {2, 4});
             return g.sum(g.square(g.slice(m, 1, 1, 2)));
         }, false, -1, 1},
        {"select", [](Graph& g, NodeId x) {
             NodeId mask = g.constant(Tensor({8}, {1, 0, 1, 0, 1, 1, 0, 0}));
             return g.sum(g.select(mask, g.square(x), g.exp(x)));
         }, false, -1, 1},
        {"reshape", [](Graph& g, NodeId x) {
             return g.sum(g.square(g.reshape(x, {4, 2})));
         }, false, -1, 1},
        {"gather_rows", [](Graph& g, NodeId x) {
             NodeId m = g.reshape(x, {4, 2});
             std::vector<int> idx = {0, 1, 2, 3, 1, 1};
             std::vector<double> w = {0.5, 0.25, 1.0, -0.5, 0.75, 0.25};
             return g.sum(g.square(g.gather_rows(m, idx, w, 3)));
         }, false, -1, 1},
        {"lipschitz_normalize", [](Graph& g, NodeId x) {
             NodeId row = g.reshape(x, {1, 13});
             NodeId W = g.reshape(g.slice(row, 1, 0, 12), {3, 4});
             NodeId k = g.slice(row, 1, 12, 1);
             return g.sum(g.square(lipschitz_normalize(g, W, k)));
         }, false, 0.3, 1.2, 13},
    };
}

// Central-difference comparison over one parameter tensor. The
// denominator floor absorbs finite-difference roundoff on coordinates
// whose true gradient is below what central differences can resolve
// against an O(1) loss in double precision (~1e-9 absolute).
double fd_error(const std::function<double()>& f, std::vector<double>& x,
                const std::vector<double>& ad, double eps = 1e-6) {
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + eps;
        double fp = f();
        x[i] = xi - eps;
        double fm = f();
        x[i] = xi;
        double fd = (fp - fm) / (2 * eps);
        if (!std::isfinite(fd)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst,
                         std::fabs(ad[i] - fd) / std::max(1e-3, std::fabs(ad[i]) + std::fabs(fd)));
    }
    return worst;
}

constexpr int kB = 4;   // rays
constexpr int kN = 6;   // samples per ray in the loss builders
constexpr double kEps = 1e-10;

// weights, depth, acc, alpha and the per-channel colors from a flat
// parameter vector, through the rendering quadrature so the whole path is
// exercised. Layout: kB*kN density logits then 3*kB*kN color logits.
struct RenderParts {
    RenderNodes nodes;
    NodeId chan[3];
    std::vector<std::vector<double>> edges;
};

RenderParts build_render(Graph& g, NodeId x) {
    RenderParts out;
    NodeId row = g.reshape(x, {1, 4 * kB * kN});
    NodeId sigma = g.softplus(g.reshape(g.slice(row, 1, 0, kB * kN), {kB, kN}));
    for (int c = 0; c < 3; ++c)
        out.chan[c] =
            g.sigmoid(g.reshape(g.slice(row, 1, (1 + c) * kB * kN, kB * kN), {kB, kN}));
    std::vector<double> tv, dv;
    for (int r = 0; r < kB; ++r)
        for (int i = 0; i < kN; ++i) {
            tv.push_back(0.5 + (i + 0.5) * 0.5);
            dv.push_back(0.5);
        }
    Tensor t({kB, kN}, tv), delta({kB, kN}, dv);
    out.nodes = volume_render(g, sigma, out.chan, t, delta);
    out.edges.assign(kB, {});
    for (int r = 0; r < kB; ++r)
        for (int i = 0; i <= kN; ++i) out.edges[static_cast<std::size_t>(r)].push_back(0.5 + i * 0.5);
    return out;
}

std::vector<OpCase> loss_cases() {
    const int n = 4 * kB * kN;
    return {
        {"volume_render", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             NodeId s = g.add(g.sum(rp.nodes.depth), g.sum(rp.nodes.acc));
             for (int c = 0; c < 3; ++c) s = g.add(s, g.sum(g.square(rp.nodes.color[c])));
             return g.add(s, g.sum(g.square(rp.nodes.weight)));
         }, false, -1, 1, n},
        {"rgb_loss", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             std::vector<double> gv;
             Rng r(5);
             for (int i = 0; i < kB * 3; ++i) gv.push_back(r.uniform());
             return rgb_loss(g, rp.nodes.color, Tensor({kB, 3}, gv)).mean;
         }, false, -1, 1, n},
        {"kl_loss", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             RayPdf all = ray_pdf(g, rp.nodes.weight, kEps);
             RayPdf p, q;
             p.p = g.slice(all.p, 0, 0, kB / 2);
             q.p = g.slice(all.p, 0, kB / 2, kB / 2);
             p.degenerate.assign(all.degenerate.begin(), all.degenerate.begin() + kB / 2);
             q.degenerate.assign(all.degenerate.begin() + kB / 2, all.degenerate.end());
             return kl_divergence_loss(g, p, q, kEps);
         }, false, -1, 1, n},
        {"distortion_loss", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             return distortion_loss(g, rp.nodes.weight, rp.nodes.depth, rp.edges, {0, 2}, kEps);
         }, false, -1, 1, n},
        {"foreground_loss", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             return foreground_loss(g, rp.nodes.acc);
         }, false, -1, 1, n},
        {"depth_smoothness_loss", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             return depth_smoothness_loss(g, rp.nodes.depth, {0}, 2, {1});
         }, false, -1, 1, n},
        {"entropy_loss", [](Graph& g, NodeId x) {
             RenderParts rp = build_render(g, x);
             return entropy_loss(g, rp.nodes.alpha, 0.1, kEps);
         }, false, -1, 1, n},
    };
}

// 4 rays (one 2x2 patch) and 8 samples through a small field with every
// loss term active; finite differences over every trainable tensor.
double end_to_end_error() {
    ModelConfig mc;
    mc.grid.levels = 2;
    mc.grid.features = 2;
    mc.grid.table_size = 32;
    mc.grid.n_min = 2;
    mc.grid.n_max = 3;
    mc.sh_degree = 2;
    mc.density_hidden = {8};
    mc.geo_features = 3;
    mc.color_hidden = {8};
    // Fixed seed chosen so no relu pre-activation or entropy-mask
    // threshold sits within the probe step of its branch point; the loss
    // surface is piecewise smooth and central differences must not
    // straddle a piece boundary.
    NerfModel model(mc, 7);

    // k initializes exactly at the max row-sum, which is the kink of the
    // min(1, bound/rowsum) rule; move it below so central differences do
    // not straddle the branch point.
    for (int key = 0; key < model.params().size(); ++key) {
        const std::string& nm = model.params().name(key);
        if (nm.size() > 2 && nm.compare(nm.size() - 2, 2, "_k") == 0)
            model.params().value(key).data[0] -= 0.2;
    }

    Camera cam = Camera::look_at({0.0, 0.4, 2.4}, {0, 0, 0}, {0, 1, 0}, 16.0, 8, 8, 0.6, 4.0);
    RayBatch batch;
    append_patch(batch, cam, 3, 3, 2, 0);

    std::vector<double> gt;
    Rng grng(17);
    for (int i = 0; i < batch.size() * 3; ++i) gt.push_back(grng.uniform());

    LossConfig lc;
    lc.lambda_dist = 1e-2;
    lc.lambda_fg = 1e-2;
    lc.lambda_kl = 1e-2;
    lc.lambda_ds = 1e-2;
    lc.lambda_entr = 1e-2;

    auto loss_and_grads = [&](std::unordered_map<int, Tensor>* grads) {
        Graph g;
        Rng r(0);
        auto br = model.render_batch(g, batch, 0.6, 4.0, 8, false, r, 0.75, 1.0);
        LossNodes parts;
        parts.rgb = rgb_loss(g, br.channels, Tensor({batch.size(), 3}, gt)).mean;
        RayPdf all = ray_pdf(g, br.render.weight, lc.eps_log);
        RayPdf p, q;
        p.p = g.slice(all.p, 0, 0, 2);
        q.p = g.slice(all.p, 0, 2, 2);
        p.degenerate.assign(all.degenerate.begin(), all.degenerate.begin() + 2);
        q.degenerate.assign(all.degenerate.begin() + 2, all.degenerate.end());
        parts.kl = kl_divergence_loss(g, p, q, lc.eps_log);
        parts.dist = distortion_loss(g, br.render.weight, br.render.depth, br.edges, {0, 1, 2, 3},
                                     lc.eps_log);
        parts.fg = foreground_loss(g, br.render.acc);
        parts.ds = depth_smoothness_loss(g, br.render.depth, {0}, 2, {1});
        parts.entr = entropy_loss(g, br.render.alpha, lc.entropy_threshold, lc.eps_log);
        NodeId total = total_loss(g, parts, lc, lc.dist_warmup_iters + 1);
        if (grads) *grads = g.backward(total);
        return g.value(total)[0];
    };

    ParamStore& ps = model.params();
    std::unordered_map<int, Tensor> grads;
    loss_and_grads(&grads);
    double worst = 0;
    for (int key = 0; key < ps.size(); ++key) {
        std::vector<double>& x = ps.value(key).data;
        std::vector<double> ad = grads.count(key) ? grads.at(key).data
                                                  : std::vector<double>(x.size(), 0.0);
        worst = std::max(worst, fd_error([&] { return loss_and_grads(nullptr); }, x, ad));
    }
    return worst;
}

// gradient flow into the hash tables through interpolation and masking
double table_gradient_error() {
    HashGridConfig gc;
    gc.levels = 2;
    gc.features = 2;
    gc.table_size = 32;
    gc.n_min = 2;
    gc.n_max = 3;
    ParamStore ps;
    Rng rng(9);
    HashGrid grid(gc, ps, rng);

    std::vector<std::array<double, 3>> pts = {
        {0.2, 0.7, 0.4}, {0.9, 0.1, 0.6}, {0.5, 0.5, 0.5}};
    auto loss_and_grads = [&](std::unordered_map<int, Tensor>* grads) {
        Graph g;
        NodeId feat = grid.encode(g, ps, pts, 0.75);
        NodeId loss = g.sum(g.square(feat));
        if (grads) *grads = g.backward(loss);
        return g.value(loss)[0];
    };
    std::unordered_map<int, Tensor> grads;
    loss_and_grads(&grads);
    double worst = 0;
    for (int key = 0; key < ps.size(); ++key) {
        std::vector<double>& x = ps.value(key).data;
        std::vector<double> ad = grads.count(key) ? grads.at(key).data
                                                  : std::vector<double>(x.size(), 0.0);
        worst = std::max(worst, fd_error([&] { return loss_and_grads(nullptr); }, x, ad));
    }
    return worst;
}

}  // namespace

std::vector<GradcheckRow> gradcheck_all(double threshold) {
    std::vector<GradcheckRow> rows;
    Rng rng(42);
    auto run_case = [&](const OpCase& c, int trials) {
        double worst = 0;
        for (int t = 0; t < trials; ++t) {
            auto x0 =
                c.away_from_zero ? random_vec_signed(rng, c.n) : random_vec(rng, c.n, c.lo, c.hi);
            worst = std::max(worst, check_builder(c.build, x0));
        }
        rows.push_back({c.name, worst, worst < threshold});
    };
    for (const OpCase& c : op_cases()) run_case(c, 5);
    for (const OpCase& c : loss_cases()) run_case(c, 2);
    {
        double e = table_gradient_error();
        rows.push_back({"hash_encode", e, e < threshold});
    }
    {
        double e = end_to_end_error();
        rows.push_back({"end_to_end", e, e < threshold});
    }
    return rows;
}

}  // namespace combi
