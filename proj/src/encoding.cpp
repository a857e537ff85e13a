#include "combi/encoding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace combi {

namespace {
constexpr std::uint64_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};
}

HashGrid::HashGrid(const HashGridConfig& cfg, ParamStore& params, Rng& rng) : cfg_(cfg) {
    if (cfg_.levels < 1 || cfg_.features < 1)
        throw std::invalid_argument("HashGrid: levels and features must be >= 1");
    compute_resolutions();
    for (int l = 0; l < cfg_.levels; ++l) {
        Tensor table({rows(l), cfg_.features});
        for (double& v : table.data) v = rng.uniform(-1e-4, 1e-4);
        table_keys_.push_back(params.add("hash_table_" + std::to_string(l), std::move(table)));
    }
}

HashGrid HashGrid::attach(const HashGridConfig& cfg, const ParamStore& params) {
    HashGrid g;
    g.cfg_ = cfg;
    g.compute_resolutions();
    for (int l = 0; l < cfg.levels; ++l) {
        int key = params.find("hash_table_" + std::to_string(l));
        if (key < 0) throw std::invalid_argument("HashGrid::attach: missing table for level " +
                                                 std::to_string(l));
        g.table_keys_.push_back(key);
    }
    return g;
}

void HashGrid::compute_resolutions() {
    level_res_.clear();
    for (int l = 0; l < cfg_.levels; ++l) {
        double r;
        if (cfg_.levels == 1) {
            r = cfg_.n_min;
        } else {
            double b = std::exp((std::log(static_cast<double>(cfg_.n_max)) -
                                 std::log(static_cast<double>(cfg_.n_min))) /
                                (cfg_.levels - 1));
            r = cfg_.n_min * std::pow(b, l);
        }
        int res = static_cast<int>(std::floor(r + 0.5));
        if (!level_res_.empty() && res < level_res_.back()) res = level_res_.back();
        level_res_.push_back(res);
    }
}

int HashGrid::rows(int level) const {
    std::int64_t dense = static_cast<std::int64_t>(resolution(level) + 1);
    dense = dense * dense * dense;
    return static_cast<int>(std::min<std::int64_t>(dense, cfg_.table_size));
}

bool HashGrid::collision_free(int level) const {
    std::int64_t dense = static_cast<std::int64_t>(resolution(level) + 1);
    return dense * dense * dense <= cfg_.table_size;
}

std::uint32_t HashGrid::hash_index(const std::array<int, 3>& corner, int level) const {
    int n = resolution(level);
    if (collision_free(level)) {
        std::int64_t np1 = n + 1;
        return static_cast<std::uint32_t>(corner[0] + np1 * (corner[1] + np1 * corner[2]));
    }
    std::uint64_t h = 0;
    for (int d = 0; d < 3; ++d)
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(corner[d])) * kHashPrimes[d];
    return static_cast<std::uint32_t>(h % static_cast<std::uint64_t>(cfg_.table_size));
}

void HashGrid::interpolate(const std::array<double, 3>& p, int level,
                           std::array<std::uint32_t, 8>& idx, std::array<double, 8>& w) const {
    int n = resolution(level);
    std::array<double, 3> q = p;
    bool oob = false;
    for (double& v : q) {
        if (v < 0.0) { v = 0.0; oob = true; }
        if (v > 1.0) { v = 1.0; oob = true; }
    }
    if (oob) ++out_of_bounds_;

    std::array<int, 3> cell;
    std::array<double, 3> frac;
    for (int d = 0; d < 3; ++d) {
        double s = q[d] * n;
        int c = static_cast<int>(std::floor(s));
        if (c >= n) c = n - 1;  // p == 1.0 lands in the last cell
        cell[d] = c;
        frac[d] = s - c;
    }
    for (int corner = 0; corner < 8; ++corner) {
        std::array<int, 3> cc;
        double weight = 1.0;
        for (int d = 0; d < 3; ++d) {
            int bit = (corner >> d) & 1;
            cc[d] = cell[d] + bit;
            weight *= bit ? frac[d] : (1.0 - frac[d]);
        }
        idx[static_cast<std::size_t>(corner)] = hash_index(cc, level);
        w[static_cast<std::size_t>(corner)] = weight;
    }
}

NodeId HashGrid::encode(Graph& g, const ParamStore& params,
                        const std::vector<std::array<double, 3>>& pts, double mask_x) const {
    const int p_count = static_cast<int>(pts.size());
    NodeId out = -1;
    for (int l = 0; l < cfg_.levels; ++l) {
        std::vector<int> indices;
        std::vector<double> weights;
        indices.reserve(static_cast<std::size_t>(p_count) * 8);
        weights.reserve(static_cast<std::size_t>(p_count) * 8);
        std::array<std::uint32_t, 8> idx;
        std::array<double, 8> w;
        for (const auto& p : pts) {
            interpolate(p, l, idx, w);
            for (int c = 0; c < 8; ++c) {
                indices.push_back(static_cast<int>(idx[static_cast<std::size_t>(c)]));
                weights.push_back(w[static_cast<std::size_t>(c)]);
            }
        }
        NodeId table = g.param(table_key(l), params.value(table_key(l)));
        NodeId feat = g.gather_rows(table, indices, weights, p_count);
        out = (l == 0) ? feat : g.concat(out, feat, 1);
    }
    if (mask_x < 1.0) out = g.mul(out, g.constant(mask_vector(out_dim(), mask_x)));
    return out;
}

std::vector<double> ShEncoding::encode(std::array<double, 3> dir) const {
    if (degree < 1 || degree > 4)
        throw std::invalid_argument("ShEncoding: degree must be in [1,4]");
    double n2 = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
    double n = std::sqrt(n2);
    if (std::abs(n - 1.0) > 1e-9) {
        ++non_unit_count;
        if (n < 1e-300) throw std::invalid_argument("ShEncoding: zero direction");
        dir = {dir[0] / n, dir[1] / n, dir[2] / n};
    }
    const double x = dir[0], y = dir[1], z = dir[2];
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(out_dim()));
    out.push_back(0.28209479177387814);
    if (degree >= 2) {
        out.push_back(0.4886025119029199 * y);
        out.push_back(0.4886025119029199 * z);
        out.push_back(0.4886025119029199 * x);
    }
    if (degree >= 3) {
        out.push_back(1.0925484305920792 * x * y);
        out.push_back(1.0925484305920792 * y * z);
        out.push_back(0.31539156525252005 * (3.0 * z * z - 1.0));
        out.push_back(1.0925484305920792 * x * z);
        out.push_back(0.5462742152960396 * (x * x - y * y));
    }
    if (degree >= 4) {
        out.push_back(0.5900435899266435 * y * (3.0 * x * x - y * y));
        out.push_back(2.890611442640554 * x * y * z);
        out.push_back(0.4570457994644658 * y * (5.0 * z * z - 1.0));
        out.push_back(0.3731763325901154 * z * (5.0 * z * z - 3.0));
        out.push_back(0.4570457994644658 * x * (5.0 * z * z - 1.0));
        out.push_back(1.445305721320277 * z * (x * x - y * y));
        out.push_back(0.5900435899266435 * x * (x * x - 3.0 * y * y));
    }
    return out;
}

double mask_ratio(int iter, const MaskSchedule& sched) {
    double saturate_at = sched.saturate_fraction * sched.total_iterations;
    double x;
    if (saturate_at <= 0.0) {
        x = 1.0;
    } else {
        x = sched.x_initial + (1.0 - sched.x_initial) * iter / saturate_at;
    }
    if (x > 1.0) x = 1.0;
    if (x < sched.x_initial) x = sched.x_initial;
    return x;
}

int mask_keep_count(int len, double x) {
    int keep = static_cast<int>(std::llround(len * x));
    if (keep < 0) keep = 0;
    if (keep > len) keep = len;
    return keep;
}

Tensor mask_vector(int len, double x) {
    Tensor m({1, len});
    int keep = mask_keep_count(len, x);
    for (int i = 0; i < keep; ++i) m[i] = 1.0;
    return m;
}

}  // namespace combi
