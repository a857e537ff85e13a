#include "combi/model.hpp"

#include <stdexcept>

namespace combi {

NerfModel::NerfModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    grid_ = HashGrid(cfg.grid, params_, rng);
    sh_.degree = cfg.sh_degree;
    for (int i = 0; i < params_.size(); ++i) is_table_.push_back(1);

    std::vector<int> dwidths;
    dwidths.push_back(grid_.out_dim());
    for (int h : cfg.density_hidden) dwidths.push_back(h);
    dwidths.push_back(1 + cfg.geo_features);
    density_ = Mlp("density", dwidths, Activation::Relu, Activation::None, cfg.lipschitz_density,
                   params_, rng);

    std::vector<int> cwidths;
    cwidths.push_back(cfg.geo_features + sh_.out_dim());
    for (int h : cfg.color_hidden) cwidths.push_back(h);
    cwidths.push_back(3);
    color_ = Mlp("color", cwidths, Activation::Relu, Activation::None, cfg.lipschitz_color,
                 params_, rng);
    while (static_cast<int>(is_table_.size()) < params_.size()) is_table_.push_back(0);
}

Vec3 NerfModel::normalize_point(const Vec3& p) const {
    Vec3 q;
    for (int d = 0; d < 3; ++d)
        q[static_cast<std::size_t>(d)] =
            (p[static_cast<std::size_t>(d)] - cfg_.bounds_min[static_cast<std::size_t>(d)]) /
            (cfg_.bounds_max[static_cast<std::size_t>(d)] - cfg_.bounds_min[static_cast<std::size_t>(d)]);
    return q;
}

NerfModel::FieldNodes NerfModel::field(Graph& g, const std::vector<Vec3>& points,
                                       const std::vector<Vec3>& dirs, double mask_x,
                                       double mask_x_dir) const {
    if (points.size() != dirs.size())
        throw std::invalid_argument("NerfModel::field: points/dirs size mismatch");
    const int p_count = static_cast<int>(points.size());

    std::vector<std::array<double, 3>> unit(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) unit[i] = normalize_point(points[i]);
    NodeId x_enc = grid_.encode(g, params_, unit, mask_x);

    NodeId draw = density_.forward(g, params_, x_enc);  // [P, 1+geo]
    FieldNodes out;
    out.sigma_raw = g.slice(draw, 1, 0, 1);
    out.sigma = g.softplus(out.sigma_raw);
    NodeId geo = g.slice(draw, 1, 1, cfg_.geo_features);

    Tensor sh_feat({p_count, sh_.out_dim()});
    for (int i = 0; i < p_count; ++i) {
        auto coeffs = sh_.encode(dirs[static_cast<std::size_t>(i)]);
        for (int j = 0; j < sh_.out_dim(); ++j) sh_feat.at(i, j) = coeffs[static_cast<std::size_t>(j)];
    }
    NodeId d_enc = g.constant(std::move(sh_feat));
    if (mask_x_dir < 1.0) d_enc = g.mul(d_enc, g.constant(mask_vector(sh_.out_dim(), mask_x_dir)));

    out.rgb_raw = color_.forward(g, params_, g.concat(geo, d_enc, 1));
    out.rgb = g.sigmoid(out.rgb_raw);
    return out;
}

NerfModel::BatchRender NerfModel::render_batch(Graph& g, const RayBatch& batch, double t_near,
                                               double t_far, int samples, bool stratified, Rng& rng,
                                               double mask_x, double mask_x_dir) const {
    const int b = batch.size();
    BatchRender out;
    out.t = Tensor({b, samples});
    out.delta = Tensor({b, samples});
    out.edges.resize(static_cast<std::size_t>(b));

    std::vector<Vec3> points;
    std::vector<Vec3> dirs;
    points.reserve(static_cast<std::size_t>(b) * samples);
    dirs.reserve(points.capacity());
    for (int r = 0; r < b; ++r) {
        RaySamples s = sample_along_ray(t_near, t_far, samples, stratified, rng);
        auto& e = out.edges[static_cast<std::size_t>(r)];
        e = s.t;
        e.push_back(t_far);
        for (int i = 0; i < samples; ++i) {
            out.t.at(r, i) = s.t[static_cast<std::size_t>(i)];
            out.delta.at(r, i) = s.delta[static_cast<std::size_t>(i)];
            const Vec3& o = batch.origins[static_cast<std::size_t>(r)];
            const Vec3& d = batch.directions[static_cast<std::size_t>(r)];
            points.push_back(vadd(o, vscale(d, s.t[static_cast<std::size_t>(i)])));
            dirs.push_back(d);
        }
    }

    FieldNodes f = field(g, points, dirs, mask_x, mask_x_dir);
    out.sigma = g.reshape(f.sigma, {b, samples});
    for (int c = 0; c < 3; ++c)
        out.channels[c] = g.reshape(g.slice(f.rgb, 1, c, 1), {b, samples});
    out.render = volume_render(g, out.sigma, out.channels, out.t, out.delta);
    return out;
}

std::vector<double> NerfModel::lr_scales(double net_scale) const {
    std::vector<double> s;
    for (char t : is_table_) s.push_back(t ? 1.0 : net_scale);
    return s;
}

}  // namespace combi
