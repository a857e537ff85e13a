#pragma once

#include <vector>

#include "combi/camera.hpp"
#include "combi/encoding.hpp"
#include "combi/graph.hpp"
#include "combi/mlp.hpp"
#include "combi/render.hpp"

namespace combi {

struct ModelConfig {
    HashGridConfig grid;
    int sh_degree = 3;
    std::vector<int> density_hidden = {32, 32};
    int geo_features = 15;
    std::vector<int> color_hidden = {32, 32, 32};
    bool lipschitz_density = true;
    bool lipschitz_color = true;
    Vec3 bounds_min = {-1.5, -1.5, -1.5};
    Vec3 bounds_max = {1.5, 1.5, 1.5};
};

// Radiance field: hash-encoded positions through the density network,
// geometric features plus SH-encoded view direction through the color
// network. Owns the trainable parameters.
class NerfModel {
public:
    NerfModel(const ModelConfig& cfg, std::uint64_t seed);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const HashGrid& grid() const { return grid_; }
    const Mlp& density_net() const { return density_; }
    const Mlp& color_net() const { return color_; }
    const ShEncoding& sh() const { return sh_; }

    // Map a world point into the unit cube of the hash grid.
    Vec3 normalize_point(const Vec3& p) const;

    struct FieldNodes {
        NodeId sigma = -1;       // [P,1], softplus-activated
        NodeId rgb = -1;         // [P,3], sigmoid-activated
        NodeId sigma_raw = -1;   // [P,1] pre-softplus
        NodeId rgb_raw = -1;     // [P,3] pre-sigmoid
    };

    // Evaluate the field at P sample points with one view direction per
    // point. mask_x gates the position encoding; mask_x_dir the direction
    // encoding (1 = off).
    FieldNodes field(Graph& g, const std::vector<Vec3>& points, const std::vector<Vec3>& dirs,
                     double mask_x, double mask_x_dir = 1.0) const;

    struct BatchRender {
        RenderNodes render;
        NodeId sigma = -1;       // [B,N]
        NodeId channels[3] = {-1, -1, -1};  // [B,N]
        Tensor t, delta;         // [B,N]
        std::vector<std::vector<double>> edges;  // per-ray N+1 bin edges
    };

    // Sample every ray of the batch (shared t range), evaluate the field
    // and run the rendering quadrature in one graph.
    BatchRender render_batch(Graph& g, const RayBatch& batch, double t_near, double t_far,
                             int samples, bool stratified, Rng& rng, double mask_x,
                             double mask_x_dir = 1.0) const;

    // Adds a per-layer lr multiplier table: 1.0 for hash tables, `net_scale`
    // for network weights and bounds.
    std::vector<double> lr_scales(double net_scale) const;

private:
    ModelConfig cfg_;
    ParamStore params_;
    HashGrid grid_;
    ShEncoding sh_;
    Mlp density_;
    Mlp color_;
    std::vector<char> is_table_;
};

}  // namespace combi
