#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "combi/graph.hpp"
#include "combi/optim.hpp"
#include "combi/rng.hpp"

namespace combi {

struct HashGridConfig {
    int levels = 8;        // L
    int features = 2;      // F per level
    int table_size = 4096; // E, max rows per level
    int n_min = 4;         // coarsest resolution
    int n_max = 64;        // finest resolution
};

// Multiresolution hash encoding. Per-level feature tables are trainable
// tensors in a ParamStore; encode() emits a differentiable gather so
// gradients flow back into the tables.
class HashGrid {
public:
    HashGrid() = default;
    HashGrid(const HashGridConfig& cfg, ParamStore& params, Rng& rng);

    // Rebind to an existing ParamStore layout (checkpoint reload).
    static HashGrid attach(const HashGridConfig& cfg, const ParamStore& params);

    int levels() const { return cfg_.levels; }
    int features() const { return cfg_.features; }
    int out_dim() const { return cfg_.levels * cfg_.features; }
    int resolution(int level) const { return level_res_[static_cast<std::size_t>(level)]; }
    int rows(int level) const;
    int table_key(int level) const { return table_keys_[static_cast<std::size_t>(level)]; }
    bool collision_free(int level) const;

    // Table row for a corner of the level grid. Linear indexing on
    // collision-free levels, spatial hash otherwise.
    std::uint32_t hash_index(const std::array<int, 3>& corner, int level) const;

    // Trilinear interpolation plan for one point (indices and weights of
    // the 8 cell corners at one level). Points outside [0,1]^3 clamp and
    // bump the out-of-bounds counter.
    void interpolate(const std::array<double, 3>& p, int level, std::array<std::uint32_t, 8>& idx,
                     std::array<double, 8>& w) const;

    // [P, L*F] feature matrix for a batch of points, level-major layout.
    // mask_x in [0,1] keeps the first round(L*F*x) output features.
    NodeId encode(Graph& g, const ParamStore& params, const std::vector<std::array<double, 3>>& pts,
                  double mask_x = 1.0) const;

    std::int64_t out_of_bounds_count() const { return out_of_bounds_; }
    const HashGridConfig& config() const { return cfg_; }

private:
    HashGridConfig cfg_;
    std::vector<int> level_res_;
    std::vector<int> table_keys_;
    mutable std::int64_t out_of_bounds_ = 0;

    void compute_resolutions();
};

// Real spherical-harmonic basis, degree^2 coefficients, degree in [1,4].
// Band-1 ordering is (y, z, x). Non-unit directions are normalized and
// counted.
struct ShEncoding {
    int degree = 3;
    mutable std::int64_t non_unit_count = 0;

    int out_dim() const { return degree * degree; }
    std::vector<double> encode(std::array<double, 3> dir) const;
};

struct MaskSchedule {
    double saturate_fraction = 0.9;
    int total_iterations = 0;
    double x_initial = 1.0;
};

// Active-feature ratio at an iteration: linear ramp from x_initial to 1,
// saturating at saturate_fraction * total_iterations.
double mask_ratio(int iter, const MaskSchedule& sched);

// Number of leading features kept for a mask ratio x.
int mask_keep_count(int len, double x);

// 0/1 mask row [1, len] for broadcasting over a feature batch.
Tensor mask_vector(int len, double x);

}  // namespace combi
