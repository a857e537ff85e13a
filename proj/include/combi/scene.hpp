#pragma once

#include <vector>

#include "combi/camera.hpp"
#include "combi/image.hpp"

namespace combi {

// Constant-density analytic primitive. For spheres, size[0] is the radius;
// for boxes, size holds the half extents.
struct Primitive {
    enum class Kind { Sphere, Box };
    Kind kind = Kind::Sphere;
    Vec3 center{};
    Vec3 size{};
    double sigma = 200.0;  // opaque at unit-cube scale (>1-1e-20 absorption over 0.25 units)
    Vec3 albedo{};
};

// Toy volumetric scene with a closed-form density field. Ground truth for
// training datasets and metric baselines.
struct AnalyticScene {
    std::vector<Primitive> primitives;
    Vec3 background = {1.0, 1.0, 1.0};
    Vec3 bounds_min = {-1.5, -1.5, -1.5};
    Vec3 bounds_max = {1.5, 1.5, 1.5};

    // sigma >= 0 and every primitive inside the bounds
    void validate() const;

    // Total density and density-weighted albedo at a point.
    double density(const Vec3& p) const;
    Vec3 emitted(const Vec3& p) const;

    // Demo scene used by the end-to-end experiments: three primitives on a
    // matte backdrop.
    static AnalyticScene sphere3();
};

struct OracleRender {
    Image rgb;
    std::vector<double> depth;  // expected termination distance, row-major
};

// Oracle views on a ring around the origin with a slowly varying
// elevation, radius 2.6, near/far 0.8/4.8, focal length equal to the
// resolution. No train/test split is applied.
struct Dataset;
Dataset orbit_dataset(const AnalyticScene& scene, int res, int views);

// Ground-truth renderer. The density is piecewise constant along any ray,
// so each of the samples_per_ray bins is integrated in closed form over
// the primitive entry/exit breakpoints it contains; the bin count only
// affects depth resolution. Remaining transmittance composites over the
// background, with depth falling back to the far plane.
OracleRender oracle_render(const AnalyticScene& scene, const Camera& cam, int samples_per_ray);

}  // namespace combi
