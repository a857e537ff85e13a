#pragma once

#include <array>
#include <vector>

#include "combi/rng.hpp"

namespace combi {

using Vec3 = std::array<double, 3>;

inline Vec3 vadd(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 vsub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 vscale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double vdot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double vnorm(const Vec3& a);
Vec3 vnormalize(const Vec3& a);

// Pinhole camera; pose is camera-to-world, camera looks along -z with x
// right and y up (Blender/NeRF convention).
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    std::array<double, 12> pose{};  // 3x4 row-major [R|t]
    double near = 0.1, far = 10.0;

    Vec3 origin() const { return {pose[3], pose[7], pose[11]}; }
    Vec3 rotate(const Vec3& v) const;
    // rotation orthonormal within 1e-6, near < far
    void validate() const;
    // world-space unit ray direction through pixel center (i,j) = (col,row)
    Vec3 ray_direction(double i, double j) const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                          int width, int height, double near, double far);
};

struct RayBatch {
    std::vector<Vec3> origins;
    std::vector<Vec3> directions;               // unit norm
    std::vector<std::array<int, 2>> pixels;     // (i,j)
    std::vector<int> patch_id;                  // -1 for independent rays
    int size() const { return static_cast<int>(origins.size()); }
};

// Back-projects pixel centers. Pixels out of bounds are rejected.
RayBatch generate_rays(const Camera& cam, const std::vector<std::array<int, 2>>& pixels);

// Complete S x S pixel block anchored at (i0,j0), row-major, one patch id.
void append_patch(RayBatch& batch, const Camera& cam, int i0, int j0, int s, int patch);

// Uniformly chosen in-bounds 4-neighbor of a pixel.
std::array<int, 2> choose_adjacent_pixel(const std::array<int, 2>& px, int width, int height,
                                         Rng& rng);

}  // namespace combi
