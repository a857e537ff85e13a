#include "combi/camera.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace combi {

double vnorm(const Vec3& a) { return std::sqrt(vdot(a, a)); }

Vec3 vnormalize(const Vec3& a) {
    double n = vnorm(a);
    if (n < 1e-300) throw std::invalid_argument("vnormalize: zero vector");
    return vscale(a, 1.0 / n);
}

Vec3 Camera::rotate(const Vec3& v) const {
    return {pose[0] * v[0] + pose[1] * v[1] + pose[2] * v[2],
            pose[4] * v[0] + pose[5] * v[1] + pose[6] * v[2],
            pose[8] * v[0] + pose[9] * v[1] + pose[10] * v[2]};
}

void Camera::validate() const {
    if (!(near < far)) throw std::invalid_argument("Camera: near must be < far");
    // columns of R orthonormal
    for (int a = 0; a < 3; ++a) {
        for (int b = a; b < 3; ++b) {
            double dot = 0;
            for (int r = 0; r < 3; ++r) dot += pose[static_cast<std::size_t>(4 * r + a)] *
                                               pose[static_cast<std::size_t>(4 * r + b)];
            double want = a == b ? 1.0 : 0.0;
            if (std::abs(dot - want) > 1e-6)
                throw std::invalid_argument("Camera: rotation block not orthonormal");
        }
    }
}

Vec3 Camera::ray_direction(double i, double j) const {
    Vec3 d_cam = {(i + 0.5 - cx) / fx, -(j + 0.5 - cy) / fy, -1.0};
    return vnormalize(rotate(d_cam));
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                       int width, int height, double near, double far) {
    Vec3 back = vnormalize(vsub(eye, target));  // camera +z
    Vec3 right = vnormalize({up[1] * back[2] - up[2] * back[1], up[2] * back[0] - up[0] * back[2],
                             up[0] * back[1] - up[1] * back[0]});
    Vec3 cam_up = {back[1] * right[2] - back[2] * right[1], back[2] * right[0] - back[0] * right[2],
                   back[0] * right[1] - back[1] * right[0]};
    Camera c;
    c.fx = c.fy = focal;
    c.cx = width / 2.0;
    c.cy = height / 2.0;
    c.width = width;
    c.height = height;
    c.near = near;
    c.far = far;
    c.pose = {right[0], cam_up[0], back[0], eye[0],
              right[1], cam_up[1], back[1], eye[1],
              right[2], cam_up[2], back[2], eye[2]};
    return c;
}

RayBatch generate_rays(const Camera& cam, const std::vector<std::array<int, 2>>& pixels) {
    RayBatch batch;
    for (const auto& px : pixels) {
        if (px[0] < 0 || px[0] >= cam.width || px[1] < 0 || px[1] >= cam.height)
            throw std::invalid_argument("generate_rays: pixel (" + std::to_string(px[0]) + "," +
                                        std::to_string(px[1]) + ") out of bounds");
        batch.origins.push_back(cam.origin());
        batch.directions.push_back(cam.ray_direction(px[0], px[1]));
        batch.pixels.push_back(px);
        batch.patch_id.push_back(-1);
    }
    return batch;
}

void append_patch(RayBatch& batch, const Camera& cam, int i0, int j0, int s, int patch) {
    if (i0 < 0 || j0 < 0 || i0 + s > cam.width || j0 + s > cam.height)
        throw std::invalid_argument("append_patch: patch does not fit in the image");
    for (int dj = 0; dj < s; ++dj) {
        for (int di = 0; di < s; ++di) {
            batch.origins.push_back(cam.origin());
            batch.directions.push_back(cam.ray_direction(i0 + di, j0 + dj));
            batch.pixels.push_back({i0 + di, j0 + dj});
            batch.patch_id.push_back(patch);
        }
    }
}

std::array<int, 2> choose_adjacent_pixel(const std::array<int, 2>& px, int width, int height,
                                         Rng& rng) {
    static constexpr int kOff[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    std::array<std::array<int, 2>, 4> candidates;
    int n = 0;
    for (const auto& o : kOff) {
        int i = px[0] + o[0], j = px[1] + o[1];
        if (i >= 0 && i < width && j >= 0 && j < height) candidates[static_cast<std::size_t>(n++)] = {i, j};
    }
    if (n == 0) throw std::invalid_argument("choose_adjacent_pixel: 1x1 image has no neighbors");
    return candidates[static_cast<std::size_t>(rng.uniform_int(n))];
}

}  // namespace combi
