#include "combi/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "combi/dataset.hpp"

namespace combi {

namespace {

bool inside(const Primitive& p, const Vec3& x) {
    Vec3 d = vsub(x, p.center);
    if (p.kind == Primitive::Kind::Sphere) return vdot(d, d) <= p.size[0] * p.size[0];
    return std::abs(d[0]) <= p.size[0] && std::abs(d[1]) <= p.size[1] && std::abs(d[2]) <= p.size[2];
}

// Entry/exit distances of a unit ray against one primitive; false on miss.
bool intersect(const Primitive& p, const Vec3& o, const Vec3& d, double& t0, double& t1) {
    if (p.kind == Primitive::Kind::Sphere) {
        Vec3 oc = vsub(o, p.center);
        double b = vdot(d, oc);
        double c = vdot(oc, oc) - p.size[0] * p.size[0];
        double disc = b * b - c;
        if (disc <= 0.0) return false;
        double s = std::sqrt(disc);
        t0 = -b - s;
        t1 = -b + s;
        return true;
    }
    t0 = -1e300;
    t1 = 1e300;
    for (int a = 0; a < 3; ++a) {
        double lo = p.center[static_cast<std::size_t>(a)] - p.size[static_cast<std::size_t>(a)];
        double hi = p.center[static_cast<std::size_t>(a)] + p.size[static_cast<std::size_t>(a)];
        double da = d[static_cast<std::size_t>(a)];
        double oa = o[static_cast<std::size_t>(a)];
        if (std::abs(da) < 1e-12) {
            if (oa < lo || oa > hi) return false;
            continue;
        }
        double u = (lo - oa) / da, v = (hi - oa) / da;
        if (u > v) std::swap(u, v);
        t0 = std::max(t0, u);
        t1 = std::min(t1, v);
    }
    return t0 < t1;
}

}  // namespace

void AnalyticScene::validate() const {
    for (const Primitive& p : primitives) {
        if (p.sigma < 0.0) throw std::invalid_argument("AnalyticScene: negative density");
        for (int a = 0; a < 3; ++a) {
            double ext = p.kind == Primitive::Kind::Sphere ? p.size[0] : p.size[static_cast<std::size_t>(a)];
            if (p.center[static_cast<std::size_t>(a)] - ext < bounds_min[static_cast<std::size_t>(a)] ||
                p.center[static_cast<std::size_t>(a)] + ext > bounds_max[static_cast<std::size_t>(a)])
                throw std::invalid_argument("AnalyticScene: primitive outside bounds");
        }
    }
}

double AnalyticScene::density(const Vec3& p) const {
    double s = 0;
    for (const Primitive& prim : primitives)
        if (inside(prim, p)) s += prim.sigma;
    return s;
}

Vec3 AnalyticScene::emitted(const Vec3& p) const {
    double s = 0;
    Vec3 c{};
    for (const Primitive& prim : primitives) {
        if (!inside(prim, p)) continue;
        s += prim.sigma;
        c = vadd(c, vscale(prim.albedo, prim.sigma));
    }
    return s > 0 ? vscale(c, 1.0 / s) : Vec3{};
}

AnalyticScene AnalyticScene::sphere3() {
    AnalyticScene sc;
    sc.background = {1.0, 1.0, 1.0};
    sc.primitives = {
        {Primitive::Kind::Sphere, {0.45, 0.05, 0.0}, {0.4, 0, 0}, 200.0, {0.85, 0.25, 0.2}},
        {Primitive::Kind::Sphere, {-0.45, 0.3, 0.25}, {0.35, 0, 0}, 200.0, {0.2, 0.7, 0.3}},
        {Primitive::Kind::Box, {-0.1, -0.45, -0.3}, {0.45, 0.18, 0.3}, 200.0, {0.25, 0.35, 0.85}},
    };
    sc.validate();
    return sc;
}

OracleRender oracle_render(const AnalyticScene& scene, const Camera& cam, int samples_per_ray) {
    if (samples_per_ray < 1024)
        throw std::invalid_argument("oracle_render: need at least 1024 samples per ray");
    scene.validate();
    cam.validate();
    OracleRender out;
    out.rgb = Image(cam.width, cam.height);
    out.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
    const double bin = (cam.far - cam.near) / samples_per_ray;

    for (int j = 0; j < cam.height; ++j) {
        for (int i = 0; i < cam.width; ++i) {
            Vec3 o = cam.origin();
            Vec3 d = cam.ray_direction(i, j);
            std::vector<double> cuts = {cam.near, cam.far};
            for (const Primitive& p : scene.primitives) {
                double t0, t1;
                if (!intersect(p, o, d, t0, t1)) continue;
                if (t0 > cam.near && t0 < cam.far) cuts.push_back(t0);
                if (t1 > cam.near && t1 < cam.far) cuts.push_back(t1);
            }
            std::sort(cuts.begin(), cuts.end());
            double trans = 1.0, depth = 0.0;
            Vec3 rgb{};
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
                double u = cuts[k], v = cuts[k + 1];
                if (v - u < 1e-12) continue;
                Vec3 mid = vadd(o, vscale(d, 0.5 * (u + v)));
                double sigma = scene.density(mid);
                if (sigma <= 0.0) continue;
                Vec3 col = scene.emitted(mid);
                // density is constant on this span; bins only refine depth
                int pieces = std::max<int>(1, static_cast<int>(std::ceil((v - u) / bin)));
                double step = (v - u) / pieces;
                double tau = sigma * step;
                double absorb = 1.0 - std::exp(-tau);
                for (int q = 0; q < pieces; ++q) {
                    double a = u + q * step;
                    double w = trans * absorb;
                    rgb = vadd(rgb, vscale(col, w));
                    depth += w * (a + 0.5 * step);
                    trans *= 1.0 - absorb;
                }
            }
            rgb = vadd(rgb, vscale(scene.background, trans));
            depth += trans * cam.far;
            for (int c = 0; c < 3; ++c) out.rgb.at(i, j, c) = rgb[static_cast<std::size_t>(c)];
            out.depth[static_cast<std::size_t>(j) * cam.width + i] = depth;
        }
    }
    return out;
}

Dataset orbit_dataset(const AnalyticScene& scene, int res, int views) {
    Dataset ds;
    for (int v = 0; v < views; ++v) {
        double ang = 2.0 * std::numbers::pi * v / views;
        double el = 0.55 + 0.25 * std::sin(3.0 * ang);
        Vec3 eye = {2.6 * std::cos(el) * std::sin(ang), 2.6 * std::sin(el),
                    2.6 * std::cos(el) * std::cos(ang)};
        Camera cam = Camera::look_at(eye, {0, 0, 0}, {0, 1, 0}, static_cast<double>(res), res, res,
                                     0.8, 4.8);
        ds.cameras.push_back(cam);
        ds.images.push_back(oracle_render(scene, cam, 1024).rgb);
    }
    return ds;
}

}  // namespace combi
