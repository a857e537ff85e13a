#include "combi/trainer.hpp"

#include "combi/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace combi {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'O', 'M', 'B', 'I', 'C', 'K', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

// FNV-1a running digest over raw little-endian field bytes
struct Digest {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    }
    void f64(double v) { bytes(&v, sizeof v); }
    void i64(std::int64_t v) { bytes(&v, sizeof v); }
    void b(bool v) { i64(v ? 1 : 0); }
};

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_u32(std::ofstream& out, std::uint32_t v) { put_bytes(out, &v, sizeof v); }
void put_u64(std::ofstream& out, std::uint64_t v) { put_bytes(out, &v, sizeof v); }
void put_i64(std::ofstream& out, std::int64_t v) { put_bytes(out, &v, sizeof v); }
void put_f64(std::ofstream& out, double v) { put_bytes(out, &v, sizeof v); }
void put_tensor(std::ofstream& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    put_bytes(out, t.data.data(), t.data.size() * sizeof(double));
}

void get_bytes(std::ifstream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
}
std::uint32_t get_u32(std::ifstream& in) { std::uint32_t v; get_bytes(in, &v, sizeof v); return v; }
std::uint64_t get_u64(std::ifstream& in) { std::uint64_t v; get_bytes(in, &v, sizeof v); return v; }
std::int64_t get_i64(std::ifstream& in) { std::int64_t v; get_bytes(in, &v, sizeof v); return v; }
double get_f64(std::ifstream& in) { double v; get_bytes(in, &v, sizeof v); return v; }
Tensor get_tensor(std::ifstream& in) {
    std::uint32_t rank = get_u32(in);
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(get_u32(in)));
    Tensor t(shape);
    get_bytes(in, t.data.data(), t.data.size() * sizeof(double));
    return t;
}

void append_single_ray(RayBatch& batch, const Camera& cam, int i, int j) {
    batch.origins.push_back(cam.origin());
    batch.directions.push_back(cam.ray_direction(i, j));
    batch.pixels.push_back({i, j});
    batch.patch_id.push_back(-1);
}

// Table entries decay exponentially from lr_table to lr_table_final.
double table_lr_at(const TrainConfig& cfg, int iter) {
    if (cfg.iterations <= 1) return cfg.lr_table;
    double frac = static_cast<double>(iter) / (cfg.iterations - 1);
    return cfg.lr_table * std::pow(cfg.lr_table_final / cfg.lr_table, frac);
}

// Select a set of rows of a [B,N] node as a new [K,N] node.
NodeId gather_node_rows(Graph& g, NodeId m, const std::vector<int>& rows) {
    NodeId out = -1;
    for (int r : rows) {
        NodeId s = g.slice(m, 0, r, 1);
        out = out < 0 ? s : g.concat(out, s, 0);
    }
    return out;
}

}  // namespace

TrainConfig TrainConfig::preset(const std::string& name) {
    TrainConfig cfg;
    cfg.mask.saturate_fraction = 0.9;
    if (name == "llff" || name == "toy") {
        cfg.loss.lambda_dist = 2e-5;
        cfg.loss.lambda_fg = 1e-4;
        cfg.loss.lambda_kl = 1e-5;
        cfg.loss.lambda_ds = 0.1;
        cfg.mask.saturate_fraction = 0.9;
        // short desk-scale runs need most levels active from the start and
        // the rest released much earlier than the full-scale schedule
        if (name == "toy") {
            cfg.mask.saturate_fraction = 0.2;
            cfg.mask.x_initial = 0.85;
            // short runs on tight near/far ranges are prone to early
            // near-camera floaters; annealing the sample span suppresses them
            cfg.annealing = true;
            cfg.anneal.anneal_iters = 400;
            cfg.anneal.start_fraction = 0.2;
        }
    } else if (name == "synthetic") {
        cfg.loss.lambda_dist = 2e-3;
        cfg.loss.lambda_fg = 1e-3;
        cfg.loss.lambda_kl = 1e-5;
        cfg.loss.lambda_ds = 0.01;
        cfg.mask.saturate_fraction = 0.2;
    } else {
        throw std::invalid_argument("TrainConfig::preset: unknown preset " + name);
    }
    return cfg;
}

std::uint64_t TrainConfig::hash() const {
    Digest d;
    d.i64(iterations);
    d.i64(rays_per_iter);
    d.i64(samples_per_ray);
    d.i64(static_cast<std::int64_t>(seed));
    d.f64(lr_table);
    d.f64(lr_table_final);
    d.f64(lr_net);
    for (bool v : {use_dist, use_fg, use_kl, use_ds, use_entropy, use_patches, lipschitz_density,
                   lipschitz_color, mask_position, mask_direction, annealing, composite_background})
        d.b(v);
    for (double v : background) d.f64(v);
    d.f64(loss.lambda_dist);
    d.f64(loss.lambda_fg);
    d.f64(loss.lambda_kl);
    d.f64(loss.lambda_ds);
    d.f64(loss.lambda_entr);
    d.i64(loss.dist_warmup_iters);
    d.f64(loss.dist_ray_fraction);
    d.i64(loss.s_patch);
    d.f64(loss.eps_log);
    d.f64(loss.entropy_threshold);
    d.b(loss.kl_alpha_variant);
    d.f64(mask.saturate_fraction);
    d.f64(mask.x_initial);
    d.f64(mask_dir.saturate_fraction);
    d.f64(mask_dir.x_initial);
    d.i64(anneal.anneal_iters);
    d.f64(anneal.start_fraction);
    d.f64(anneal.midpoint);
    d.i64(model.grid.levels);
    d.i64(model.grid.features);
    d.i64(model.grid.table_size);
    d.i64(model.grid.n_min);
    d.i64(model.grid.n_max);
    d.i64(model.sh_degree);
    for (int w : model.density_hidden) d.i64(w);
    d.i64(model.geo_features);
    for (int w : model.color_hidden) d.i64(w);
    for (double v : model.bounds_min) d.f64(v);
    for (double v : model.bounds_max) d.f64(v);
    return d.h;
}

void TrainConfig::validate() const {
    if (iterations < 0) throw std::invalid_argument("TrainConfig: negative iterations");
    if (rays_per_iter < 1) throw std::invalid_argument("TrainConfig: rays_per_iter must be >= 1");
    if (samples_per_ray < 2) throw std::invalid_argument("TrainConfig: samples_per_ray must be >= 2");
    bool patches = use_patches && (use_ds || use_kl);
    if (patches && rays_per_iter < loss.s_patch * loss.s_patch)
        throw std::invalid_argument("TrainConfig: ray budget smaller than one patch");
    if (model.lipschitz_density != lipschitz_density || model.lipschitz_color != lipschitz_color)
        throw std::invalid_argument("TrainConfig: model lipschitz flags out of sync; call resolve_toggles");
}

TrainConfig resolve_toggles(const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.model.lipschitz_density = c.lipschitz_density;
    c.model.lipschitz_color = c.lipschitz_color;
    return c;
}

TrainResult train(NerfModel& model, AdamState& adam, const TrainConfig& cfg, const Dataset& data) {
    cfg.validate();
    data.validate();
    if (data.train_ids.empty()) throw std::invalid_argument("train: no training views");
    Rng rng(cfg.seed);
    const int s = cfg.loss.s_patch;
    const bool patches = cfg.use_patches && (cfg.use_ds || cfg.use_kl);

    MaskSchedule msched = cfg.mask;
    msched.total_iterations = cfg.iterations;
    if (msched.x_initial >= 1.0) msched.x_initial = 1.0 / cfg.model.grid.levels;
    MaskSchedule dsched = cfg.mask_dir;
    dsched.total_iterations = cfg.iterations;
    if (dsched.x_initial >= 1.0) dsched.x_initial = 1.0 / std::max(1, cfg.model.sh_degree);

    TrainResult result;
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        int view = data.train_ids[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(data.train_ids.size())))];
        const Camera& cam = data.cameras[static_cast<std::size_t>(view)];
        const Image& img = data.images[static_cast<std::size_t>(view)];

        RayBatch batch;
        std::vector<int> patch_starts;
        int n_patches = patches ? (cfg.rays_per_iter / 2) / (s * s) : 0;
        for (int p = 0; p < n_patches; ++p) {
            int i0 = rng.uniform_int(cam.width - s + 1);
            int j0 = rng.uniform_int(cam.height - s + 1);
            patch_starts.push_back(batch.size());
            append_patch(batch, cam, i0, j0, s, p);
        }
        int n_singles = cfg.rays_per_iter - n_patches * s * s;
        for (int k = 0; k < n_singles; ++k)
            append_single_ray(batch, cam, rng.uniform_int(cam.width), rng.uniform_int(cam.height));
        const int b_main = batch.size();

        // each training ray pairs with one uniformly drawn 4-neighbor;
        // neighbors not already in the batch are rendered as extra rays
        std::vector<int> kl_pair;
        if (cfg.use_kl) {
            std::unordered_map<std::int64_t, int> by_pixel;
            for (int r = 0; r < b_main; ++r)
                by_pixel.emplace(static_cast<std::int64_t>(batch.pixels[static_cast<std::size_t>(r)][1]) *
                                         cam.width +
                                     batch.pixels[static_cast<std::size_t>(r)][0],
                                 r);
            for (int r = 0; r < b_main; ++r) {
                auto npx = choose_adjacent_pixel(batch.pixels[static_cast<std::size_t>(r)], cam.width,
                                                 cam.height, rng);
                std::int64_t key = static_cast<std::int64_t>(npx[1]) * cam.width + npx[0];
                auto it = by_pixel.find(key);
                if (it != by_pixel.end()) {
                    kl_pair.push_back(it->second);
                } else {
                    int idx = batch.size();
                    append_single_ray(batch, cam, npx[0], npx[1]);
                    by_pixel.emplace(key, idx);
                    kl_pair.push_back(idx);
                }
            }
        }
        const int b_all = batch.size();

        double t_near = cam.near, t_far = cam.far;
        if (cfg.annealing) {
            auto [an, af] = anneal_range(iter, cfg.anneal, cam.near, cam.far);
            t_near = an;
            t_far = af;
        }
        double mask_x = cfg.mask_position ? mask_ratio(iter, msched) : 1.0;
        double mask_dx = cfg.mask_direction ? mask_ratio(iter, dsched) : 1.0;

        Graph g;
        NerfModel::BatchRender br = model.render_batch(g, batch, t_near, t_far, cfg.samples_per_ray,
                                                       true, rng, mask_x, mask_dx);
        NodeId chan[3];
        if (cfg.composite_background) {
            NodeId miss = g.sub(g.constant(Tensor::full({b_all, 1}, 1.0)), br.render.acc);
            for (int c = 0; c < 3; ++c)
                chan[c] = g.add(br.render.color[c],
                                g.scale(miss, cfg.background[static_cast<std::size_t>(c)]));
        } else {
            for (int c = 0; c < 3; ++c) chan[c] = br.render.color[c];
        }

        Tensor gt({b_all, 3});
        for (int r = 0; r < b_all; ++r)
            for (int c = 0; c < 3; ++c)
                gt.at(r, c) = img.at(batch.pixels[static_cast<std::size_t>(r)][0],
                                     batch.pixels[static_cast<std::size_t>(r)][1], c);

        LossNodes parts;
        RgbLossNodes rl = rgb_loss(g, chan, gt);
        parts.rgb = rl.mean;
        parts.rgb_sum = rl.sum;

        if (cfg.use_kl) {
            NodeId src = cfg.loss.kl_alpha_variant ? br.render.alpha : br.render.weight;
            RayPdf all = ray_pdf(g, src, cfg.loss.eps_log);
            RayPdf main_pdf, pair_pdf;
            main_pdf.p = g.slice(all.p, 0, 0, b_main);
            main_pdf.degenerate.assign(all.degenerate.begin(), all.degenerate.begin() + b_main);
            pair_pdf.p = gather_node_rows(g, all.p, kl_pair);
            for (int r : kl_pair)
                pair_pdf.degenerate.push_back(all.degenerate[static_cast<std::size_t>(r)]);
            parts.kl = kl_divergence_loss(g, main_pdf, pair_pdf, cfg.loss.eps_log);
        }
        if (cfg.use_dist) {
            int k = std::max(1, static_cast<int>(cfg.loss.dist_ray_fraction * b_main));
            std::vector<int> pool(static_cast<std::size_t>(b_main));
            for (int r = 0; r < b_main; ++r) pool[static_cast<std::size_t>(r)] = r;
            for (int r = 0; r < k; ++r)
                std::swap(pool[static_cast<std::size_t>(r)],
                          pool[static_cast<std::size_t>(r + rng.uniform_int(b_main - r))]);
            pool.resize(static_cast<std::size_t>(k));
            parts.dist = distortion_loss(g, br.render.weight, br.render.depth, br.edges, pool,
                                         cfg.loss.eps_log);
        }
        if (cfg.use_fg) parts.fg = foreground_loss(g, g.slice(br.render.acc, 0, 0, b_main));
        if (cfg.use_ds && !patch_starts.empty()) {
            std::vector<char> keep;
            for (int start : patch_starts) {
                double acc_sum = 0;
                for (int r = start; r < start + s * s; ++r)
                    acc_sum += g.value(br.render.acc).at(r, 0);
                keep.push_back(acc_sum / (s * s) >= 1e-3 ? 1 : 0);
            }
            parts.ds = depth_smoothness_loss(g, br.render.depth, patch_starts, s, keep);
        }
        if (cfg.use_entropy)
            parts.entr = entropy_loss(g, g.slice(br.render.alpha, 0, 0, b_main),
                                      cfg.loss.entropy_threshold, cfg.loss.eps_log);

        LossReport rep;
        NodeId total = total_loss(g, parts, cfg.loss, iter, &rep);
        rep.mask_x = mask_x;
        if (!std::isfinite(rep.total)) {
            result.aborted = true;
            const char* term = "total";
            if (!std::isfinite(rep.rgb)) term = "rgb";
            else if (!std::isfinite(rep.dist)) term = "dist";
            else if (!std::isfinite(rep.fg)) term = "fg";
            else if (!std::isfinite(rep.kl)) term = "kl";
            else if (!std::isfinite(rep.ds)) term = "ds";
            else if (!std::isfinite(rep.entr)) term = "entr";
            result.abort_reason = std::string("non-finite ") + term + " loss at iteration " +
                                  std::to_string(iter);
            break;
        }

        auto grads = g.backward(total);
        double lr_t = table_lr_at(cfg, iter);
        adam.lr = lr_t;
        adam_step(model.params(), grads, adam, model.lr_scales(cfg.lr_net / lr_t));
        result.log.push_back(rep);
        ++result.completed;
    }
    return result;
}

void save_checkpoint(const std::string& path, const ParamStore& params, const AdamState& adam,
                     std::int64_t iteration, std::uint64_t config_hash) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
        put_bytes(out, kCheckpointMagic, sizeof kCheckpointMagic);
        put_u32(out, kCheckpointVersion);
        put_u64(out, config_hash);
        put_i64(out, iteration);
        put_u32(out, static_cast<std::uint32_t>(params.size()));
        for (int i = 0; i < params.size(); ++i) {
            const std::string& name = params.name(i);
            put_u32(out, static_cast<std::uint32_t>(name.size()));
            put_bytes(out, name.data(), name.size());
            put_tensor(out, params.value(i));
        }
        put_f64(out, adam.lr);
        put_f64(out, adam.beta1);
        put_f64(out, adam.beta2);
        put_f64(out, adam.eps);
        put_i64(out, adam.step);
        put_i64(out, adam.skipped_nonfinite);
        put_u32(out, static_cast<std::uint32_t>(adam.m.size()));
        for (const Tensor& t : adam.m) put_tensor(out, t);
        for (const Tensor& t : adam.v) put_tensor(out, t);
        if (!out) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("save_checkpoint: rename failed for " + path);
}

void load_checkpoint(const std::string& path, ParamStore& params, AdamState& adam,
                     std::int64_t& iteration, std::uint64_t expected_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    get_bytes(in, magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    if (get_u32(in) != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version in " + path);
    std::uint64_t h = get_u64(in);
    if (h != expected_hash)
        throw std::runtime_error("load_checkpoint: config hash mismatch in " + path);
    iteration = get_i64(in);
    std::uint32_t count = get_u32(in);
    if (static_cast<int>(count) != params.size())
        throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path);
    for (int i = 0; i < params.size(); ++i) {
        std::uint32_t len = get_u32(in);
        std::string name(len, '\0');
        get_bytes(in, name.data(), len);
        if (name != params.name(i))
            throw std::runtime_error("load_checkpoint: parameter order mismatch at " + name);
        Tensor t = get_tensor(in);
        if (!(t.shape == params.value(i).shape))
            throw std::runtime_error("load_checkpoint: shape mismatch at " + name);
        params.value(i) = std::move(t);
    }
    adam.lr = get_f64(in);
    adam.beta1 = get_f64(in);
    adam.beta2 = get_f64(in);
    adam.eps = get_f64(in);
    adam.step = get_i64(in);
    adam.skipped_nonfinite = get_i64(in);
    std::uint32_t moments = get_u32(in);
    adam.m.clear();
    adam.v.clear();
    for (std::uint32_t i = 0; i < moments; ++i) adam.m.push_back(get_tensor(in));
    for (std::uint32_t i = 0; i < moments; ++i) adam.v.push_back(get_tensor(in));
}

void write_loss_log(const std::string& path, const std::vector<LossReport>& log) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("write_loss_log: cannot open " + tmp);
        char line[512];
        for (std::size_t i = 0; i < log.size(); ++i) {
            const LossReport& r = log[i];
            std::snprintf(line, sizeof line,
                          "iter=%zu total=%.17g rgb=%.17g rgb_sum=%.17g dist=%.17g fg=%.17g "
                          "kl=%.17g ds=%.17g entr=%.17g lambda_dist=%.17g mask_x=%.17g\n",
                          i, r.total, r.rgb, r.rgb_sum, r.dist, r.fg, r.kl, r.ds, r.entr,
                          r.lambda_dist_eff, r.mask_x);
            out << line;
        }
        if (!out) throw std::runtime_error("write_loss_log: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_loss_log: rename failed for " + path);
}

OracleRender render_novel(const NerfModel& model, const TrainConfig& cfg, const Camera& cam) {
    cam.validate();
    OracleRender out;
    out.rgb = Image(cam.width, cam.height);
    out.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
    Rng rng(0);  // unused: deterministic bin-center sampling
    for (int j = 0; j < cam.height; ++j) {
        RayBatch batch;
        for (int i = 0; i < cam.width; ++i) append_single_ray(batch, cam, i, j);
        Graph g;
        NerfModel::BatchRender br = model.render_batch(g, batch, cam.near, cam.far,
                                                       cfg.samples_per_ray, false, rng, 1.0, 1.0);
        for (int i = 0; i < cam.width; ++i) {
            double miss = 1.0 - g.value(br.render.acc).at(i, 0);
            for (int c = 0; c < 3; ++c) {
                double v = g.value(br.render.color[c]).at(i, 0);
                if (cfg.composite_background) v += miss * cfg.background[static_cast<std::size_t>(c)];
                out.rgb.at(i, j, c) = std::clamp(v, 0.0, 1.0);
            }
            out.depth[static_cast<std::size_t>(j) * cam.width + i] = g.value(br.render.depth).at(i, 0);
        }
    }
    return out;
}

EvalReport evaluate(const NerfModel& model, const TrainConfig& cfg, const Dataset& data) {
    data.validate();
    if (data.test_ids.empty()) throw std::invalid_argument("evaluate: no test views");
    EvalReport report;
    for (int view : data.test_ids) {
        const Camera& cam = data.cameras[static_cast<std::size_t>(view)];
        OracleRender r = render_novel(model, cfg, cam);
        EvalRow row;
        row.view = view;
        row.psnr = psnr(r.rgb, data.images[static_cast<std::size_t>(view)]);
        row.ssim = ssim(r.rgb, data.images[static_cast<std::size_t>(view)]);
        row.avg = average_metric(row.psnr, row.ssim);
        report.rows.push_back(row);
        report.mean_psnr += row.psnr;
        report.mean_ssim += row.ssim;
        report.mean_avg += row.avg;
    }
    report.mean_psnr /= static_cast<double>(report.rows.size());
    report.mean_ssim /= static_cast<double>(report.rows.size());
    report.mean_avg /= static_cast<double>(report.rows.size());
    return report;
}

void write_eval_report(const std::string& path, const EvalReport& report) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("write_eval_report: cannot open " + tmp);
        out << "# " << kAverageMetricNote << "\n";
        char line[256];
        for (const EvalRow& r : report.rows) {
            std::snprintf(line, sizeof line, "view=%d psnr=%.17g ssim=%.17g avg=%.17g\n", r.view,
                          r.psnr, r.ssim, r.avg);
            out << line;
        }
        std::snprintf(line, sizeof line, "mean psnr=%.17g ssim=%.17g avg=%.17g\n", report.mean_psnr,
                      report.mean_ssim, report.mean_avg);
        out << line;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_eval_report: rename failed for " + path);
}

TrainConfig apply_ablation(const TrainConfig& base, const std::string& row) {
    TrainConfig c = base;
    auto strip = [&c]() {
        c.use_dist = c.use_fg = c.use_kl = c.use_ds = c.use_entropy = false;
        c.use_patches = false;
        c.lipschitz_density = c.lipschitz_color = false;
        c.mask_position = c.mask_direction = false;
        c.annealing = false;
    };
    if (row == "vanilla") {
        strip();
    } else if (row == "lipschitz") {
        strip();
        c.lipschitz_density = c.lipschitz_color = true;
    } else if (row == "dist_fg") {
        strip();
        c.use_dist = c.use_fg = true;
    } else if (row == "dist_fg_kl") {
        strip();
        c.use_dist = c.use_fg = c.use_kl = true;
        c.use_patches = true;
    } else if (row == "dist_fg_kl_ds") {
        strip();
        c.use_dist = c.use_fg = c.use_kl = c.use_ds = true;
        c.use_patches = true;
    } else if (row == "dist_fg_kl_ds_lipschitz") {
        strip();
        c.use_dist = c.use_fg = c.use_kl = c.use_ds = true;
        c.use_patches = true;
        c.lipschitz_density = c.lipschitz_color = true;
    } else if (row == "dist_fg_kl_ds_lipschitz_em") {
        strip();
        c.use_dist = c.use_fg = c.use_kl = c.use_ds = true;
        c.use_patches = true;
        c.lipschitz_density = c.lipschitz_color = true;
        c.mask_position = true;
    } else if (row == "full") {
        // base as configured
    } else if (row == "full_alpha_kl") {
        c.loss.kl_alpha_variant = true;
    } else if (row == "no_dist") {
        c.use_dist = false;
    } else if (row == "no_fg") {
        c.use_fg = false;
    } else if (row == "no_kl") {
        c.use_kl = false;
    } else if (row == "no_ds") {
        c.use_ds = false;
    } else if (row == "no_lipschitz") {
        c.lipschitz_density = c.lipschitz_color = false;
    } else if (row == "no_mask") {
        c.mask_position = false;
    } else {
        throw std::invalid_argument("apply_ablation: unknown row " + row);
    }
    c.model.lipschitz_density = c.lipschitz_density;
    c.model.lipschitz_color = c.lipschitz_color;
    return c;
}

std::vector<std::string> ablation_ladder() {
    return {"vanilla", "lipschitz", "dist_fg", "dist_fg_kl", "dist_fg_kl_ds",
            "dist_fg_kl_ds_lipschitz", "dist_fg_kl_ds_lipschitz_em", "full"};
}

std::vector<AblateRow> ablate(const TrainConfig& base, const std::vector<std::string>& rows,
                              const Dataset& data, int threads) {
    std::vector<AblateRow> table(rows.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            TrainConfig cfg = apply_ablation(base, rows[i]);
            NerfModel model(cfg.model, cfg.seed);
            AdamState adam;
            adam.init(model.params());
            TrainResult r = train(model, adam, cfg, data);
            AblateRow& row = table[i];
            row.name = rows[i];
            if (r.aborted) {
                row.psnr = row.ssim = row.avg = std::nan("");
                continue;
            }
            EvalReport rep = evaluate(model, cfg, data);
            row.psnr = rep.mean_psnr;
            row.ssim = rep.mean_ssim;
            row.avg = rep.mean_avg;
        }
    };
    int n = std::max(1, std::min<int>(threads, static_cast<int>(rows.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    return table;
}

void write_ablate_table(const std::string& path, const std::vector<AblateRow>& rows) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("write_ablate_table: cannot open " + tmp);
        out << "# " << kAverageMetricNote << "\n";
        char line[256];
        for (const AblateRow& r : rows) {
            std::snprintf(line, sizeof line, "config=%s psnr=%.17g ssim=%.17g avg=%.17g\n",
                          r.name.c_str(), r.psnr, r.ssim, r.avg);
            out << line;
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_ablate_table: rename failed for " + path);
}

}  // namespace combi
