// Command-line front end: train / eval / render / ablate / gradcheck /
// make-scene over one JSON config with preset inheritance.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or config error,
// 3 runtime abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "combi/dataset.hpp"
#include "combi/metrics.hpp"
#include "combi/scene.hpp"
#include "combi/trainer.hpp"
#include "combi/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace combi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAbort = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_vec3(const json& obj, const char* key, Vec3& out) {
    if (!obj.contains(key)) return;
    const json& a = obj.at(key);
    if (!a.is_array() || a.size() != 3)
        throw UsageError(std::string("config: ") + key + " must be an array of 3 numbers");
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = a.at(i).get<double>();
}

void check_keys(const json& obj, const char* where, const std::vector<std::string>& known) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const std::string& k : known)
            if (k == key) ok = true;
        if (!ok) throw UsageError(std::string("config: unknown key \"") + key + "\" in " + where);
    }
}

TrainConfig config_from_json(const json& doc) {
    check_keys(doc, "top level",
               {"preset", "iterations", "rays_per_iter", "samples_per_ray", "seed", "lr_table",
                "lr_table_final", "lr_net", "background", "toggles", "loss", "mask", "mask_dir",
                "anneal", "model"});
    TrainConfig cfg = TrainConfig::preset(doc.value("preset", std::string("toy")));
    read_field(doc, "iterations", cfg.iterations);
    read_field(doc, "rays_per_iter", cfg.rays_per_iter);
    read_field(doc, "samples_per_ray", cfg.samples_per_ray);
    read_field(doc, "seed", cfg.seed);
    read_field(doc, "lr_table", cfg.lr_table);
    read_field(doc, "lr_table_final", cfg.lr_table_final);
    read_field(doc, "lr_net", cfg.lr_net);
    read_vec3(doc, "background", cfg.background);
    if (doc.contains("toggles")) {
        const json& t = doc.at("toggles");
        check_keys(t, "toggles",
                   {"dist", "fg", "kl", "ds", "entropy", "patches", "lipschitz_density",
                    "lipschitz_color", "mask_position", "mask_direction", "annealing",
                    "composite_background"});
        read_field(t, "dist", cfg.use_dist);
        read_field(t, "fg", cfg.use_fg);
        read_field(t, "kl", cfg.use_kl);
        read_field(t, "ds", cfg.use_ds);
        read_field(t, "entropy", cfg.use_entropy);
        read_field(t, "patches", cfg.use_patches);
        read_field(t, "lipschitz_density", cfg.lipschitz_density);
        read_field(t, "lipschitz_color", cfg.lipschitz_color);
        read_field(t, "mask_position", cfg.mask_position);
        read_field(t, "mask_direction", cfg.mask_direction);
        read_field(t, "annealing", cfg.annealing);
        read_field(t, "composite_background", cfg.composite_background);
    }
    if (doc.contains("loss")) {
        const json& l = doc.at("loss");
        check_keys(l, "loss",
                   {"lambda_dist", "lambda_fg", "lambda_kl", "lambda_ds", "lambda_entr",
                    "dist_warmup_iters", "dist_ray_fraction", "s_patch", "eps_log",
                    "entropy_threshold", "kl_alpha_variant"});
        read_field(l, "lambda_dist", cfg.loss.lambda_dist);
        read_field(l, "lambda_fg", cfg.loss.lambda_fg);
        read_field(l, "lambda_kl", cfg.loss.lambda_kl);
        read_field(l, "lambda_ds", cfg.loss.lambda_ds);
        read_field(l, "lambda_entr", cfg.loss.lambda_entr);
        read_field(l, "dist_warmup_iters", cfg.loss.dist_warmup_iters);
        read_field(l, "dist_ray_fraction", cfg.loss.dist_ray_fraction);
        read_field(l, "s_patch", cfg.loss.s_patch);
        read_field(l, "eps_log", cfg.loss.eps_log);
        read_field(l, "entropy_threshold", cfg.loss.entropy_threshold);
        read_field(l, "kl_alpha_variant", cfg.loss.kl_alpha_variant);
    }
    if (doc.contains("mask")) {
        const json& m = doc.at("mask");
        check_keys(m, "mask", {"saturate_fraction"});
        read_field(m, "saturate_fraction", cfg.mask.saturate_fraction);
    }
    if (doc.contains("mask_dir")) {
        const json& m = doc.at("mask_dir");
        check_keys(m, "mask_dir", {"saturate_fraction"});
        read_field(m, "saturate_fraction", cfg.mask_dir.saturate_fraction);
    }
    if (doc.contains("anneal")) {
        const json& a = doc.at("anneal");
        check_keys(a, "anneal", {"anneal_iters", "start_fraction", "midpoint"});
        read_field(a, "anneal_iters", cfg.anneal.anneal_iters);
        read_field(a, "start_fraction", cfg.anneal.start_fraction);
        read_field(a, "midpoint", cfg.anneal.midpoint);
    }
    if (doc.contains("model")) {
        const json& m = doc.at("model");
        check_keys(m, "model",
                   {"levels", "features", "table_size", "n_min", "n_max", "sh_degree",
                    "density_hidden", "geo_features", "color_hidden", "bounds_min", "bounds_max"});
        read_field(m, "levels", cfg.model.grid.levels);
        read_field(m, "features", cfg.model.grid.features);
        read_field(m, "table_size", cfg.model.grid.table_size);
        read_field(m, "n_min", cfg.model.grid.n_min);
        read_field(m, "n_max", cfg.model.grid.n_max);
        read_field(m, "sh_degree", cfg.model.sh_degree);
        read_field(m, "density_hidden", cfg.model.density_hidden);
        read_field(m, "geo_features", cfg.model.geo_features);
        read_field(m, "color_hidden", cfg.model.color_hidden);
        read_vec3(m, "bounds_min", cfg.model.bounds_min);
        read_vec3(m, "bounds_max", cfg.model.bounds_max);
    }
    return cfg;
}

json config_to_json(const TrainConfig& cfg) {
    json doc;
    doc["iterations"] = cfg.iterations;
    doc["rays_per_iter"] = cfg.rays_per_iter;
    doc["samples_per_ray"] = cfg.samples_per_ray;
    doc["seed"] = cfg.seed;
    doc["lr_table"] = cfg.lr_table;
    doc["lr_table_final"] = cfg.lr_table_final;
    doc["lr_net"] = cfg.lr_net;
    doc["background"] = {cfg.background[0], cfg.background[1], cfg.background[2]};
    doc["toggles"] = {{"dist", cfg.use_dist},
                      {"fg", cfg.use_fg},
                      {"kl", cfg.use_kl},
                      {"ds", cfg.use_ds},
                      {"entropy", cfg.use_entropy},
                      {"patches", cfg.use_patches},
                      {"lipschitz_density", cfg.lipschitz_density},
                      {"lipschitz_color", cfg.lipschitz_color},
                      {"mask_position", cfg.mask_position},
                      {"mask_direction", cfg.mask_direction},
                      {"annealing", cfg.annealing},
                      {"composite_background", cfg.composite_background}};
    doc["loss"] = {{"lambda_dist", cfg.loss.lambda_dist},
                   {"lambda_fg", cfg.loss.lambda_fg},
                   {"lambda_kl", cfg.loss.lambda_kl},
                   {"lambda_ds", cfg.loss.lambda_ds},
                   {"lambda_entr", cfg.loss.lambda_entr},
                   {"dist_warmup_iters", cfg.loss.dist_warmup_iters},
                   {"dist_ray_fraction", cfg.loss.dist_ray_fraction},
                   {"s_patch", cfg.loss.s_patch},
                   {"eps_log", cfg.loss.eps_log},
                   {"entropy_threshold", cfg.loss.entropy_threshold},
                   {"kl_alpha_variant", cfg.loss.kl_alpha_variant}};
    doc["mask"] = {{"saturate_fraction", cfg.mask.saturate_fraction}};
    doc["mask_dir"] = {{"saturate_fraction", cfg.mask_dir.saturate_fraction}};
    doc["anneal"] = {{"anneal_iters", cfg.anneal.anneal_iters},
                     {"start_fraction", cfg.anneal.start_fraction},
                     {"midpoint", cfg.anneal.midpoint}};
    doc["model"] = {{"levels", cfg.model.grid.levels},
                    {"features", cfg.model.grid.features},
                    {"table_size", cfg.model.grid.table_size},
                    {"n_min", cfg.model.grid.n_min},
                    {"n_max", cfg.model.grid.n_max},
                    {"sh_degree", cfg.model.sh_degree},
                    {"density_hidden", cfg.model.density_hidden},
                    {"geo_features", cfg.model.geo_features},
                    {"color_hidden", cfg.model.color_hidden},
                    {"bounds_min", {cfg.model.bounds_min[0], cfg.model.bounds_min[1],
                                    cfg.model.bounds_min[2]}},
                    {"bounds_max", {cfg.model.bounds_max[0], cfg.model.bounds_max[1],
                                    cfg.model.bounds_max[2]}}};
    return doc;
}

void apply_toggle(TrainConfig& cfg, const std::string& arg) {
    auto eq = arg.find('=');
    if (eq == std::string::npos)
        throw UsageError("--toggle expects <name>=<on|off>, got \"" + arg + "\"");
    std::string name = arg.substr(0, eq);
    std::string val = arg.substr(eq + 1);
    bool on;
    if (val == "on")
        on = true;
    else if (val == "off")
        on = false;
    else
        throw UsageError("--toggle value must be on or off, got \"" + val + "\"");
    if (name == "dist") cfg.use_dist = on;
    else if (name == "fg") cfg.use_fg = on;
    else if (name == "kl") cfg.use_kl = on;
    else if (name == "ds") cfg.use_ds = on;
    else if (name == "entropy") cfg.use_entropy = on;
    else if (name == "patches") cfg.use_patches = on;
    else if (name == "lipschitz_density") cfg.lipschitz_density = on;
    else if (name == "lipschitz_color") cfg.lipschitz_color = on;
    else if (name == "lipschitz") cfg.lipschitz_density = cfg.lipschitz_color = on;
    else if (name == "mask_position") cfg.mask_position = on;
    else if (name == "mask_direction") cfg.mask_direction = on;
    else if (name == "annealing") cfg.annealing = on;
    else if (name == "composite_background") cfg.composite_background = on;
    else throw UsageError("--toggle: unknown switch \"" + name + "\"");
}

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::string data_path;
    std::string out_dir;
    std::vector<std::string> toggles;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int views = 0;
    bool force = false;
};

TrainConfig load_config(const CommonOpts& opts) {
    TrainConfig cfg;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw UsageError("cannot open config file " + opts.config_path);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw UsageError("malformed config " + opts.config_path + ": " + e.what());
        }
        try {
            cfg = config_from_json(doc);
        } catch (const json::exception& e) {
            throw UsageError("config " + opts.config_path + ": " + e.what());
        }
    } else {
        cfg = TrainConfig::preset(opts.preset.empty() ? "toy" : opts.preset);
    }
    if (opts.seed_set) cfg.seed = opts.seed;
    for (const std::string& t : opts.toggles) apply_toggle(cfg, t);
    cfg = resolve_toggles(cfg);
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

Dataset load_data(const CommonOpts& opts, bool need_split) {
    if (opts.data_path.empty()) throw UsageError("--data <transforms manifest> is required");
    Dataset ds;
    try {
        ds = load_transforms_dataset(opts.data_path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (need_split) {
        int n = opts.views > 0 ? opts.views : 3;
        try {
            ds = make_fewshot_split(ds, n);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    return ds;
}

// Refuses to reuse an existing run directory unless forced.
void prepare_out_dir(const CommonOpts& opts) {
    if (opts.out_dir.empty()) throw UsageError("--out <directory> is required");
    if (fs::exists(opts.out_dir) && !fs::is_empty(opts.out_dir) && !opts.force)
        throw UsageError("output directory " + opts.out_dir +
                         " already exists; pass --force to overwrite");
    fs::create_directories(opts.out_dir);
}

void write_resolved_config(const fs::path& path, const TrainConfig& cfg) {
    std::string tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out << config_to_json(cfg).dump(2) << "\n";
    }
    if (std::rename(tmp.c_str(), path.string().c_str()) != 0)
        throw std::runtime_error("rename failed for " + path.string());
}

int cmd_train(const CommonOpts& opts) {
    TrainConfig cfg = load_config(opts);
    Dataset ds = load_data(opts, true);
    prepare_out_dir(opts);

    NerfModel model(cfg.model, cfg.seed);
    AdamState adam;
    adam.init(model.params());
    TrainResult r = train(model, adam, cfg, ds);

    fs::path out(opts.out_dir);
    write_loss_log((out / "loss_log.txt").string(), r.log);
    write_resolved_config(out / "config.json", cfg);
    if (r.aborted) {
        std::fprintf(stderr, "training aborted at iteration %d: %s\n", r.completed,
                     r.abort_reason.c_str());
        return kExitAbort;
    }
    save_checkpoint((out / "checkpoint.bin").string(), model.params(), adam, r.completed,
                    cfg.hash());
    EvalReport rep = evaluate(model, cfg, ds);
    write_eval_report((out / "eval.txt").string(), rep);
    std::printf("trained %d iterations; test psnr %.4f ssim %.4f avg %.6f\n", r.completed,
                rep.mean_psnr, rep.mean_ssim, rep.mean_avg);
    return kExitOk;
}

NerfModel load_model(const std::string& ckpt, const TrainConfig& cfg) {
    NerfModel model(cfg.model, cfg.seed);
    AdamState adam;
    adam.init(model.params());
    std::int64_t iter = 0;
    try {
        load_checkpoint(ckpt, model.params(), adam, iter, cfg.hash());
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    return model;
}

int cmd_eval(const CommonOpts& opts, const std::string& ckpt) {
    TrainConfig cfg = load_config(opts);
    Dataset ds = load_data(opts, true);
    NerfModel model = load_model(ckpt, cfg);
    EvalReport rep = evaluate(model, cfg, ds);
    if (!opts.out_dir.empty()) {
        prepare_out_dir(opts);
        write_eval_report((fs::path(opts.out_dir) / "eval.txt").string(), rep);
    }
    std::printf("# %s\n", kAverageMetricNote);
    for (const EvalRow& row : rep.rows)
        std::printf("view=%d psnr=%.4f ssim=%.4f avg=%.6f\n", row.view, row.psnr, row.ssim,
                    row.avg);
    std::printf("mean psnr=%.4f ssim=%.4f avg=%.6f\n", rep.mean_psnr, rep.mean_ssim, rep.mean_avg);
    return kExitOk;
}

int cmd_render(const CommonOpts& opts, const std::string& ckpt, int view) {
    TrainConfig cfg = load_config(opts);
    Dataset ds = load_data(opts, false);
    if (view < 0 || view >= ds.size())
        throw UsageError("--view must be in [0, " + std::to_string(ds.size() - 1) + "]");
    NerfModel model = load_model(ckpt, cfg);
    prepare_out_dir(opts);
    const Camera& cam = ds.cameras[static_cast<std::size_t>(view)];
    OracleRender r = render_novel(model, cfg, cam);
    fs::path out(opts.out_dir);
    write_image((out / "render.ppm").string(), r.rgb);
    write_depth((out / "depth.f32").string(), r.depth, cam.width, cam.height);
    std::printf("wrote %s and %s\n", (out / "render.ppm").string().c_str(),
                (out / "depth.f32").string().c_str());
    return kExitOk;
}

int cmd_ablate(const CommonOpts& opts, std::vector<std::string> rows, int threads) {
    TrainConfig cfg = load_config(opts);
    Dataset ds = load_data(opts, true);
    if (rows.empty()) rows = ablation_ladder();
    for (const std::string& r : rows) {
        try {
            apply_ablation(cfg, r);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    prepare_out_dir(opts);
    std::vector<AblateRow> table = ablate(cfg, rows, ds, threads);
    for (const AblateRow& row : table) {
        if (!std::isfinite(row.psnr)) {
            std::fprintf(stderr, "run %s aborted\n", row.name.c_str());
            return kExitAbort;
        }
    }
    write_ablate_table((fs::path(opts.out_dir) / "ablate.txt").string(), table);
    write_resolved_config(fs::path(opts.out_dir) / "config.json", cfg);
    for (const AblateRow& row : table)
        std::printf("%-28s psnr=%.4f ssim=%.4f avg=%.6f\n", row.name.c_str(), row.psnr, row.ssim,
                    row.avg);
    return kExitOk;
}

int cmd_gradcheck() {
    std::vector<GradcheckRow> rows = gradcheck_all();
    bool all_ok = true;
    for (const GradcheckRow& r : rows) {
        std::printf("%-24s %.3e %s\n", r.name.c_str(), r.error, r.pass ? "ok" : "FAIL");
        all_ok = all_ok && r.pass;
    }
    if (!all_ok) {
        std::fprintf(stderr, "gradcheck failed\n");
        return kExitVerification;
    }
    return kExitOk;
}

int cmd_make_scene(const CommonOpts& opts, const std::string& name, int views, int res) {
    if (name != "sphere3") throw UsageError("make-scene: unknown scene \"" + name + "\"");
    prepare_out_dir(opts);
    Dataset ds = orbit_dataset(AnalyticScene::sphere3(), res, views);
    const Camera& cam = ds.cameras[0];
    double angle = 2.0 * std::atan(0.5 * cam.width / cam.fx);
    save_transforms_dataset((fs::path(opts.out_dir) / "transforms.json").string(), ds, angle);
    std::printf("wrote %d views at %dx%d to %s\n", ds.size(), res, res, opts.out_dir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale radiance field training and verification"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string ckpt;
    int view = 0;
    int threads = 1;
    std::vector<std::string> rows;
    std::string scene_name = "sphere3";
    int scene_views = 24;
    int scene_res = 64;

    auto add_common = [&](CLI::App* sub, bool with_data) {
        sub->add_option("--config", opts.config_path, "JSON config file");
        sub->add_option("--preset", opts.preset, "preset name (toy, llff, synthetic)");
        sub->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
            opts.seed_set = true;
        });
        sub->add_option("--toggle", opts.toggles, "component switch, <name>=<on|off>");
        sub->add_flag("--force", opts.force, "allow writing into an existing directory");
        if (with_data) {
            sub->add_option("--data", opts.data_path, "transforms manifest");
            sub->add_option("--views", opts.views, "few-shot training view count (default 3)");
        }
    };

    CLI::App* train_cmd = app.add_subcommand("train", "optimize a model on a dataset");
    add_common(train_cmd, true);
    train_cmd->add_option("--out", opts.out_dir, "run directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the test split");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--out", opts.out_dir, "report directory");

    CLI::App* render_cmd = app.add_subcommand("render", "render one dataset pose");
    add_common(render_cmd, true);
    render_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    render_cmd->add_option("--view", view, "dataset view index");
    render_cmd->add_option("--out", opts.out_dir, "output directory")->required();

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "train and score a configuration ladder");
    add_common(ablate_cmd, true);
    ablate_cmd->add_option("--out", opts.out_dir, "output directory")->required();
    ablate_cmd->add_option("--rows", rows, "row names (default: the standard ladder)");
    ablate_cmd->add_option("--threads", threads, "worker count");

    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference audit of all gradients");
    (void)gradcheck_cmd;

    CLI::App* scene_cmd = app.add_subcommand("make-scene", "write an oracle-rendered dataset");
    scene_cmd->add_option("--name", scene_name, "scene name (sphere3)");
    scene_cmd->add_option("--out", opts.out_dir, "dataset directory")->required();
    scene_cmd->add_option("--views", scene_views, "view count");
    scene_cmd->add_option("--res", scene_res, "image resolution");
    scene_cmd->add_flag("--force", opts.force, "allow writing into an existing directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(opts);
        if (eval_cmd->parsed()) return cmd_eval(opts, ckpt);
        if (render_cmd->parsed()) return cmd_render(opts, ckpt, view);
        if (ablate_cmd->parsed()) return cmd_ablate(opts, rows, threads);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck();
        if (scene_cmd->parsed()) return cmd_make_scene(opts, scene_name, scene_views, scene_res);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAbort;
    }
    return kExitUsage;
}
