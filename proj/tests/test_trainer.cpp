#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "combi/trainer.hpp"

using namespace combi;
namespace fs = std::filesystem;

namespace {

// 12 poses on a ring around a one-sphere scene, 16x16
Dataset tiny_dataset(int res = 16, int views = 12) {
    AnalyticScene sc;
    sc.background = {1, 1, 1};
    sc.primitives = {{Primitive::Kind::Sphere, {0.0, 0.0, 0.0}, {0.5, 0, 0}, 200.0, {0.8, 0.3, 0.2}}};
    Dataset ds;
    for (int v = 0; v < views; ++v) {
        double ang = 2.0 * 3.14159265358979312 * v / views;
        Camera cam = Camera::look_at({2.2 * std::sin(ang), 0.7, 2.2 * std::cos(ang)}, {0, 0, 0},
                                     {0, 1, 0}, static_cast<double>(res), res, res, 0.5, 4.5);
        ds.cameras.push_back(cam);
        ds.images.push_back(oracle_render(sc, cam, 1024).rgb);
    }
    return make_fewshot_split(ds, 3);
}

TrainConfig tiny_config(int iters) {
    TrainConfig cfg = TrainConfig::preset("toy");
    cfg.iterations = iters;
    cfg.rays_per_iter = 64;
    cfg.samples_per_ray = 16;
    cfg.model.grid.levels = 6;
    cfg.model.grid.n_max = 32;
    cfg.model.density_hidden = {24, 24};
    cfg.model.color_hidden = {24, 24};
    cfg.loss.dist_warmup_iters = 50;
    return resolve_toggles(cfg);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch_dir() {
    fs::path p = fs::temp_directory_path() / "combi_trainer_test";
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config hash is stable and field-sensitive") {
    TrainConfig a = tiny_config(100);
    TrainConfig b = tiny_config(100);
    CHECK(a.hash() == b.hash());
    b.loss.lambda_kl *= 2;
    CHECK(a.hash() != b.hash());
    TrainConfig c = tiny_config(100);
    c.use_ds = false;
    CHECK(a.hash() != c.hash());
}

TEST_CASE("zero iterations leave the initialization untouched") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(0);
    NerfModel model(cfg.model, cfg.seed);
    std::vector<std::vector<double>> before;
    for (int i = 0; i < model.params().size(); ++i) before.push_back(model.params().value(i).data);
    AdamState adam;
    adam.init(model.params());
    TrainResult r = train(model, adam, cfg, ds);
    CHECK(r.completed == 0);
    CHECK(!r.aborted);
    for (int i = 0; i < model.params().size(); ++i)
        CHECK(model.params().value(i).data == before[static_cast<std::size_t>(i)]);
}

TEST_CASE("regularizers off leaves only the color term in the log") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = apply_ablation(tiny_config(5), "vanilla");
    NerfModel model(cfg.model, cfg.seed);
    AdamState adam;
    adam.init(model.params());
    TrainResult r = train(model, adam, cfg, ds);
    REQUIRE(r.completed == 5);
    for (const LossReport& rep : r.log) {
        CHECK(rep.rgb > 0.0);
        CHECK(rep.dist == 0.0);
        CHECK(rep.fg == 0.0);
        CHECK(rep.kl == 0.0);
        CHECK(rep.ds == 0.0);
        CHECK(rep.entr == 0.0);
        CHECK(rep.total == rep.rgb);
        CHECK(rep.mask_x == 1.0);
    }
}

TEST_CASE("training is deterministic and reduces the color loss") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(150);

    NerfModel m1(cfg.model, cfg.seed);
    AdamState a1;
    a1.init(m1.params());
    TrainResult r1 = train(m1, a1, cfg, ds);
    REQUIRE(r1.completed == 150);

    NerfModel m2(cfg.model, cfg.seed);
    AdamState a2;
    a2.init(m2.params());
    TrainResult r2 = train(m2, a2, cfg, ds);

    for (int i = 0; i < m1.params().size(); ++i)
        CHECK(m1.params().value(i).data == m2.params().value(i).data);
    fs::path log1 = scratch_dir() / "log1.txt", log2 = scratch_dir() / "log2.txt";
    write_loss_log(log1.string(), r1.log);
    write_loss_log(log2.string(), r2.log);
    CHECK(slurp(log1) == slurp(log2));

    double head = 0, tail = 0;
    for (int i = 0; i < 20; ++i) {
        head += r1.log[static_cast<std::size_t>(i)].rgb / 20.0;
        tail += r1.log[static_cast<std::size_t>(130 + i)].rgb / 20.0;
    }
    CHECK(tail < head);

    // schedules visible in the log: warmup then preset value; mask ramps to 1
    CHECK(r1.log[0].lambda_dist_eff == 0.0);
    CHECK(r1.log[49].lambda_dist_eff == 0.0);
    CHECK(r1.log[50].lambda_dist_eff == cfg.loss.lambda_dist);
    CHECK(r1.log[0].mask_x == doctest::Approx(cfg.mask.x_initial).epsilon(1e-12));
    CHECK(r1.log[149].mask_x == 1.0);
    double prev = 0;
    for (const LossReport& rep : r1.log) {
        CHECK(rep.mask_x >= prev);
        prev = rep.mask_x;
    }
}

TEST_CASE("checkpoint round trip reproduces evaluation bit-identically") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(60);
    NerfModel model(cfg.model, cfg.seed);
    AdamState adam;
    adam.init(model.params());
    TrainResult r = train(model, adam, cfg, ds);
    REQUIRE(!r.aborted);

    fs::path path = scratch_dir() / "ckpt.bin";
    save_checkpoint(path.string(), model.params(), adam, r.completed, cfg.hash());

    NerfModel fresh(cfg.model, cfg.seed + 999);  // different init, fully overwritten by load
    AdamState adam2;
    adam2.init(fresh.params());
    std::int64_t iter = 0;
    load_checkpoint(path.string(), fresh.params(), adam2, iter, cfg.hash());
    CHECK(iter == r.completed);
    CHECK(adam2.step == adam.step);

    EvalReport e1 = evaluate(model, cfg, ds);
    EvalReport e2 = evaluate(fresh, cfg, ds);
    REQUIRE(e1.rows.size() == e2.rows.size());
    CHECK(e1.rows.size() == ds.test_ids.size());
    for (std::size_t i = 0; i < e1.rows.size(); ++i) {
        CHECK(e1.rows[i].psnr == e2.rows[i].psnr);
        CHECK(e1.rows[i].ssim == e2.rows[i].ssim);
    }
    double mean = 0;
    for (const EvalRow& row : e1.rows) mean += row.psnr;
    CHECK(e1.mean_psnr == doctest::Approx(mean / e1.rows.size()).epsilon(1e-12));

    // wrong hash is rejected
    CHECK_THROWS(load_checkpoint(path.string(), fresh.params(), adam2, iter, cfg.hash() + 1));
}

TEST_CASE("lipschitz row-sum invariant holds after training") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(60);
    NerfModel model(cfg.model, cfg.seed);
    AdamState adam;
    adam.init(model.params());
    train(model, adam, cfg, ds);
    CHECK(model.density_net().row_sum_violation(model.params()) <= 1e-12);
    CHECK(model.color_net().row_sum_violation(model.params()) <= 1e-12);
    CHECK(model.density_net().lipschitz_bound(model.params()) > 0.0);
}

TEST_CASE("ablation ladder produces the labeled rows") {
    CHECK(ablation_ladder().size() == 8);
    TrainConfig base = tiny_config(3);
    TrainConfig v = apply_ablation(base, "vanilla");
    CHECK(!v.use_dist);
    CHECK(!v.lipschitz_density);
    CHECK(!v.model.lipschitz_density);
    TrainConfig nl = apply_ablation(base, "no_lipschitz");
    CHECK(nl.use_dist);
    CHECK(!nl.model.lipschitz_density);
    TrainConfig av = apply_ablation(base, "full_alpha_kl");
    CHECK(av.loss.kl_alpha_variant);
    CHECK_THROWS(apply_ablation(base, "bogus"));

    Dataset ds = tiny_dataset();
    auto table = ablate(base, {"vanilla", "full"}, ds, 2);
    REQUIRE(table.size() == 2);
    CHECK(table[0].name == "vanilla");
    CHECK(std::isfinite(table[0].psnr));
    CHECK(std::isfinite(table[1].psnr));

    // identical configs give identical rows
    auto twice = ablate(base, {"full", "full"}, ds, 2);
    CHECK(twice[0].psnr == twice[1].psnr);
    CHECK(twice[0].ssim == twice[1].ssim);
}

TEST_CASE("render_novel writes round-trippable artifacts") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(5);
    NerfModel model(cfg.model, cfg.seed);
    AdamState adam;
    adam.init(model.params());
    train(model, adam, cfg, ds);
    OracleRender r = render_novel(model, cfg, ds.cameras[0]);
    fs::path img = scratch_dir() / "novel.ppm";
    fs::path dep = scratch_dir() / "novel.f32";
    write_image(img.string(), r.rgb);
    write_depth(dep.string(), r.depth, 16, 16);
    int w, h;
    std::vector<double> back = read_depth(dep.string(), w, h);
    REQUIRE(back.size() == r.depth.size());
    for (std::size_t k = 0; k < back.size(); ++k)
        CHECK(back[k] == static_cast<double>(static_cast<float>(r.depth[k])));
}
