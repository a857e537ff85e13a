#pragma once

#include <string>
#include <vector>

#include "combi/dataset.hpp"
#include "combi/losses.hpp"
#include "combi/model.hpp"
#include "combi/optim.hpp"
#include "combi/scene.hpp"

namespace combi {

// Full experiment description: model shape, batch composition, schedules
// and per-term toggles. Every switch is independent so ablations can
// remove exactly one component.
struct TrainConfig {
    int iterations = 2000;
    int rays_per_iter = 128;
    int samples_per_ray = 24;
    std::uint64_t seed = 1;

    double lr_table = 1e-2;        // hash tables, exponential decay
    double lr_table_final = 1e-3;
    double lr_net = 1e-3;          // layer weights and bound parameters, flat

    bool use_dist = true;
    bool use_fg = true;
    bool use_kl = true;
    bool use_ds = true;
    bool use_entropy = false;
    bool use_patches = true;       // draw half the budget as patch blocks
    bool lipschitz_density = true;
    bool lipschitz_color = true;
    bool mask_position = true;
    bool mask_direction = false;
    bool annealing = false;
    bool composite_background = true;
    Vec3 background = {1.0, 1.0, 1.0};

    LossConfig loss;
    MaskSchedule mask;             // total_iterations/x_initial resolved in train()
    MaskSchedule mask_dir;
    AnnealConfig anneal;
    ModelConfig model;

    // "llff", "synthetic" or "toy" (llff lambdas at desk scale)
    static TrainConfig preset(const std::string& name);

    // Stable digest of every field that affects the run.
    std::uint64_t hash() const;

    void validate() const;
};

// Copies the network toggles into the model description; call before
// constructing a NerfModel from the config.
TrainConfig resolve_toggles(const TrainConfig& cfg);

struct TrainResult {
    std::vector<LossReport> log;   // one record per completed iteration
    int completed = 0;
    bool aborted = false;
    std::string abort_reason;
};

// Runs the optimization loop on the dataset's training views. Deterministic
// for a fixed (config, dataset): ray draws, stratified samples and loss
// subsets all come from one sequential generator seeded by cfg.seed.
TrainResult train(NerfModel& model, AdamState& adam, const TrainConfig& cfg, const Dataset& data);

// Versioned little-endian binary container for parameters + optimizer
// state. Loading verifies magic, version and config hash.
void save_checkpoint(const std::string& path, const ParamStore& params, const AdamState& adam,
                     std::int64_t iteration, std::uint64_t config_hash);
void load_checkpoint(const std::string& path, ParamStore& params, AdamState& adam,
                     std::int64_t& iteration, std::uint64_t expected_hash);

// Fixed-format text log, one record per iteration; identical runs produce
// byte-identical files.
void write_loss_log(const std::string& path, const std::vector<LossReport>& log);

struct EvalRow {
    int view = 0;
    double psnr = 0, ssim = 0, avg = 0;
};
struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_psnr = 0, mean_ssim = 0, mean_avg = 0;
};

// Renders every test view with deterministic bin-center sampling and
// scores it against the dataset image.
EvalReport evaluate(const NerfModel& model, const TrainConfig& cfg, const Dataset& data);
void write_eval_report(const std::string& path, const EvalReport& report);

// Deterministic full-frame render of an arbitrary pose.
OracleRender render_novel(const NerfModel& model, const TrainConfig& cfg, const Camera& cam);

// Named configuration ladder mirroring the incremental ablation table:
// vanilla, lipschitz alone, the loss terms added one group at a time, the
// encoding mask, the full preset. "full_alpha_kl" swaps in the
// alpha-based KL variant.
TrainConfig apply_ablation(const TrainConfig& base, const std::string& row_name);
std::vector<std::string> ablation_ladder();

struct AblateRow {
    std::string name;
    double psnr = 0, ssim = 0, avg = 0;
};

// One full train+evaluate per row name, shared seed. Rows run on
// `threads` workers; each run owns its model and graphs so results do not
// depend on scheduling.
std::vector<AblateRow> ablate(const TrainConfig& base, const std::vector<std::string>& rows,
                              const Dataset& data, int threads = 1);
void write_ablate_table(const std::string& path, const std::vector<AblateRow>& rows);

}  // namespace combi
