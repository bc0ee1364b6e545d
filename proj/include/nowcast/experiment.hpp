#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nowcast/gridio.hpp"
#include "nowcast/unet3d.hpp"
#include "nowcast/verify.hpp"

namespace nowcast {

// One seed-paired comparison run: n models with the ETH channel against n
// without, seeds and validation folds shared pairwise.
struct ExperimentPlan {
    std::string manifest_path;
    ModelConfig model_template;  // in_channels overridden per group
    HyperParams hyper;
    int n_models_per_group = 8;
    std::vector<uint64_t> seeds;  // one per model; defaults to 1..n
    VerifyConfig verify;
    std::string out_dir;
    int jobs = 1;
};

struct GroupRunResult {
    std::vector<std::string> checkpoint_paths;  // survivors, model index order
    std::vector<std::pair<int, std::string>> failures;  // model index + message
};

// Trains model i with seeds[i] and validation fold i; writes
// <out_dir>/<group_name>/ckpt_<i>.unck and train_log_<i>.csv.
GroupRunResult run_group(const ExperimentPlan& plan, const std::string& group_name,
                         int in_channels);

struct ModelEval {
    std::vector<MetricCurve> curves;
    std::vector<SampleMetrics> samples;
};

// Produces the 18 forecast frames for one test sequence's inputs.
using Predictor = std::function<std::vector<GridFrame>(
    const std::vector<GridFrame>& rain_in, const std::vector<GridFrame>& eth_in)>;

// Runs a predictor over every TEST sequence and computes the full metric
// suite: MAE/MSE/ME, pooled and per-sample-mean categorical metrics at the
// configured thresholds, and FSS at thresholds x radii.
ModelEval evaluate_predictor(const Predictor& predict, bool needs_eth,
                             const SequenceManifest& manifest,
                             const std::string& base_dir, const VerifyConfig& vcfg,
                             int in_frames, int out_frames, int jobs = 1);

ModelEval evaluate_checkpoint(const Checkpoint& ckpt, const SequenceManifest& manifest,
                              const std::string& base_dir, const VerifyConfig& vcfg,
                              int jobs = 1);

// method is "persistence" or "advection".
ModelEval evaluate_baseline(const std::string& method, const SequenceManifest& manifest,
                            const std::string& base_dir, const VerifyConfig& vcfg,
                            int in_frames, int out_frames, int jobs = 1);

void write_eval_csv(const ModelEval& eval, const std::string& dir,
                    const std::string& prefix);
ModelEval read_eval_csv(const std::string& dir, const std::string& prefix);

// ETH vs reflectivity joint histogram over the test inputs (the paired
// observation channels, not predictions).
JointHistogram input_joint_histogram(const SequenceManifest& manifest,
                                     const std::string& base_dir);

struct CompareInputs {
    std::string group_a_name;  // reported first (the ETH group by convention)
    std::string group_a_dir;
    std::string group_b_name;
    std::string group_b_dir;
    int ranking_lead = 6;  // +30 min
};

// Emits the report bundle: curves/*.csv (per-lead mean+std per group for
// MSE/MAE/ME and the categorical metrics), fss/fss_matrices.csv at the
// configured report leads, diffs/per_sample.csv keyed by observed severity,
// and summary.txt.
void compare_groups(const CompareInputs& inputs, const VerifyConfig& vcfg,
                    const std::string& out_dir);

// Renders one test case: observation, both groups' best models (highest
// FSS at 2.5 mm/h, radius 16, +30 min), and the ETH input, as portable
// pixmaps plus a per-panel max-rain table.
void render_case(const SequenceManifest& manifest, const std::string& base_dir,
                 const CompareInputs& inputs, int64_t start_timestamp,
                 const std::vector<int>& leads, const std::string& out_dir);

// Fixed rain colormap used by the renderer, breakpoints in mm/h.
struct RgbColor {
    uint8_t r, g, b;
};
RgbColor rain_color(double mmh);
RgbColor eth_color(double km);

void write_ppm(const std::vector<RgbColor>& pixels, uint32_t rows, uint32_t cols,
               const std::string& path);

}  // namespace nowcast
