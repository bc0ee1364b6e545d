// Command-line front end: every pipeline stage as a subcommand, driven by
// a key=value config file with flag overrides. Exit codes: 0 success,
// 1 usage/config error, 2 data/format error, 3 numeric failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nowcast/config.hpp"
#include "nowcast/errors.hpp"
#include "nowcast/experiment.hpp"
#include "nowcast/model_gradcheck.hpp"
#include "nowcast/num_format.hpp"
#include "nowcast/parallel.hpp"

namespace fs = std::filesystem;
using namespace nowcast;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    int jobs = 0;  // 0 = take cli.jobs from config
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "config file (key = value lines)");
    sub->add_option("--set", args.overrides, "override a config key (key=value)")
        ->take_all();
    sub->add_option("--jobs", args.jobs, "worker count for data-parallel stages");
}

Config load_config(const CommonArgs& args) {
    Config cfg = args.config_path.empty() ? Config::defaults()
                                          : Config::from_file(args.config_path);
    cfg.apply_overrides(args.overrides);
    if (args.jobs > 0) cfg.set("cli.jobs", std::to_string(args.jobs));
    return cfg;
}

std::string config_key_listing() {
    std::string out = "Config keys (defaults in parentheses):\n";
    for (const ConfigKeyInfo& info : config_registry()) {
        out += "  " + info.key + " (" + (info.default_value.empty() ? "empty" : info.default_value) +
               ") - " + info.help + "\n";
    }
    return out;
}

void run_synth_gen(const Config& cfg, const std::string& out_dir) {
    DatasetConfig dc = cfg.dataset_config();
    DatasetPaths paths = gen_dataset(dc, out_dir);
    std::cout << "synth-gen: " << paths.n_sequences << " sequences ("
              << paths.dropped << " candidate starts dropped)\n"
              << "  index:    " << paths.index_path << "\n"
              << "  manifest: " << paths.manifest_path << "\n";
}

void run_preprocess(const Config& cfg, const std::string& index_path,
                    const std::string& out_dir) {
    const FrameIndex index = read_frame_index(index_path);
    const ZRParams zr = cfg.zr_params();
    const ClutterParams clutter = cfg.clutter_params();
    const bool do_crop = cfg.get_bool("preprocess.crop_enabled");
    const uint32_t row_off = uint32_t(cfg.get_int("preprocess.crop_row_off"));
    const uint32_t col_off = uint32_t(cfg.get_int("preprocess.crop_col_off"));
    const uint32_t crop_rows = uint32_t(cfg.get_int("preprocess.crop_rows"));
    const uint32_t crop_cols = uint32_t(cfg.get_int("preprocess.crop_cols"));

    fs::create_directories(fs::path(out_dir) / "frames");
    FrameIndex out_index;
    out_index.base_dir = out_dir;
    std::vector<int64_t> stamps;
    for (const auto& [ts, entry] : index.entries) stamps.push_back(ts);

    std::vector<std::pair<int64_t, FrameIndexEntry>> results(stamps.size());
    parallel_for(stamps.size(), cfg.jobs(), [&](size_t i) {
        const int64_t ts = stamps[i];
        const FrameIndexEntry& entry = index.entries.at(ts);
        GridFrame rain = read_frame(resolve_path(index.base_dir, entry.rain_path));
        if (rain.variable == Variable::ReflectivityDbz) rain = dbz_to_rain(rain, zr);
        if (rain.variable != Variable::RainMmh)
            throw DataError("frame " + entry.rain_path + " is neither dBZ nor rain");
        rain = apply_mask(rain, clutter_mask(rain, clutter));
        GridFrame eth = read_frame(resolve_path(index.base_dir, entry.eth_path));
        if (do_crop) {
            rain = crop(rain, row_off, col_off, crop_rows, crop_cols);
            eth = crop(eth, row_off, col_off, crop_rows, crop_cols);
        }
        const std::string rain_rel = "frames/rain_" + std::to_string(ts) + ".rfgd";
        const std::string eth_rel = "frames/eth_" + std::to_string(ts) + ".rfgd";
        write_frame(rain, (fs::path(out_dir) / rain_rel).string());
        write_frame(eth, (fs::path(out_dir) / eth_rel).string());
        results[i] = {ts, {rain_rel, eth_rel}};
    });
    for (auto& [ts, entry] : results) out_index.entries[ts] = entry;
    const std::string out_index_path = (fs::path(out_dir) / "index.txt").string();
    write_frame_index(out_index, out_index_path);
    std::cout << "preprocess: " << out_index.entries.size() << " timestamps -> "
              << out_index_path << "\n";
}

void run_sample(const Config& cfg, const std::string& index_path,
                const std::string& manifest_path) {
    const FrameIndex index = read_frame_index(index_path);
    SamplerConfig sc = cfg.sampler_config();
    const uint64_t seed = cfg.get_uint64("sampler.seed");

    std::vector<int64_t> stamps;
    for (const auto& [ts, entry] : index.entries) stamps.push_back(ts);
    std::vector<Candidate> weighted(stamps.size());
    parallel_for(stamps.size(), cfg.jobs(), [&](size_t i) {
        GridFrame rain = read_frame(resolve_path(index.base_dir,
                                                 index.entries.at(stamps[i]).rain_path));
        weighted[i] = {stamps[i], event_weight(rain_to_dbz(rain, cfg.zr_params()))};
    });

    std::vector<Candidate> starts = rank_candidates(weighted, sc);
    BuildResult built = build_sequences(starts, index, sc);
    SequenceManifest manifest = assign_folds(built.manifest, seed, sc);
    std::sort(manifest.records.begin(), manifest.records.end(),
              [](const SequenceRecord& a, const SequenceRecord& b) {
                  return a.start_timestamp < b.start_timestamp;
              });
    write_manifest(manifest, manifest_path);

    // overlap report: sequences sharing at least one frame with a neighbor
    int overlapping = 0;
    for (size_t i = 1; i < manifest.records.size(); ++i) {
        const int64_t gap = manifest.records[i].start_timestamp -
                            manifest.records[i - 1].start_timestamp;
        if (gap < int64_t(kSequenceLen) * kCadenceSeconds) ++overlapping;
    }
    std::cout << "sample: " << manifest.records.size() << " sequences ("
              << built.dropped << " starts dropped, " << overlapping
              << " overlapping pairs) -> " << manifest_path << "\n";
}

void run_train(const Config& cfg, const std::string& manifest_path, int fold,
               bool with_eth, const std::string& ckpt_path,
               const std::string& log_path) {
    ModelConfig mc = cfg.model_config();
    if (with_eth) mc.in_channels = 2;
    const SequenceManifest manifest = read_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();
    TrainDataset<real_t> dataset = load_train_dataset<real_t>(manifest, base_dir, fold, mc);
    UNet3d<real_t> model(mc);
    TrainOutcome outcome = train_model(model, dataset, cfg.hyper_params());
    if (!log_path.empty()) write_train_log(outcome.log, log_path);
    if (outcome.numeric_failure)
        throw NumericError("training aborted: " + outcome.failure_message);
    save_checkpoint(outcome.checkpoint, ckpt_path);
    double best_val = std::numeric_limits<double>::infinity();
    for (const TrainLogRow& row : outcome.log) best_val = std::min(best_val, row.val_mse);
    std::cout << "train: fold " << fold << " seed " << mc.seed << " rounds "
              << outcome.log.size() << " best val_mse " << format_double(best_val)
              << " -> " << ckpt_path << "\n";
}

void run_predict(const std::string& ckpt_path, const std::string& manifest_path,
                 int64_t start, const std::string& out_dir) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SequenceManifest manifest = read_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();
    const SequenceRecord* rec = nullptr;
    for (const SequenceRecord& r : manifest.records)
        if (start == 0 ? r.fold == kFoldTest : r.start_timestamp == start) {
            rec = &r;
            break;
        }
    if (!rec) throw DataError("no matching sequence in manifest");
    std::vector<GridFrame> rain_in, eth_in;
    for (int i = 0; i < ckpt.config.in_frames; ++i)
        rain_in.push_back(read_frame(resolve_path(base_dir, rec->rain_paths[size_t(i)])));
    if (ckpt.config.in_channels == 2)
        for (int i = 0; i < ckpt.config.in_frames; ++i)
            eth_in.push_back(read_frame(resolve_path(base_dir, rec->eth_paths[size_t(i)])));
    std::vector<GridFrame> pred = predict_sequence(ckpt, rain_in, eth_in);
    fs::create_directories(out_dir);
    for (const GridFrame& f : pred)
        write_frame(f, (fs::path(out_dir) /
                        ("pred_" + std::to_string(f.timestamp) + ".rfgd")).string());
    std::cout << "predict: sequence " << rec->start_timestamp << " -> " << pred.size()
              << " frames in " << out_dir << "\n";
}

void run_baseline(const Config& cfg, const std::string& manifest_path, int64_t start,
                  const std::string& method, const std::string& out_dir) {
    const SequenceManifest manifest = read_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();
    const SequenceRecord* rec = nullptr;
    for (const SequenceRecord& r : manifest.records)
        if (start == 0 ? r.fold == kFoldTest : r.start_timestamp == start) {
            rec = &r;
            break;
        }
    if (!rec) throw DataError("no matching sequence in manifest");
    std::vector<GridFrame> rain_in;
    for (int i = 0; i < 4; ++i)
        rain_in.push_back(read_frame(resolve_path(base_dir, rec->rain_paths[size_t(i)])));
    std::vector<GridFrame> pred;
    if (method == "persistence") {
        pred = persistence(rain_in.back(), 18);
    } else if (method == "advection") {
        MotionField motion = estimate_motion(rain_in, cfg.motion_params());
        pred = extrapolate(rain_in.back(), motion, 18);
    } else {
        throw ConfigError("unknown baseline method '" + method + "'");
    }
    fs::create_directories(out_dir);
    for (const GridFrame& f : pred)
        write_frame(f, (fs::path(out_dir) /
                        (method + "_" + std::to_string(f.timestamp) + ".rfgd")).string());
    std::cout << "baseline: " << method << " on sequence " << rec->start_timestamp
              << " -> " << out_dir << "\n";
}

void run_verify(const Config& cfg, const std::string& manifest_path,
                const std::string& models_dir, const std::string& out_dir,
                bool baselines) {
    const SequenceManifest manifest = read_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();
    const VerifyConfig vcfg = cfg.verify_config();
    fs::create_directories(out_dir);

    int n_models = 0;
    for (int i = 0;; ++i) {
        const std::string ckpt_path =
            (fs::path(models_dir) / ("ckpt_" + std::to_string(i) + ".unck")).string();
        if (!fs::exists(ckpt_path)) break;
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        ModelEval eval = evaluate_checkpoint(ckpt, manifest, base_dir, vcfg, cfg.jobs());
        write_eval_csv(eval, out_dir, "model_" + std::to_string(i));
        ++n_models;
    }
    if (n_models == 0)
        throw DataError("no ckpt_<i>.unck checkpoints found in " + models_dir);
    if (baselines) {
        for (const std::string method : {"persistence", "advection"}) {
            ModelEval eval =
                evaluate_baseline(method, manifest, base_dir, vcfg, 4, 18, cfg.jobs());
            write_eval_csv(eval, out_dir, method);
        }
        write_joint_histogram(input_joint_histogram(manifest, base_dir),
                              (fs::path(out_dir) / "joint_hist_eth_dbz.csv").string());
    }
    std::cout << "verify: " << n_models << " models evaluated -> " << out_dir << "\n";
}

void run_compare(const Config& cfg, const CompareInputs& inputs,
                 const std::string& out_dir) {
    compare_groups(inputs, cfg.verify_config(), out_dir);
    std::cout << "compare: report bundle -> " << out_dir << "\n";
}

void run_render(const Config& cfg, const std::string& manifest_path,
                const CompareInputs& inputs, int64_t start,
                const std::vector<int>& leads, const std::string& out_dir) {
    (void)cfg;
    const SequenceManifest manifest = read_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();
    int64_t ts = start;
    if (ts == 0) {
        for (const SequenceRecord& r : manifest.records)
            if (r.fold == kFoldTest) {
                ts = r.start_timestamp;
                break;
            }
        if (ts == 0) throw DataError("manifest has no TEST sequences");
    }
    render_case(manifest, base_dir, inputs, ts, leads, out_dir);
    std::cout << "render: case " << ts << " -> " << out_dir << "/cases/" << ts << "\n";
}

void run_gradcheck(double tolerance) {
    UNet3d<double> model(reference_tiny_config());
    Rng rng(11);
    Tensor<double> input = random_tensor<double>({1, 2, 4, 8, 8}, rng, 0.05, 1.0);
    Tensor<double> target = random_tensor<double>({1, 18, 8, 8}, rng, 0.0, 1.0);
    ModelGradCheck<double> mgc(model, std::move(input), std::move(target));
    GradCheckTarget<double> t = mgc.target();
    GradCheckReport report = gradcheck(t);
    std::cout << "gradcheck: max relative error " << format_double(report.max_rel_error)
              << " over " << report.checked << " coordinates (tolerance "
              << format_double(tolerance) << ")\n";
    if (!report.passed(tolerance)) {
        for (const GradCheckEntry& e : report.worst)
            std::cerr << "  worst: " << e.name << "[" << e.index << "] analytic "
                      << e.analytic << " numeric " << e.numeric << " rel " << e.rel_error
                      << "\n";
        throw NumericError("gradient check failed");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar nowcasting benchmark pipeline"};
    app.require_subcommand(1);
    app.footer(config_key_listing());

    CommonArgs common;

    auto* sc_synth = app.add_subcommand("synth-gen", "generate a synthetic dataset");
    std::string synth_out;
    sc_synth->add_option("--out", synth_out, "output directory")->required();
    add_common(sc_synth, common);

    auto* sc_pre = app.add_subcommand("preprocess", "convert, declutter and crop frames");
    std::string pre_index, pre_out;
    sc_pre->add_option("--index", pre_index, "input frame index")->required();
    sc_pre->add_option("--out", pre_out, "output directory")->required();
    add_common(sc_pre, common);

    auto* sc_sample = app.add_subcommand("sample", "rank events and build the manifest");
    std::string sample_index, sample_out;
    sc_sample->add_option("--index", sample_index, "input frame index")->required();
    sc_sample->add_option("--out", sample_out, "output manifest path")->required();
    add_common(sc_sample, common);

    auto* sc_train = app.add_subcommand("train", "train one model on one fold");
    std::string train_manifest, train_out, train_log;
    int train_fold = 0;
    bool train_eth = false;
    uint64_t train_seed = 0;
    sc_train->add_option("--manifest", train_manifest, "sequence manifest")->required();
    sc_train->add_option("--fold", train_fold, "validation fold index")->required();
    sc_train->add_option("--out", train_out, "checkpoint output path")->required();
    sc_train->add_option("--log", train_log, "training log CSV path");
    sc_train->add_flag("--eth", train_eth, "include the ETH input channel");
    sc_train->add_option("--seed", train_seed, "model seed (overrides unet3d.seed)");
    add_common(sc_train, common);

    auto* sc_predict = app.add_subcommand("predict", "forecast one test sequence");
    std::string predict_ckpt, predict_manifest, predict_out;
    int64_t predict_start = 0;
    sc_predict->add_option("--checkpoint", predict_ckpt, "model checkpoint")->required();
    sc_predict->add_option("--manifest", predict_manifest, "sequence manifest")->required();
    sc_predict->add_option("--start", predict_start,
                           "sequence start timestamp (default: first TEST)");
    sc_predict->add_option("--out", predict_out, "output directory")->required();
    add_common(sc_predict, common);

    auto* sc_base = app.add_subcommand("baseline", "extrapolation baseline forecast");
    std::string base_manifest, base_method = "persistence", base_out;
    int64_t base_start = 0;
    sc_base->add_option("--manifest", base_manifest, "sequence manifest")->required();
    sc_base->add_option("--method", base_method, "persistence or advection");
    sc_base->add_option("--start", base_start,
                        "sequence start timestamp (default: first TEST)");
    sc_base->add_option("--out", base_out, "output directory")->required();
    add_common(sc_base, common);

    auto* sc_verify = app.add_subcommand("verify", "evaluate checkpoints on the test set");
    std::string verify_manifest, verify_models, verify_out;
    bool verify_no_baselines = false;
    sc_verify->add_option("--manifest", verify_manifest, "sequence manifest")->required();
    sc_verify->add_option("--models", verify_models, "directory with ckpt_<i>.unck")
        ->required();
    sc_verify->add_option("--out", verify_out, "evaluation output directory")->required();
    sc_verify->add_flag("--no-baselines", verify_no_baselines,
                        "skip persistence/advection baselines");
    add_common(sc_verify, common);

    auto* sc_compare = app.add_subcommand("compare", "build the group comparison report");
    CompareInputs cmp;
    cmp.group_a_name = "with_eth";
    cmp.group_b_name = "without_eth";
    std::string compare_out;
    sc_compare->add_option("--group-a", cmp.group_a_dir, "evaluation dir of group A")
        ->required();
    sc_compare->add_option("--group-b", cmp.group_b_dir, "evaluation dir of group B")
        ->required();
    sc_compare->add_option("--name-a", cmp.group_a_name, "label of group A");
    sc_compare->add_option("--name-b", cmp.group_b_name, "label of group B");
    sc_compare->add_option("--out", compare_out, "report bundle directory")->required();
    add_common(sc_compare, common);

    auto* sc_render = app.add_subcommand("render", "render a forecast case study");
    std::string render_manifest, render_out;
    CompareInputs render_inputs;
    render_inputs.group_a_name = "with_eth";
    render_inputs.group_b_name = "without_eth";
    int64_t render_start = 0;
    std::vector<int> render_leads = {6, 12, 18};
    sc_render->add_option("--manifest", render_manifest, "sequence manifest")->required();
    sc_render->add_option("--group-a", render_inputs.group_a_dir,
                          "evaluation+checkpoint dir of group A")
        ->required();
    sc_render->add_option("--group-b", render_inputs.group_b_dir,
                          "evaluation+checkpoint dir of group B")
        ->required();
    sc_render->add_option("--name-a", render_inputs.group_a_name, "label of group A");
    sc_render->add_option("--name-b", render_inputs.group_b_name, "label of group B");
    sc_render->add_option("--start", render_start,
                          "sequence start timestamp (default: first TEST)");
    sc_render->add_option("--leads", render_leads, "lead indices to render (5-min steps)");
    sc_render->add_option("--out", render_out, "report bundle directory")->required();
    add_common(sc_render, common);

    auto* sc_grad = app.add_subcommand("gradcheck",
                                       "finite-difference check of the reference model");
    double grad_tolerance = 1e-4;
    sc_grad->add_option("--tolerance", grad_tolerance, "max relative error allowed");
    add_common(sc_grad, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage: " << e.what() << "\n";
        return 1;
    }

    try {
        Config cfg = load_config(common);
        if (sc_synth->parsed()) run_synth_gen(cfg, synth_out);
        else if (sc_pre->parsed()) run_preprocess(cfg, pre_index, pre_out);
        else if (sc_sample->parsed()) run_sample(cfg, sample_index, sample_out);
        else if (sc_train->parsed()) {
            if (train_seed != 0) cfg.set("unet3d.seed", std::to_string(train_seed));
            run_train(cfg, train_manifest, train_fold, train_eth, train_out, train_log);
        } else if (sc_predict->parsed())
            run_predict(predict_ckpt, predict_manifest, predict_start, predict_out);
        else if (sc_base->parsed())
            run_baseline(cfg, base_manifest, base_start, base_method, base_out);
        else if (sc_verify->parsed())
            run_verify(cfg, verify_manifest, verify_models, verify_out,
                       !verify_no_baselines);
        else if (sc_compare->parsed()) run_compare(cfg, cmp, compare_out);
        else if (sc_render->parsed())
            run_render(cfg, render_manifest, render_inputs, render_start, render_leads,
                       render_out);
        else if (sc_grad->parsed()) run_gradcheck(grad_tolerance);
    } catch (const ConfigError& e) {
        std::cerr << "nowcast: " << e.what() << "\n";
        return 1;
    } catch (const ArgumentError& e) {
        std::cerr << "nowcast: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "nowcast: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "nowcast: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "nowcast: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
