#include "nowcast/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nowcast/baselines.hpp"
#include "nowcast/errors.hpp"
#include "nowcast/num_format.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/preprocess.hpp"

namespace nowcast {

namespace fs = std::filesystem;

namespace {

std::vector<uint64_t> plan_seeds(const ExperimentPlan& plan) {
    if (!plan.seeds.empty()) {
        if (int(plan.seeds.size()) != plan.n_models_per_group)
            throw ConfigError("seed list size " + std::to_string(plan.seeds.size()) +
                              " != n_models_per_group " +
                              std::to_string(plan.n_models_per_group));
        for (size_t i = 0; i < plan.seeds.size(); ++i)
            for (size_t j = i + 1; j < plan.seeds.size(); ++j)
                if (plan.seeds[i] == plan.seeds[j])
                    throw ConfigError("seeds must be distinct");
        return plan.seeds;
    }
    std::vector<uint64_t> seeds;
    for (int i = 0; i < plan.n_models_per_group; ++i) seeds.push_back(uint64_t(i + 1));
    return seeds;
}

}  // namespace

GroupRunResult run_group(const ExperimentPlan& plan, const std::string& group_name,
                         int in_channels) {
    const std::vector<uint64_t> seeds = plan_seeds(plan);
    const SequenceManifest manifest = read_manifest(plan.manifest_path);
    const std::string base_dir = fs::path(plan.manifest_path).parent_path().string();
    const std::string group_dir = (fs::path(plan.out_dir) / group_name).string();
    fs::create_directories(group_dir);

    GroupRunResult result;
    for (int i = 0; i < plan.n_models_per_group; ++i) {
        ModelConfig config = plan.model_template;
        config.in_channels = in_channels;
        config.seed = seeds[size_t(i)];
        TrainDataset<real_t> dataset =
            load_train_dataset<real_t>(manifest, base_dir, i, config);
        UNet3d<real_t> model(config);
        TrainOutcome outcome = train_model(model, dataset, plan.hyper);
        const std::string log_path =
            (fs::path(group_dir) / ("train_log_" + std::to_string(i) + ".csv")).string();
        write_train_log(outcome.log, log_path);
        if (outcome.numeric_failure) {
            result.failures.push_back({i, outcome.failure_message});
            continue;
        }
        const std::string ckpt_path =
            (fs::path(group_dir) / ("ckpt_" + std::to_string(i) + ".unck")).string();
        save_checkpoint(outcome.checkpoint, ckpt_path);
        result.checkpoint_paths.push_back(ckpt_path);
    }
    return result;
}

namespace {

struct SeqEval {
    SampleMetrics sample;
    // [threshold][lead]
    std::vector<std::vector<ContingencyTable>> tables;
    std::vector<std::vector<MetricValue>> prec, rec, ets;
    // [threshold*radius][lead]
    std::vector<std::vector<MetricValue>> fss_vals;
};

struct CurveAccum {
    std::vector<double> sum;
    std::vector<uint64_t> n_defined;
    std::vector<uint64_t> n_undefined;

    explicit CurveAccum(size_t leads) : sum(leads, 0.0), n_defined(leads, 0),
                                        n_undefined(leads, 0) {}
    void add(size_t lead, const MetricValue& v) {
        if (v.defined) {
            sum[lead] += v.value;
            ++n_defined[lead];
        } else {
            ++n_undefined[lead];
        }
    }
    MetricCurve finish(const std::string& metric, double threshold, int radius) const {
        MetricCurve c;
        c.metric = metric;
        c.threshold = threshold;
        c.radius = radius;
        for (size_t lead = 0; lead < sum.size(); ++lead) {
            if (n_defined[lead] > 0)
                c.values.push_back(MetricValue::of(sum[lead] / double(n_defined[lead])));
            else
                c.values.push_back(MetricValue::undefined("undefined for every sample"));
            c.samples.push_back(n_defined[lead]);
            c.undefined.push_back(n_undefined[lead]);
        }
        return c;
    }
};

}  // namespace

ModelEval evaluate_predictor(const Predictor& predict, bool needs_eth,
                             const SequenceManifest& manifest,
                             const std::string& base_dir, const VerifyConfig& vcfg,
                             int in_frames, int out_frames, int jobs) {
    validate_verify_config(vcfg);
    std::vector<const SequenceRecord*> test;
    for (const SequenceRecord& rec : manifest.records)
        if (rec.fold == kFoldTest) test.push_back(&rec);
    if (test.empty()) throw DataError("manifest has no TEST sequences");

    const size_t n_thr = vcfg.categorical_thresholds.size();
    const size_t n_fss = vcfg.fss_thresholds.size() * vcfg.fss_radii.size();
    const int rank_lead = std::min(6, out_frames);

    std::vector<SeqEval> slots(test.size());
    parallel_for(test.size(), jobs, [&](size_t si) {
        const SequenceRecord& rec = *test[si];
        std::vector<GridFrame> rain_in, eth_in, obs;
        for (int i = 0; i < in_frames; ++i)
            rain_in.push_back(read_frame(resolve_path(base_dir, rec.rain_paths[size_t(i)])));
        if (needs_eth)
            for (int i = 0; i < in_frames; ++i)
                eth_in.push_back(read_frame(resolve_path(base_dir, rec.eth_paths[size_t(i)])));
        for (int i = in_frames; i < in_frames + out_frames; ++i)
            obs.push_back(read_frame(resolve_path(base_dir, rec.rain_paths[size_t(i)])));

        const std::vector<GridFrame> pred = predict(rain_in, eth_in);
        if (int(pred.size()) != out_frames)
            throw DataError("predictor returned " + std::to_string(pred.size()) +
                            " frames, expected " + std::to_string(out_frames));

        SeqEval& ev = slots[si];
        ev.sample.start_timestamp = rec.start_timestamp;
        ev.tables.assign(n_thr, std::vector<ContingencyTable>(size_t(out_frames)));
        ev.prec.assign(n_thr, {});
        ev.rec.assign(n_thr, {});
        ev.ets.assign(n_thr, {});
        ev.fss_vals.assign(n_fss, {});

        for (int lead = 0; lead < out_frames; ++lead) {
            ev.sample.per_lead.push_back(pixel_metrics(pred[size_t(lead)], obs[size_t(lead)]));
            for (size_t ti = 0; ti < n_thr; ++ti) {
                ContingencyTable t = contingency(pred[size_t(lead)], obs[size_t(lead)],
                                                 vcfg.categorical_thresholds[ti]);
                ev.tables[ti][size_t(lead)] = t;
                ev.prec[ti].push_back(precision(t));
                ev.rec[ti].push_back(recall(t));
                ev.ets[ti].push_back(equitable_threat_score(t));
            }
            size_t fi = 0;
            for (double thr : vcfg.fss_thresholds) {
                for (int radius : vcfg.fss_radii) {
                    ev.fss_vals[fi].push_back(
                        fss(pred[size_t(lead)], obs[size_t(lead)], thr, radius));
                    ++fi;
                }
            }
        }

        // observed severity at the ranking lead
        const GridFrame& rank_obs = obs[size_t(rank_lead - 1)];
        double max_rain = 0.0, sum = 0.0;
        uint64_t n = 0;
        for (float v : rank_obs.values) {
            if (v == rank_obs.nodata) continue;
            max_rain = std::max(max_rain, double(v));
            sum += double(v);
            ++n;
        }
        ev.sample.obs_max_rain = max_rain;
        ev.sample.obs_mean_rain = n ? sum / double(n) : 0.0;
    });

    // merge in sequence order
    ModelEval out;
    const size_t leads = size_t(out_frames);
    CurveAccum acc_mse(leads), acc_mae(leads), acc_me(leads);
    std::vector<std::vector<ContingencyTable>> pooled(
        n_thr, std::vector<ContingencyTable>(leads));
    std::vector<CurveAccum> acc_prec(n_thr, CurveAccum(leads));
    std::vector<CurveAccum> acc_rec(n_thr, CurveAccum(leads));
    std::vector<CurveAccum> acc_ets(n_thr, CurveAccum(leads));
    std::vector<CurveAccum> acc_fss(n_fss, CurveAccum(leads));

    for (SeqEval& ev : slots) {
        for (size_t lead = 0; lead < leads; ++lead) {
            acc_mse.add(lead, ev.sample.per_lead[lead].mse);
            acc_mae.add(lead, ev.sample.per_lead[lead].mae);
            acc_me.add(lead, ev.sample.per_lead[lead].me);
            for (size_t ti = 0; ti < n_thr; ++ti) {
                pooled[ti][lead] += ev.tables[ti][lead];
                acc_prec[ti].add(lead, ev.prec[ti][lead]);
                acc_rec[ti].add(lead, ev.rec[ti][lead]);
                acc_ets[ti].add(lead, ev.ets[ti][lead]);
            }
            for (size_t fi = 0; fi < n_fss; ++fi) acc_fss[fi].add(lead, ev.fss_vals[fi][lead]);
        }
        out.samples.push_back(std::move(ev.sample));
    }

    out.curves.push_back(acc_mse.finish("mse", -1.0, -1));
    out.curves.push_back(acc_mae.finish("mae", -1.0, -1));
    out.curves.push_back(acc_me.finish("me", -1.0, -1));
    for (size_t ti = 0; ti < n_thr; ++ti) {
        const double thr = vcfg.categorical_thresholds[ti];
        // pooled counts over samples (primary)
        MetricCurve cp, cr, ce;
        cp.metric = "precision";
        cr.metric = "recall";
        ce.metric = "ets";
        cp.threshold = cr.threshold = ce.threshold = thr;
        for (size_t lead = 0; lead < leads; ++lead) {
            cp.values.push_back(precision(pooled[ti][lead]));
            cr.values.push_back(recall(pooled[ti][lead]));
            ce.values.push_back(equitable_threat_score(pooled[ti][lead]));
            for (MetricCurve* c : {&cp, &cr, &ce}) {
                c->samples.push_back(slots.size());
                c->undefined.push_back(0);
            }
        }
        out.curves.push_back(std::move(cp));
        out.curves.push_back(std::move(cr));
        out.curves.push_back(std::move(ce));
        // per-sample means (secondary)
        out.curves.push_back(acc_prec[ti].finish("precision_mean", thr, -1));
        out.curves.push_back(acc_rec[ti].finish("recall_mean", thr, -1));
        out.curves.push_back(acc_ets[ti].finish("ets_mean", thr, -1));
    }
    size_t fi = 0;
    for (double thr : vcfg.fss_thresholds)
        for (int radius : vcfg.fss_radii)
            out.curves.push_back(acc_fss[fi++].finish("fss", thr, radius));
    return out;
}

ModelEval evaluate_checkpoint(const Checkpoint& ckpt, const SequenceManifest& manifest,
                              const std::string& base_dir, const VerifyConfig& vcfg,
                              int jobs) {
    UNet3d<real_t> model(ckpt.config);
    model.load_parameters(ckpt);
    const bool needs_eth = ckpt.config.in_channels == 2;
    Predictor pred = [&model](const std::vector<GridFrame>& rain_in,
                              const std::vector<GridFrame>& eth_in) {
        return predict_with_model(model, rain_in, eth_in);
    };
    return evaluate_predictor(pred, needs_eth, manifest, base_dir, vcfg,
                              ckpt.config.in_frames, ckpt.config.out_frames, jobs);
}

ModelEval evaluate_baseline(const std::string& method, const SequenceManifest& manifest,
                            const std::string& base_dir, const VerifyConfig& vcfg,
                            int in_frames, int out_frames, int jobs) {
    Predictor pred;
    if (method == "persistence") {
        pred = [out_frames](const std::vector<GridFrame>& rain_in,
                            const std::vector<GridFrame>&) {
            return persistence(rain_in.back(), out_frames);
        };
    } else if (method == "advection") {
        pred = [out_frames](const std::vector<GridFrame>& rain_in,
                            const std::vector<GridFrame>&) {
            MotionField motion = estimate_motion(rain_in);
            return extrapolate(rain_in.back(), motion, out_frames);
        };
    } else {
        throw ArgumentError("unknown baseline '" + method +
                            "' (expected persistence or advection)");
    }
    return evaluate_predictor(pred, false, manifest, base_dir, vcfg, in_frames,
                              out_frames, jobs);
}

namespace {

std::string metric_field(double threshold) {
    return threshold < 0.0 ? std::string() : format_double(threshold);
}

std::string radius_field(int radius) {
    return radius < 0 ? std::string() : std::to_string(radius);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t pos = 0;
    for (;;) {
        size_t next = line.find(',', pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
}

}  // namespace

void write_eval_csv(const ModelEval& eval, const std::string& dir,
                    const std::string& prefix) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / (prefix + "_curves.csv"), std::ios::trunc);
        if (!out) throw StorageError("cannot create curves csv in " + dir);
        out << "metric,threshold,radius,lead_min,value,defined,reason,samples,undefined\n";
        for (const MetricCurve& c : eval.curves) {
            for (size_t lead = 0; lead < c.values.size(); ++lead) {
                const MetricValue& v = c.values[lead];
                out << c.metric << ',' << metric_field(c.threshold) << ','
                    << radius_field(c.radius) << ',' << (lead + 1) * 5 << ','
                    << (v.defined ? format_double(v.value) : std::string()) << ','
                    << (v.defined ? 1 : 0) << ',' << v.reason << ',' << c.samples[lead]
                    << ',' << c.undefined[lead] << '\n';
            }
        }
        out.flush();
        if (!out) throw StorageError("write failure in " + dir);
    }
    {
        std::ofstream out(fs::path(dir) / (prefix + "_samples.csv"), std::ios::trunc);
        if (!out) throw StorageError("cannot create samples csv in " + dir);
        out << "start,obs_max30,obs_mean30,lead_min,mse,mae,me,valid\n";
        for (const SampleMetrics& s : eval.samples) {
            for (size_t lead = 0; lead < s.per_lead.size(); ++lead) {
                const PixelMetrics& m = s.per_lead[lead];
                auto cell = [](const MetricValue& v) {
                    return v.defined ? format_double(v.value) : std::string();
                };
                out << s.start_timestamp << ',' << format_double(s.obs_max_rain) << ','
                    << format_double(s.obs_mean_rain) << ',' << (lead + 1) * 5 << ','
                    << cell(m.mse) << ',' << cell(m.mae) << ',' << cell(m.me) << ','
                    << m.valid_pixels << '\n';
            }
        }
        out.flush();
        if (!out) throw StorageError("write failure in " + dir);
    }
}

ModelEval read_eval_csv(const std::string& dir, const std::string& prefix) {
    ModelEval eval;
    const std::string curves_path = (fs::path(dir) / (prefix + "_curves.csv")).string();
    std::ifstream curves(curves_path);
    if (!curves) throw StorageError("cannot open " + curves_path);
    std::string line;
    std::getline(curves, line);  // header
    std::map<std::string, size_t> index;
    while (std::getline(curves, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != 9) throw DataError("bad curves row in " + curves_path);
        const std::string key = f[0] + "|" + f[1] + "|" + f[2];
        auto it = index.find(key);
        if (it == index.end()) {
            MetricCurve c;
            c.metric = f[0];
            c.threshold = f[1].empty() ? -1.0 : std::stod(f[1]);
            c.radius = f[2].empty() ? -1 : std::stoi(f[2]);
            index[key] = eval.curves.size();
            eval.curves.push_back(std::move(c));
            it = index.find(key);
        }
        MetricCurve& c = eval.curves[it->second];
        MetricValue v;
        if (f[5] == "1") {
            v = MetricValue::of(std::stod(f[4]));
        } else {
            v = MetricValue::undefined(f[6]);
        }
        c.values.push_back(std::move(v));
        c.samples.push_back(std::stoull(f[7]));
        c.undefined.push_back(std::stoull(f[8]));
    }

    const std::string samples_path = (fs::path(dir) / (prefix + "_samples.csv")).string();
    std::ifstream samples(samples_path);
    if (!samples) throw StorageError("cannot open " + samples_path);
    std::getline(samples, line);
    std::map<int64_t, size_t> sample_index;
    while (std::getline(samples, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != 8) throw DataError("bad samples row in " + samples_path);
        const int64_t start = std::stoll(f[0]);
        auto it = sample_index.find(start);
        if (it == sample_index.end()) {
            SampleMetrics s;
            s.start_timestamp = start;
            s.obs_max_rain = std::stod(f[1]);
            s.obs_mean_rain = std::stod(f[2]);
            sample_index[start] = eval.samples.size();
            eval.samples.push_back(std::move(s));
            it = sample_index.find(start);
        }
        PixelMetrics m;
        auto cell = [](const std::string& text) {
            return text.empty() ? MetricValue::undefined("undefined")
                                : MetricValue::of(std::stod(text));
        };
        m.mse = cell(f[4]);
        m.mae = cell(f[5]);
        m.me = cell(f[6]);
        m.valid_pixels = std::stoull(f[7]);
        eval.samples[it->second].per_lead.push_back(std::move(m));
    }
    return eval;
}

JointHistogram input_joint_histogram(const SequenceManifest& manifest,
                                     const std::string& base_dir) {
    std::vector<double> dbz_edges, eth_edges;
    for (int e = 0; e <= 60; e += 5) dbz_edges.push_back(double(e));
    for (int e = 0; e <= 16; ++e) eth_edges.push_back(double(e));
    std::vector<GridFrame> dbz_frames, eth_frames;
    for (const SequenceRecord& rec : manifest.records) {
        if (rec.fold != kFoldTest) continue;
        for (int i = 0; i < 4 && i < int(rec.rain_paths.size()); ++i) {
            GridFrame rain = read_frame(resolve_path(base_dir, rec.rain_paths[size_t(i)]));
            dbz_frames.push_back(rain_to_dbz(rain));
            eth_frames.push_back(read_frame(resolve_path(base_dir, rec.eth_paths[size_t(i)])));
        }
    }
    if (dbz_frames.empty()) throw DataError("manifest has no TEST sequences");
    return joint_histogram(dbz_frames, eth_frames, dbz_edges, eth_edges);
}

namespace {

std::vector<ModelEval> read_group_evals(const std::string& dir) {
    std::vector<ModelEval> evals;
    for (int i = 0;; ++i) {
        const std::string prefix = "model_" + std::to_string(i);
        if (!fs::exists(fs::path(dir) / (prefix + "_curves.csv"))) break;
        evals.push_back(read_eval_csv(dir, prefix));
    }
    if (evals.empty())
        throw DataError("no model evaluation CSVs found in " + dir);
    return evals;
}

const MetricCurve* find_curve(const ModelEval& eval, const std::string& metric,
                              double threshold, int radius) {
    for (const MetricCurve& c : eval.curves)
        if (c.metric == metric && c.threshold == threshold && c.radius == radius)
            return &c;
    return nullptr;
}

struct GroupData {
    std::string name;
    std::vector<ModelEval> evals;
};

void write_metric_file(std::ofstream& out, const std::string& group,
                       const AggregateCurve& agg) {
    for (size_t lead = 0; lead < agg.mean.size(); ++lead) {
        out << group << ',' << (lead + 1) * 5 << ','
            << (agg.mean[lead].defined ? format_double(agg.mean[lead].value)
                                       : std::string())
            << ','
            << (agg.stddev[lead].defined ? format_double(agg.stddev[lead].value)
                                         : std::string())
            << ',' << agg.effective_k[lead] << '\n';
    }
}

void write_single_curve(std::ofstream& out, const std::string& group,
                        const MetricCurve& c) {
    for (size_t lead = 0; lead < c.values.size(); ++lead) {
        out << group << ',' << (lead + 1) * 5 << ','
            << (c.values[lead].defined ? format_double(c.values[lead].value)
                                       : std::string())
            << ",,1\n";
    }
}

AggregateCurve aggregate_metric(const GroupData& group, const std::string& metric,
                                double threshold, int radius) {
    std::vector<MetricCurve> curves;
    for (const ModelEval& eval : group.evals) {
        const MetricCurve* c = find_curve(eval, metric, threshold, radius);
        if (!c)
            throw DataError("group " + group.name + " lacks metric " + metric);
        curves.push_back(*c);
    }
    return aggregate_models(curves);
}

}  // namespace

void compare_groups(const CompareInputs& inputs, const VerifyConfig& vcfg,
                    const std::string& out_dir) {
    validate_verify_config(vcfg);
    GroupData a{inputs.group_a_name, read_group_evals(inputs.group_a_dir)};
    GroupData b{inputs.group_b_name, read_group_evals(inputs.group_b_dir)};
    std::vector<std::pair<std::string, ModelEval>> baselines;
    for (const std::string name : {"persistence", "advection"})
        if (fs::exists(fs::path(inputs.group_a_dir) / (name + "_curves.csv")))
            baselines.push_back({name, read_eval_csv(inputs.group_a_dir, name)});

    fs::create_directories(fs::path(out_dir) / "curves");
    fs::create_directories(fs::path(out_dir) / "fss");
    fs::create_directories(fs::path(out_dir) / "diffs");

    std::ostringstream summary;
    summary << "group comparison: " << a.name << " (A) vs " << b.name << " (B)\n";
    summary << "models per group: A=" << a.evals.size() << " B=" << b.evals.size()
            << "\n\n";

    // pixel metrics
    for (const std::string metric : {"mse", "mae", "me"}) {
        std::ofstream out(fs::path(out_dir) / "curves" / (metric + ".csv"),
                          std::ios::trunc);
        if (!out) throw StorageError("cannot create curves/" + metric + ".csv");
        out << "group,lead_min,mean,std,n\n";
        AggregateCurve agg_a = aggregate_metric(a, metric, -1.0, -1);
        AggregateCurve agg_b = aggregate_metric(b, metric, -1.0, -1);
        write_metric_file(out, a.name, agg_a);
        write_metric_file(out, b.name, agg_b);
        for (const auto& [name, eval] : baselines) {
            const MetricCurve* c = find_curve(eval, metric, -1.0, -1);
            if (c) write_single_curve(out, name, *c);
        }
        out.flush();
        if (!out) throw StorageError("write failure in " + out_dir);
        if (metric == "mse") {
            summary << "mean MSE per lead (see curves/mse.csv):\n";
            for (size_t lead : {size_t(5), size_t(11), size_t(17)}) {
                if (lead >= agg_a.mean.size()) continue;
                summary << "  +" << (lead + 1) * 5 << " min: A="
                        << (agg_a.mean[lead].defined
                                ? format_double(agg_a.mean[lead].value)
                                : "undefined")
                        << " B="
                        << (agg_b.mean[lead].defined
                                ? format_double(agg_b.mean[lead].value)
                                : "undefined")
                        << '\n';
            }
            summary << '\n';
        }
    }

    // categorical metrics, pooled counts
    for (const std::string metric : {"precision", "recall", "ets"}) {
        for (double thr : vcfg.categorical_thresholds) {
            const std::string fname = metric + "_t" + format_double(thr) + ".csv";
            std::ofstream out(fs::path(out_dir) / "curves" / fname, std::ios::trunc);
            if (!out) throw StorageError("cannot create curves/" + fname);
            out << "group,lead_min,mean,std,n\n";
            write_metric_file(out, a.name, aggregate_metric(a, metric, thr, -1));
            write_metric_file(out, b.name, aggregate_metric(b, metric, thr, -1));
            for (const auto& [name, eval] : baselines) {
                const MetricCurve* c = find_curve(eval, metric, thr, -1);
                if (c) write_single_curve(out, name, *c);
            }
            out.flush();
            if (!out) throw StorageError("write failure in " + out_dir);
        }
    }

    // FSS matrices at the report leads
    {
        std::ofstream out(fs::path(out_dir) / "fss" / "fss_matrices.csv", std::ios::trunc);
        if (!out) throw StorageError("cannot create fss/fss_matrices.csv");
        out << "group,threshold,radius_px,lead_min,mean,std,n\n";
        auto emit_group = [&](const GroupData& g) {
            for (double thr : vcfg.fss_thresholds) {
                for (int radius : vcfg.fss_radii) {
                    AggregateCurve agg = aggregate_metric(g, "fss", thr, radius);
                    for (int lead_min : vcfg.fss_report_leads_min) {
                        const size_t lead = size_t(lead_min / 5) - 1;
                        if (lead >= agg.mean.size()) continue;
                        out << g.name << ',' << format_double(thr) << ',' << radius << ','
                            << lead_min << ','
                            << (agg.mean[lead].defined
                                    ? format_double(agg.mean[lead].value)
                                    : std::string())
                            << ','
                            << (agg.stddev[lead].defined
                                    ? format_double(agg.stddev[lead].value)
                                    : std::string())
                            << ',' << agg.effective_k[lead] << '\n';
                    }
                }
            }
        };
        emit_group(a);
        emit_group(b);
        for (const auto& [name, eval] : baselines) {
            for (double thr : vcfg.fss_thresholds) {
                for (int radius : vcfg.fss_radii) {
                    const MetricCurve* c = find_curve(eval, "fss", thr, radius);
                    if (!c) continue;
                    for (int lead_min : vcfg.fss_report_leads_min) {
                        const size_t lead = size_t(lead_min / 5) - 1;
                        if (lead >= c->values.size()) continue;
                        out << name << ',' << format_double(thr) << ',' << radius << ','
                            << lead_min << ','
                            << (c->values[lead].defined
                                    ? format_double(c->values[lead].value)
                                    : std::string())
                            << ",,1\n";
                    }
                }
            }
        }
        out.flush();
        if (!out) throw StorageError("write failure in " + out_dir);
    }

    // per-sample differences at the ranking lead
    {
        const size_t lead = size_t(inputs.ranking_lead) - 1;
        std::ofstream out(fs::path(out_dir) / "diffs" / "per_sample.csv", std::ios::trunc);
        if (!out) throw StorageError("cannot create diffs/per_sample.csv");
        out << "start,obs_max30,obs_mean30,d_mse,d_mae,d_me\n";
        const std::vector<SampleMetrics>& ref = a.evals[0].samples;
        double mean_d_mse = 0.0;
        size_t n_rows = 0;
        for (size_t si = 0; si < ref.size(); ++si) {
            auto group_mean = [&](const GroupData& g, auto pick) -> MetricValue {
                double sum = 0.0;
                size_t n = 0;
                for (const ModelEval& eval : g.evals) {
                    if (si >= eval.samples.size() ||
                        eval.samples[si].start_timestamp != ref[si].start_timestamp)
                        throw DataError("sample sets differ between models");
                    const MetricValue& v = pick(eval.samples[si].per_lead[lead]);
                    if (v.defined) {
                        sum += v.value;
                        ++n;
                    }
                }
                if (!n) return MetricValue::undefined("undefined in every model");
                return MetricValue::of(sum / double(n));
            };
            auto diff = [&](auto pick) -> MetricValue {
                MetricValue va = group_mean(a, pick);
                MetricValue vb = group_mean(b, pick);
                if (!va.defined || !vb.defined)
                    return MetricValue::undefined("undefined group mean");
                return MetricValue::of(va.value - vb.value);
            };
            MetricValue d_mse = diff([](const PixelMetrics& m) { return m.mse; });
            MetricValue d_mae = diff([](const PixelMetrics& m) { return m.mae; });
            MetricValue d_me = diff([](const PixelMetrics& m) { return m.me; });
            out << ref[si].start_timestamp << ',' << format_double(ref[si].obs_max_rain)
                << ',' << format_double(ref[si].obs_mean_rain) << ','
                << (d_mse.defined ? format_double(d_mse.value) : std::string()) << ','
                << (d_mae.defined ? format_double(d_mae.value) : std::string()) << ','
                << (d_me.defined ? format_double(d_me.value) : std::string()) << '\n';
            if (d_mse.defined) {
                mean_d_mse += d_mse.value;
                ++n_rows;
            }
        }
        out.flush();
        if (!out) throw StorageError("write failure in " + out_dir);
        if (n_rows) {
            summary << "per-sample MSE difference (A-B) at +" << inputs.ranking_lead * 5
                    << " min: rows in diffs/per_sample.csv, defined=" << n_rows << "\n\n";
        }
    }

    std::ofstream sout(fs::path(out_dir) / "summary.txt", std::ios::trunc);
    if (!sout) throw StorageError("cannot create summary.txt");
    sout << summary.str();
    sout << "report layout: curves/*.csv, fss/fss_matrices.csv, diffs/per_sample.csv\n";
    sout.flush();
    if (!sout) throw StorageError("write failure on summary.txt");
}

RgbColor rain_color(double mmh) {
    // breakpoints: 0.1, 0.5, 1, 2.5, 5, 10, 30 mm/h
    if (mmh < 0.1) return {255, 255, 255};
    if (mmh < 0.5) return {180, 220, 255};
    if (mmh < 1.0) return {110, 170, 255};
    if (mmh < 2.5) return {50, 110, 245};
    if (mmh < 5.0) return {60, 200, 60};
    if (mmh < 10.0) return {255, 230, 50};
    if (mmh < 30.0) return {255, 150, 40};
    return {210, 30, 30};
}

RgbColor eth_color(double km) {
    const double rel = std::clamp(km / 16.0, 0.0, 1.0);
    const uint8_t g = uint8_t(std::lround(rel * 255.0));
    return {g, g, g};
}

void write_ppm(const std::vector<RgbColor>& pixels, uint32_t rows, uint32_t cols,
               const std::string& path) {
    if (pixels.size() != size_t(rows) * cols)
        throw ArgumentError("pixel count does not match image size");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path);
    out << "P6\n" << cols << ' ' << rows << "\n255\n";
    for (const RgbColor& p : pixels) {
        out.put(char(p.r));
        out.put(char(p.g));
        out.put(char(p.b));
    }
    out.flush();
    if (!out) throw StorageError("write failure on " + path);
}

namespace {

double frame_max(const GridFrame& f) {
    double m = 0.0;
    for (float v : f.values)
        if (v != f.nodata) m = std::max(m, double(v));
    return m;
}

void render_rain_panel(const GridFrame& f, const std::string& path) {
    std::vector<RgbColor> px(f.size());
    for (size_t i = 0; i < f.values.size(); ++i) {
        const float v = f.values[i];
        px[i] = (v == f.nodata) ? RgbColor{128, 128, 128} : rain_color(double(v));
    }
    write_ppm(px, f.rows, f.cols, path);
}

// best model = argmax of FSS at 2.5 mm/h, radius 16, +30 min; ties keep
// the lower model index
int select_best_model(const std::vector<ModelEval>& evals) {
    int best = -1;
    double best_score = 0.0;
    for (size_t i = 0; i < evals.size(); ++i) {
        const MetricCurve* c = find_curve(evals[i], "fss", 2.5, 16);
        if (!c)
            throw DataError("model evaluations lack the FSS 2.5 mm/h radius-16 curve "
                            "needed for case selection");
        if (c->values.size() < 6 || !c->values[5].defined) continue;
        const double score = c->values[5].value;
        if (best < 0 || score > best_score) {
            best = int(i);
            best_score = score;
        }
    }
    if (best < 0) throw DataError("no model has a defined selection score");
    return best;
}

}  // namespace

void render_case(const SequenceManifest& manifest, const std::string& base_dir,
                 const CompareInputs& inputs, int64_t start_timestamp,
                 const std::vector<int>& leads, const std::string& out_dir) {
    const SequenceRecord* rec = nullptr;
    for (const SequenceRecord& r : manifest.records)
        if (r.start_timestamp == start_timestamp) rec = &r;
    if (!rec)
        throw DataError("sequence " + std::to_string(start_timestamp) +
                        " not found in manifest");
    if (rec->fold != kFoldTest)
        throw ArgumentError("case sequence must belong to the test set");

    GroupData a{inputs.group_a_name, read_group_evals(inputs.group_a_dir)};
    GroupData b{inputs.group_b_name, read_group_evals(inputs.group_b_dir)};
    const int best_a = select_best_model(a.evals);
    const int best_b = select_best_model(b.evals);
    const Checkpoint ckpt_a = load_checkpoint(
        (fs::path(inputs.group_a_dir) / ("ckpt_" + std::to_string(best_a) + ".unck"))
            .string());
    const Checkpoint ckpt_b = load_checkpoint(
        (fs::path(inputs.group_b_dir) / ("ckpt_" + std::to_string(best_b) + ".unck"))
            .string());

    const int in_frames = ckpt_a.config.in_frames;
    std::vector<GridFrame> rain_in, eth_in_a, eth_in_b, eth_frames;
    for (int i = 0; i < in_frames; ++i) {
        rain_in.push_back(read_frame(resolve_path(base_dir, rec->rain_paths[size_t(i)])));
        eth_frames.push_back(read_frame(resolve_path(base_dir, rec->eth_paths[size_t(i)])));
    }
    if (ckpt_a.config.in_channels == 2) eth_in_a = eth_frames;
    if (ckpt_b.config.in_channels == 2) eth_in_b = eth_frames;

    const std::vector<GridFrame> pred_a = predict_sequence(ckpt_a, rain_in, eth_in_a);
    const std::vector<GridFrame> pred_b = predict_sequence(ckpt_b, rain_in, eth_in_b);

    const std::string case_dir =
        (fs::path(out_dir) / "cases" / std::to_string(start_timestamp)).string();
    fs::create_directories(case_dir);

    std::ofstream csv(fs::path(case_dir) / "panels.csv", std::ios::trunc);
    if (!csv) throw StorageError("cannot create panels.csv");
    csv << "panel,lead_min,max_rain\n";

    for (int lead : leads) {
        if (lead < 1 || lead > int(pred_a.size()))
            throw DataError("lead " + std::to_string(lead) + " outside forecast range");
        const int obs_idx = in_frames + lead - 1;
        if (obs_idx >= int(rec->rain_paths.size()))
            throw DataError("lead " + std::to_string(lead) + " outside the sequence");
        const GridFrame obs =
            read_frame(resolve_path(base_dir, rec->rain_paths[size_t(obs_idx)]));
        const GridFrame& fa = pred_a[size_t(lead) - 1];
        const GridFrame& fb = pred_b[size_t(lead) - 1];
        const int lead_min = lead * 5;
        render_rain_panel(obs, (fs::path(case_dir) /
                                ("obs_t+" + std::to_string(lead_min) + ".ppm"))
                                   .string());
        render_rain_panel(fa, (fs::path(case_dir) /
                               (a.name + "_t+" + std::to_string(lead_min) + ".ppm"))
                                  .string());
        render_rain_panel(fb, (fs::path(case_dir) /
                               (b.name + "_t+" + std::to_string(lead_min) + ".ppm"))
                                  .string());
        csv << "obs," << lead_min << ',' << format_double(frame_max(obs)) << '\n';
        csv << a.name << ',' << lead_min << ',' << format_double(frame_max(fa)) << '\n';
        csv << b.name << ',' << lead_min << ',' << format_double(frame_max(fb)) << '\n';
    }

    // last ETH input frame, grayscale with 16 km mapping to white
    const GridFrame& eth_last = eth_frames.back();
    std::vector<RgbColor> px(eth_last.size());
    for (size_t i = 0; i < eth_last.values.size(); ++i) {
        const float v = eth_last.values[i];
        px[i] = (v == eth_last.nodata) ? RgbColor{255, 0, 0} : eth_color(double(v));
    }
    write_ppm(px, eth_last.rows, eth_last.cols,
              (fs::path(case_dir) / "eth_input.ppm").string());
    csv << "eth_input,0," << format_double(frame_max(eth_last)) << '\n';
    csv.flush();
    if (!csv) throw StorageError("write failure on panels.csv");
}

}  // namespace nowcast
