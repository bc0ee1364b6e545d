#pragma once

// Single-pass 3D U-Net: encoder/decoder with spatial pooling only (time is
// never pooled; with 4 input frames, halving it would destroy the temporal
// structure), a time-collapsing head that emits all 18 lead times at once,
// and a deterministic training loop with early stopping and plateau-based
// learning-rate reduction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "nowcast/adam.hpp"
#include "nowcast/gridio.hpp"
#include "nowcast/nn_ops.hpp"
#include "nowcast/real.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

enum class RainTransform : uint8_t { Raw = 0, Log1p = 1 };

struct ModelConfig {
    int in_channels = 1;  // 1 = rain only, 2 = rain + ETH
    int in_frames = 4;
    int out_frames = 18;
    int levels = 3;
    int base_channels = 8;
    int kernel = 3;
    uint64_t seed = 1;
    RainTransform rain_transform = RainTransform::Raw;
    double eth_scale = 16.0;  // km; physical ETH maximum
};

void validate_model_config(const ModelConfig& config);

struct CheckpointParam {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

// On-disk "UNCK" checkpoint payload; parameter values are always 32-bit.
struct Checkpoint {
    ModelConfig config;
    std::vector<CheckpointParam> params;
    uint64_t steps = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string serialize_model_config(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text);

template <typename S>
struct Conv3dLayer {
    Parameter<S> weight;
    Parameter<S> bias;
    int pt = 0, ph = 0, pw = 0;

    Conv3dLayer() = default;
    Conv3dLayer(const std::string& name, int out_ch, int in_ch, int kt, int kh, int kw,
                int pt_, int ph_, int pw_)
        : weight(name + ".weight", {out_ch, in_ch, kt, kh, kw}),
          bias(name + ".bias", {out_ch}), pt(pt_), ph(ph_), pw(pw_) {}

    Tensor<S> apply(const Tensor<S>& x) const {
        return conv3d_forward_padded(x, weight.value, bias.value, pt, ph, pw);
    }
};

// Saved intermediates of one forward pass, consumed by backward().
template <typename S>
struct UNetActs {
    std::vector<Tensor<S>> enc_in1, enc_z1, enc_a1, enc_z2, enc_a2;
    std::vector<std::vector<uint8_t>> pool_argmax;      // index = level, valid for level>0
    std::vector<std::vector<int>> pool_in_shape;
    std::vector<Tensor<S>> dec_up, dec_cat, dec_z1, dec_a1, dec_z2, dec_a2;
    Tensor<S> head_z;      // [B,out_frames,1,H,W]
    Tensor<S> head_relu;
    Tensor<S> output;      // [B,out_frames,H,W]
};

template <typename S>
class UNet3d {
public:
    explicit UNet3d(const ModelConfig& config) : config_(config) {
        validate_model_config(config);
        const int k = config.kernel, p = k / 2;
        int prev_ch = config.in_channels;
        for (int level = 0; level < config.levels; ++level) {
            const int ch = config.base_channels << level;
            const std::string tag = "enc" + std::to_string(level + 1);
            enc_.emplace_back();
            enc_.back().conv1 = Conv3dLayer<S>(tag + ".conv1", ch, prev_ch, k, k, k, p, p, p);
            enc_.back().conv2 = Conv3dLayer<S>(tag + ".conv2", ch, ch, k, k, k, p, p, p);
            prev_ch = ch;
        }
        for (int s = 0; s < config.levels - 1; ++s) {
            const int level = config.levels - 2 - s;
            const int up_ch = config.base_channels << (level + 1);
            const int skip_ch = config.base_channels << level;
            const int ch = skip_ch;
            const std::string tag = "dec" + std::to_string(level + 1);
            dec_.emplace_back();
            dec_.back().conv1 =
                Conv3dLayer<S>(tag + ".conv1", ch, up_ch + skip_ch, k, k, k, p, p, p);
            dec_.back().conv2 = Conv3dLayer<S>(tag + ".conv2", ch, ch, k, k, k, p, p, p);
        }
        head_ = Conv3dLayer<S>("head", config.out_frames, config.base_channels,
                               config.in_frames, 1, 1, 0, 0, 0);
        init_parameters();
    }

    const ModelConfig& config() const { return config_; }

    std::vector<Parameter<S>*> parameters() {
        std::vector<Parameter<S>*> out;
        for (auto& block : enc_) {
            out.push_back(&block.conv1.weight);
            out.push_back(&block.conv1.bias);
            out.push_back(&block.conv2.weight);
            out.push_back(&block.conv2.bias);
        }
        for (auto& block : dec_) {
            out.push_back(&block.conv1.weight);
            out.push_back(&block.conv1.bias);
            out.push_back(&block.conv2.weight);
            out.push_back(&block.conv2.bias);
        }
        out.push_back(&head_.weight);
        out.push_back(&head_.bias);
        return out;
    }

    void zero_grads() {
        for (Parameter<S>* p : parameters()) p->zero_grad();
    }

    Tensor<S> forward(const Tensor<S>& input, UNetActs<S>& acts) const {
        if (input.shape.size() != 5 || input.shape[1] != config_.in_channels ||
            input.shape[2] != config_.in_frames)
            throw ArgumentError("model input must be [B," +
                                std::to_string(config_.in_channels) + "," +
                                std::to_string(config_.in_frames) + ",H,W], got " +
                                shape_str(input.shape));
        const int div = 1 << (config_.levels - 1);
        if (input.shape[3] % div || input.shape[4] % div)
            throw ConfigError("spatial extent " + std::to_string(input.shape[3]) + "x" +
                              std::to_string(input.shape[4]) +
                              " not divisible by 2^(levels-1)=" + std::to_string(div));

        const int L = config_.levels;
        acts = UNetActs<S>{};
        acts.pool_argmax.resize(size_t(L));
        acts.pool_in_shape.resize(size_t(L));

        Tensor<S> x = input;
        for (int level = 0; level < L; ++level) {
            if (level > 0) {
                acts.pool_in_shape[size_t(level)] = x.shape;
                auto pooled = maxpool2_spatial_forward(x);
                acts.pool_argmax[size_t(level)] = std::move(pooled.argmax);
                x = std::move(pooled.output);
            }
            acts.enc_in1.push_back(x);
            Tensor<S> z1 = enc_[size_t(level)].conv1.apply(x);
            check_finite(z1, enc_[size_t(level)].conv1.weight.name);
            Tensor<S> a1 = relu_forward(z1);
            Tensor<S> z2 = enc_[size_t(level)].conv2.apply(a1);
            check_finite(z2, enc_[size_t(level)].conv2.weight.name);
            Tensor<S> a2 = relu_forward(z2);
            acts.enc_z1.push_back(std::move(z1));
            acts.enc_a1.push_back(std::move(a1));
            acts.enc_z2.push_back(std::move(z2));
            x = a2;
            acts.enc_a2.push_back(std::move(a2));
        }

        for (size_t s = 0; s < dec_.size(); ++s) {
            const size_t level = size_t(L) - 2 - s;
            Tensor<S> up = upsample2_nearest(x);
            Tensor<S> cat = concat_channels(up, acts.enc_a2[level]);
            acts.dec_up.push_back(std::move(up));
            Tensor<S> z1 = dec_[s].conv1.apply(cat);
            check_finite(z1, dec_[s].conv1.weight.name);
            acts.dec_cat.push_back(std::move(cat));
            Tensor<S> a1 = relu_forward(z1);
            Tensor<S> z2 = dec_[s].conv2.apply(a1);
            check_finite(z2, dec_[s].conv2.weight.name);
            Tensor<S> a2 = relu_forward(z2);
            acts.dec_z1.push_back(std::move(z1));
            acts.dec_a1.push_back(std::move(a1));
            acts.dec_z2.push_back(std::move(z2));
            x = a2;
            acts.dec_a2.push_back(std::move(a2));
        }

        acts.head_z = head_.apply(x);  // [B,out,1,H,W]
        check_finite(acts.head_z, "head");
        acts.head_relu = relu_forward(acts.head_z);

        Tensor<S> out;
        out.shape = {acts.head_relu.shape[0], acts.head_relu.shape[1],
                     acts.head_relu.shape[3], acts.head_relu.shape[4]};
        out.data = acts.head_relu.data;
        if (config_.rain_transform == RainTransform::Log1p) {
            for (S& v : out.data) v = S(std::expm1(double(v)));
            check_finite(out, "output inverse transform");
        }
        acts.output = out;
        return out;
    }

    // Fills parameter gradients (accumulating); returns grad wrt the model
    // input when requested, otherwise an empty tensor.
    Tensor<S> backward(const Tensor<S>& grad_output, const UNetActs<S>& acts,
                       bool need_input_grad = false) {
        const int L = config_.levels;
        Tensor<S> g;  // grad at head_relu, shape [B,out,1,H,W]
        g.shape = acts.head_relu.shape;
        g.data = grad_output.data;
        if (config_.rain_transform == RainTransform::Log1p) {
            // output = expm1(head_relu)
            for (size_t i = 0; i < g.data.size(); ++i)
                g.data[i] *= S(std::exp(double(acts.head_relu.data[i])));
        }
        g = relu_backward(g, acts.head_z);

        const Tensor<S>& head_in = dec_.empty() ? acts.enc_a2[size_t(L) - 1]
                                                : acts.dec_a2[dec_.size() - 1];
        auto hg = conv3d_backward_padded(g, head_in, head_.weight.value, head_.pt,
                                         head_.ph, head_.pw);
        accumulate(head_.weight.grad, hg.grad_weight);
        accumulate(head_.bias.grad, hg.grad_bias);
        g = std::move(hg.grad_input);

        std::vector<Tensor<S>> grad_enc(static_cast<size_t>(L));
        for (size_t si = dec_.size(); si-- > 0;) {
            const size_t level = size_t(L) - 2 - si;
            g = relu_backward(g, acts.dec_z2[si]);
            auto g2 = conv3d_backward_padded(g, acts.dec_a1[si], dec_[si].conv2.weight.value,
                                             dec_[si].conv2.pt, dec_[si].conv2.ph,
                                             dec_[si].conv2.pw);
            accumulate(dec_[si].conv2.weight.grad, g2.grad_weight);
            accumulate(dec_[si].conv2.bias.grad, g2.grad_bias);
            g = relu_backward(g2.grad_input, acts.dec_z1[si]);
            auto g1 = conv3d_backward_padded(g, acts.dec_cat[si], dec_[si].conv1.weight.value,
                                             dec_[si].conv1.pt, dec_[si].conv1.ph,
                                             dec_[si].conv1.pw);
            accumulate(dec_[si].conv1.weight.grad, g1.grad_weight);
            accumulate(dec_[si].conv1.bias.grad, g1.grad_bias);
            Tensor<S> g_up, g_skip;
            split_channels_backward(g1.grad_input, acts.dec_up[si].shape[1], g_up, g_skip);
            if (grad_enc[level].data.empty())
                grad_enc[level] = std::move(g_skip);
            else
                accumulate(grad_enc[level], g_skip);
            const std::vector<int>& src_shape =
                si == 0 ? acts.enc_a2[size_t(L) - 1].shape : acts.dec_a2[si - 1].shape;
            g = upsample2_nearest_backward(g_up, src_shape);
        }

        // g now holds the grad at the bottom encoder output
        if (grad_enc[size_t(L) - 1].data.empty())
            grad_enc[size_t(L) - 1] = std::move(g);
        else
            accumulate(grad_enc[size_t(L) - 1], g);

        Tensor<S> input_grad;
        for (size_t level = size_t(L); level-- > 0;) {
            Tensor<S> ge = std::move(grad_enc[level]);
            ge = relu_backward(ge, acts.enc_z2[level]);
            auto g2 = conv3d_backward_padded(ge, acts.enc_a1[level],
                                             enc_[level].conv2.weight.value,
                                             enc_[level].conv2.pt, enc_[level].conv2.ph,
                                             enc_[level].conv2.pw);
            accumulate(enc_[level].conv2.weight.grad, g2.grad_weight);
            accumulate(enc_[level].conv2.bias.grad, g2.grad_bias);
            ge = relu_backward(g2.grad_input, acts.enc_z1[level]);
            const bool need_in = level > 0 || need_input_grad;
            auto g1 = conv3d_backward_padded(ge, acts.enc_in1[level],
                                             enc_[level].conv1.weight.value,
                                             enc_[level].conv1.pt, enc_[level].conv1.ph,
                                             enc_[level].conv1.pw, need_in);
            accumulate(enc_[level].conv1.weight.grad, g1.grad_weight);
            accumulate(enc_[level].conv1.bias.grad, g1.grad_bias);
            if (level > 0) {
                Tensor<S> gp = maxpool2_spatial_backward(
                    g1.grad_input, acts.pool_argmax[level], acts.pool_in_shape[level]);
                if (grad_enc[level - 1].data.empty())
                    grad_enc[level - 1] = std::move(gp);
                else
                    accumulate(grad_enc[level - 1], gp);
            } else if (need_input_grad) {
                input_grad = std::move(g1.grad_input);
            }
        }
        return input_grad;
    }

    Checkpoint to_checkpoint(uint64_t steps) {
        Checkpoint ckpt;
        ckpt.config = config_;
        ckpt.steps = steps;
        for (Parameter<S>* p : parameters()) {
            CheckpointParam cp;
            cp.name = p->name;
            cp.shape = p->value.shape;
            cp.values.resize(p->value.numel());
            for (size_t i = 0; i < cp.values.size(); ++i)
                cp.values[i] = float(p->value.data[i]);
            ckpt.params.push_back(std::move(cp));
        }
        return ckpt;
    }

    void load_parameters(const Checkpoint& ckpt) {
        auto params = parameters();
        if (params.size() != ckpt.params.size())
            throw DataError("checkpoint has " + std::to_string(ckpt.params.size()) +
                            " parameters, model expects " + std::to_string(params.size()));
        for (size_t i = 0; i < params.size(); ++i) {
            const CheckpointParam& cp = ckpt.params[i];
            if (cp.name != params[i]->name || cp.shape != params[i]->value.shape)
                throw DataError("checkpoint parameter " + cp.name +
                                " does not match model parameter " + params[i]->name);
            for (size_t j = 0; j < cp.values.size(); ++j)
                params[i]->value.data[j] = S(cp.values[j]);
        }
    }

private:
    struct Block {
        Conv3dLayer<S> conv1, conv2;
    };

    void init_parameters() {
        Rng rng(config_.seed);
        for (Parameter<S>* p : parameters()) {
            if (p->value.shape.size() == 5) {
                const auto& s = p->value.shape;
                const double fan_in = double(s[1]) * s[2] * s[3] * s[4];
                const double limit = std::sqrt(6.0 / fan_in);
                for (S& v : p->value.data) v = S(rng.uniform(-limit, limit));
            }
            // biases stay zero
        }
    }

    static void accumulate(Tensor<S>& into, const Tensor<S>& from) {
        for (size_t i = 0; i < into.data.size(); ++i) into.data[i] += from.data[i];
    }

    ModelConfig config_;
    std::vector<Block> enc_;
    std::vector<Block> dec_;
    Conv3dLayer<S> head_;
};

// ---------------------------------------------------------------------------
// Data assembly and training

// Builds the normalized [C, in_frames, H, W] input from the first 4 rain
// (and optionally ETH) frames. nodata pixels enter as 0.
template <typename S>
Tensor<S> assemble_input(const std::vector<GridFrame>& rain,
                         const std::vector<GridFrame>& eth, const ModelConfig& config) {
    if (int(rain.size()) != config.in_frames)
        throw ArgumentError("expected " + std::to_string(config.in_frames) +
                            " input rain frames, got " + std::to_string(rain.size()));
    if (config.in_channels == 2 && int(eth.size()) != config.in_frames)
        throw ArgumentError("model takes an ETH channel but " +
                            std::to_string(eth.size()) + " ETH frames were supplied");
    if (config.in_channels == 1 && !eth.empty())
        throw ArgumentError("model without ETH channel was fed ETH frames");
    const uint32_t rows = rain[0].rows, cols = rain[0].cols;
    Tensor<S> x({1, config.in_channels, config.in_frames, int(rows), int(cols)});
    const size_t plane = size_t(rows) * cols;
    for (int t = 0; t < config.in_frames; ++t) {
        const GridFrame& f = rain[size_t(t)];
        if (f.rows != rows || f.cols != cols)
            throw ArgumentError("input frames differ in geometry");
        S* dst = x.ptr() + size_t(t) * plane;
        for (size_t i = 0; i < plane; ++i) {
            float v = f.values[i];
            double r = (v == f.nodata) ? 0.0 : double(v);
            dst[i] = config.rain_transform == RainTransform::Log1p ? S(std::log1p(r)) : S(r);
        }
    }
    if (config.in_channels == 2) {
        for (int t = 0; t < config.in_frames; ++t) {
            const GridFrame& f = eth[size_t(t)];
            if (f.rows != rows || f.cols != cols)
                throw ArgumentError("input frames differ in geometry");
            S* dst = x.ptr() + (plane * size_t(config.in_frames)) + size_t(t) * plane;
            for (size_t i = 0; i < plane; ++i) {
                float v = f.values[i];
                dst[i] = (v == f.nodata) ? S(0) : S(double(v) / config.eth_scale);
            }
        }
    }
    return x;
}

// Raw rain targets, [out_frames, H, W].
template <typename S>
Tensor<S> assemble_target(const std::vector<GridFrame>& rain, const ModelConfig& config) {
    if (int(rain.size()) != config.out_frames)
        throw ArgumentError("expected " + std::to_string(config.out_frames) +
                            " target frames, got " + std::to_string(rain.size()));
    const uint32_t rows = rain[0].rows, cols = rain[0].cols;
    Tensor<S> y({config.out_frames, int(rows), int(cols)});
    const size_t plane = size_t(rows) * cols;
    for (int t = 0; t < config.out_frames; ++t) {
        S* dst = y.ptr() + size_t(t) * plane;
        const GridFrame& f = rain[size_t(t)];
        for (size_t i = 0; i < plane; ++i) {
            float v = f.values[i];
            dst[i] = (v == f.nodata) ? S(0) : S(v);
        }
    }
    return y;
}

template <typename S>
struct TrainSample {
    Tensor<S> input;   // [1,C,T,H,W]
    Tensor<S> target;  // [out_frames,H,W]
};

template <typename S>
struct TrainDataset {
    std::vector<TrainSample<S>> train;
    std::vector<TrainSample<S>> val;
};

struct HyperParams {
    double lr = 1e-3;
    int batch = 2;
    int max_epochs = 50;
    int patience_early = 8;    // validation rounds without improvement
    int plateau_patience = 3;  // rounds before a learning-rate cut
    double plateau_factor = 0.5;
    int val_every = 1;         // epochs per validation round
};

struct TrainLogRow {
    int round;
    int epoch;
    double train_mse;
    double val_mse;
    double lr;
};

struct TrainOutcome {
    Checkpoint checkpoint;  // best-validation parameters
    std::vector<TrainLogRow> log;
    bool numeric_failure = false;
    std::string failure_message;
};

void write_train_log(const std::vector<TrainLogRow>& log, const std::string& path);

// Loads the sequences of one fold split into memory. Sequences labeled
// `fold` become the validation set; TEST sequences are excluded.
template <typename S>
TrainDataset<S> load_train_dataset(const SequenceManifest& manifest,
                                   const std::string& base_dir, int fold,
                                   const ModelConfig& config) {
    TrainDataset<S> ds;
    for (const SequenceRecord& rec : manifest.records) {
        if (rec.fold == kFoldTest) continue;
        std::vector<GridFrame> rain_in, eth_in, rain_out;
        for (int i = 0; i < config.in_frames; ++i)
            rain_in.push_back(read_frame(resolve_path(base_dir, rec.rain_paths[size_t(i)])));
        if (config.in_channels == 2)
            for (int i = 0; i < config.in_frames; ++i)
                eth_in.push_back(read_frame(resolve_path(base_dir, rec.eth_paths[size_t(i)])));
        for (int i = config.in_frames; i < config.in_frames + config.out_frames; ++i)
            rain_out.push_back(read_frame(resolve_path(base_dir, rec.rain_paths[size_t(i)])));
        TrainSample<S> sample;
        sample.input = assemble_input<S>(rain_in, eth_in, config);
        sample.target = assemble_target<S>(rain_out, config);
        (rec.fold == fold ? ds.val : ds.train).push_back(std::move(sample));
    }
    return ds;
}

template <typename S>
std::pair<Tensor<S>, Tensor<S>> stack_batch(const std::vector<TrainSample<S>>& samples,
                                            const std::vector<size_t>& idxs) {
    const auto& first = samples[idxs[0]];
    std::vector<int> in_shape = first.input.shape;
    in_shape[0] = int(idxs.size());
    std::vector<int> tgt_shape = {int(idxs.size()), first.target.shape[0],
                                  first.target.shape[1], first.target.shape[2]};
    Tensor<S> input(in_shape);
    Tensor<S> target(tgt_shape);
    const size_t in_sz = first.input.numel();
    const size_t tgt_sz = first.target.numel();
    for (size_t b = 0; b < idxs.size(); ++b) {
        std::copy(samples[idxs[b]].input.data.begin(), samples[idxs[b]].input.data.end(),
                  input.data.begin() + std::ptrdiff_t(b * in_sz));
        std::copy(samples[idxs[b]].target.data.begin(), samples[idxs[b]].target.data.end(),
                  target.data.begin() + std::ptrdiff_t(b * tgt_sz));
    }
    return {std::move(input), std::move(target)};
}

// Deterministic training run: (seed, config, data, hyper) fully determine
// the returned checkpoint. Returns the best-validation parameters.
template <typename S>
TrainOutcome train_model(UNet3d<S>& model, const TrainDataset<S>& dataset,
                         const HyperParams& hyper) {
    if (dataset.train.empty()) throw ConfigError("training set is empty");
    if (dataset.val.empty()) throw ConfigError("validation fold is empty");
    if (hyper.batch < 1 || hyper.max_epochs < 1 || hyper.val_every < 1)
        throw ConfigError("bad training hyperparameters");

    auto params = model.parameters();
    AdamState<S> state(params);
    Rng shuffle_rng(model.config().seed ^ 0x73687566ULL);

    TrainOutcome outcome;
    double best_val = std::numeric_limits<double>::infinity();
    bool have_best = false;
    int rounds_since_best = 0;
    int plateau_rounds = 0;
    int round = 0;
    double lr = hyper.lr;
    uint64_t steps = 0;

    auto validate = [&]() {
        double total = 0.0;
        for (const TrainSample<S>& s : dataset.val) {
            UNetActs<S> acts;
            Tensor<S> out = model.forward(s.input, acts);
            Tensor<S> tgt;
            tgt.shape = out.shape;
            tgt.data = s.target.data;
            total += mse_loss_forward(out, tgt);
        }
        return total / double(dataset.val.size());
    };

    std::vector<size_t> order(dataset.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    try {
        for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
            shuffle_vec(order, shuffle_rng);
            double loss_sum = 0.0;
            size_t seen = 0;
            for (size_t pos = 0; pos < order.size(); pos += size_t(hyper.batch)) {
                std::vector<size_t> idxs(
                    order.begin() + std::ptrdiff_t(pos),
                    order.begin() + std::ptrdiff_t(std::min(pos + size_t(hyper.batch),
                                                            order.size())));
                auto [input, target] = stack_batch(dataset.train, idxs);
                UNetActs<S> acts;
                Tensor<S> out = model.forward(input, acts);
                double loss = mse_loss_forward(out, target);
                Tensor<S> grad = mse_loss_backward(out, target);
                model.zero_grads();
                model.backward(grad, acts, false);
                AdamConfig acfg;
                acfg.lr = lr;
                adam_step(params, state, acfg);
                ++steps;
                loss_sum += loss * double(idxs.size());
                seen += idxs.size();
            }
            if (epoch % hyper.val_every != 0) continue;

            const double val = validate();
            ++round;
            outcome.log.push_back({round, epoch, loss_sum / double(seen), val, lr});
            if (val < best_val) {
                best_val = val;
                outcome.checkpoint = model.to_checkpoint(steps);
                have_best = true;
                rounds_since_best = 0;
                plateau_rounds = 0;
            } else {
                ++rounds_since_best;
                ++plateau_rounds;
                if (plateau_rounds >= std::max(hyper.plateau_patience, 1)) {
                    lr *= hyper.plateau_factor;
                    plateau_rounds = 0;
                }
                if (rounds_since_best >= std::max(hyper.patience_early, 1)) break;
            }
        }
    } catch (const NumericError& err) {
        outcome.numeric_failure = true;
        outcome.failure_message = err.what();
    }
    if (!have_best) outcome.checkpoint = model.to_checkpoint(steps);
    return outcome;
}

// Runs one forward pass of a checkpointed model on a sequence's input
// frames and emits the 18 predicted rain frames at t+300*k.
std::vector<GridFrame> predict_sequence(const Checkpoint& ckpt,
                                        const std::vector<GridFrame>& rain_in,
                                        const std::vector<GridFrame>& eth_in);

// Same, reusing an already-built model (evaluation loops).
std::vector<GridFrame> predict_with_model(const UNet3d<real_t>& model,
                                          const std::vector<GridFrame>& rain_in,
                                          const std::vector<GridFrame>& eth_in);

}  // namespace nowcast
