#pragma once

#include "nowcast/gradcheck.hpp"
#include "nowcast/unet3d.hpp"

namespace nowcast {

// Wires a full model into the finite-difference checker: loss is the MSE
// against a fixed target, and the input participates as a checked
// coordinate alongside every parameter.
template <typename S>
class ModelGradCheck {
public:
    ModelGradCheck(UNet3d<S>& model, Tensor<S> input, Tensor<S> target)
        : model_(model), input_(std::move(input)), target_(std::move(target)),
          input_grad_(input_.shape) {}

    GradCheckTarget<S> target() {
        GradCheckTarget<S> t;
        t.loss = [this]() {
            UNetActs<S> acts;
            Tensor<S> out = model_.forward(input_, acts);
            return mse_loss_forward(out, target_);
        };
        t.backward = [this]() {
            model_.zero_grads();
            UNetActs<S> acts;
            Tensor<S> out = model_.forward(input_, acts);
            Tensor<S> grad = mse_loss_backward(out, target_);
            Tensor<S> g = model_.backward(grad, acts, true);
            // keep the registered grad pointer stable
            std::copy(g.data.begin(), g.data.end(), input_grad_.data.begin());
        };
        for (Parameter<S>* p : model_.parameters())
            t.coords.push_back({p->name, p->value.ptr(), p->grad.ptr(), p->value.numel()});
        t.coords.push_back({"input", input_.ptr(), input_grad_.ptr(), input_.numel()});
        return t;
    }

private:
    UNet3d<S>& model_;
    Tensor<S> input_;
    Tensor<S> target_;
    Tensor<S> input_grad_;
};

// The reference tiny configuration used by the gradcheck subcommand and
// the acceptance suite: 2 levels, 4 base channels, both input channels,
// 8x8 spatial extent.
inline ModelConfig reference_tiny_config() {
    ModelConfig config;
    config.in_channels = 2;
    config.levels = 2;
    config.base_channels = 4;
    config.seed = 7;
    return config;
}

template <typename S>
Tensor<S> random_tensor(const std::vector<int>& shape, Rng& rng, double lo = 0.05,
                        double hi = 1.0) {
    Tensor<S> t(shape);
    for (S& v : t.data) v = S(rng.uniform(lo, hi));
    return t;
}

}  // namespace nowcast
