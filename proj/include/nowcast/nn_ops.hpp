#pragma once

// Forward and backward kernels for the 3D U-Net. All loops run in a fixed
// order (channel, then dt, dh, dw for convolution taps) so results are
// bitwise reproducible run to run. Inner loops are plain strided passes
// over the fastest axis; the compiler vectorizes them.

#include <cstdint>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

template <typename S>
struct Conv3dGrads {
    Tensor<S> grad_input;
    Tensor<S> grad_weight;
    Tensor<S> grad_bias;
};

namespace detail {

template <typename S>
void conv3d_check_shapes(const Tensor<S>& input, const Tensor<S>& weight,
                         const Tensor<S>& bias, int pt, int ph, int pw) {
    if (input.shape.size() != 5)
        throw ArgumentError("conv3d input must be [B,C,T,H,W], got " +
                            shape_str(input.shape));
    if (weight.shape.size() != 5)
        throw ArgumentError("conv3d weight must be [Cout,Cin,kt,kh,kw], got " +
                            shape_str(weight.shape));
    if (bias.shape.size() != 1 || bias.shape[0] != weight.shape[0])
        throw ArgumentError("conv3d bias must be [Cout]");
    if (weight.shape[1] != input.shape[1])
        throw ArgumentError("conv3d channel mismatch: input has " +
                            std::to_string(input.shape[1]) + ", weight expects " +
                            std::to_string(weight.shape[1]));
    int kt = weight.shape[2], kh = weight.shape[3], kw = weight.shape[4];
    if (input.shape[2] + 2 * pt - kt + 1 <= 0 || input.shape[3] + 2 * ph - kh + 1 <= 0 ||
        input.shape[4] + 2 * pw - kw + 1 <= 0)
        throw ArgumentError("conv3d kernel larger than padded input");
}

}  // namespace detail

// General stride-1 3D convolution with explicit zero padding.
// out[b,o,t,h,w] = bias[o]
//   + sum_{c,dt,dh,dw} input[b,c,t+dt-pt,h+dh-ph,w+dw-pw] * weight[o,c,dt,dh,dw]
// with out-of-range input treated as zero.
template <typename S>
Tensor<S> conv3d_forward_padded(const Tensor<S>& input, const Tensor<S>& weight,
                                const Tensor<S>& bias, int pt, int ph, int pw) {
    detail::conv3d_check_shapes(input, weight, bias, pt, ph, pw);
    const int B = input.shape[0], C = input.shape[1];
    const int T = input.shape[2], H = input.shape[3], W = input.shape[4];
    const int O = weight.shape[0];
    const int kt = weight.shape[2], kh = weight.shape[3], kw = weight.shape[4];
    const int To = T + 2 * pt - kt + 1;
    const int Ho = H + 2 * ph - kh + 1;
    const int Wo = W + 2 * pw - kw + 1;

    Tensor<S> out({B, O, To, Ho, Wo});
    const size_t in_plane = size_t(T) * H * W;
    const size_t out_plane = size_t(To) * Ho * Wo;

    for (int b = 0; b < B; ++b) {
        for (int o = 0; o < O; ++o) {
            S* op = out.ptr() + (size_t(b) * O + size_t(o)) * out_plane;
            const S bias_o = bias.data[size_t(o)];
            for (size_t i = 0; i < out_plane; ++i) op[i] = bias_o;
            for (int c = 0; c < C; ++c) {
                const S* ip = input.ptr() + (size_t(b) * C + size_t(c)) * in_plane;
                const S* wp = weight.ptr() +
                              ((size_t(o) * C + size_t(c)) * size_t(kt)) * size_t(kh) * kw;
                for (int dt = 0; dt < kt; ++dt) {
                    const int t_lo = std::max(0, pt - dt);
                    const int t_hi = std::min(To, T + pt - dt);
                    for (int dh = 0; dh < kh; ++dh) {
                        const int h_lo = std::max(0, ph - dh);
                        const int h_hi = std::min(Ho, H + ph - dh);
                        for (int dw = 0; dw < kw; ++dw) {
                            const S wgt = wp[(size_t(dt) * kh + size_t(dh)) * size_t(kw) + size_t(dw)];
                            const int w_lo = std::max(0, pw - dw);
                            const int w_hi = std::min(Wo, W + pw - dw);
                            if (w_lo >= w_hi) continue;
                            const int in_w_off = dw - pw;
                            for (int t = t_lo; t < t_hi; ++t) {
                                const int ti = t + dt - pt;
                                for (int h = h_lo; h < h_hi; ++h) {
                                    const int hi = h + dh - ph;
                                    S* __restrict__ orow = op + (size_t(t) * Ho + size_t(h)) * Wo;
                                    const S* __restrict__ irow =
                                        ip + (size_t(ti) * H + size_t(hi)) * W + in_w_off;
                                    for (int w = w_lo; w < w_hi; ++w)
                                        orow[w] += wgt * irow[w];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Spec'd "same" convolution: odd kernel extents, padding k/2 per axis.
template <typename S>
Tensor<S> conv3d_forward(const Tensor<S>& input, const Tensor<S>& weight,
                         const Tensor<S>& bias) {
    if (weight.shape.size() != 5)
        throw ArgumentError("conv3d weight must be [Cout,Cin,kt,kh,kw]");
    int kt = weight.shape[2], kh = weight.shape[3], kw = weight.shape[4];
    if (kt % 2 == 0 || kh % 2 == 0 || kw % 2 == 0)
        throw ArgumentError("conv3d requires odd kernel extents, got " +
                            shape_str({kt, kh, kw}));
    return conv3d_forward_padded(input, weight, bias, kt / 2, kh / 2, kw / 2);
}

namespace detail {

// Fixed-lane dot product; the lane layout pins the reduction order so the
// result is reproducible while still vectorizing.
template <typename S>
S lane_dot(const S* __restrict__ a, const S* __restrict__ b, int n) {
    constexpr int L = 16;
    S lanes[L] = {};
    int k = 0;
    for (; k + L <= n; k += L)
        for (int j = 0; j < L; ++j) lanes[j] += a[k + j] * b[k + j];
    for (; k < n; ++k) lanes[k % L] += a[k] * b[k];
    S acc = S(0);
    for (int j = 0; j < L; ++j) acc += lanes[j];
    return acc;
}

}  // namespace detail

// Exact adjoints of conv3d_forward_padded under the Frobenius inner product.
// grad_input is skipped when need_grad_input is false (first-layer case).
template <typename S>
Conv3dGrads<S> conv3d_backward_padded(const Tensor<S>& grad_out, const Tensor<S>& input,
                                      const Tensor<S>& weight, int pt, int ph, int pw,
                                      bool need_grad_input = true) {
    const int B = input.shape[0], C = input.shape[1];
    const int T = input.shape[2], H = input.shape[3], W = input.shape[4];
    const int O = weight.shape[0];
    const int kt = weight.shape[2], kh = weight.shape[3], kw = weight.shape[4];
    const int To = T + 2 * pt - kt + 1;
    const int Ho = H + 2 * ph - kh + 1;
    const int Wo = W + 2 * pw - kw + 1;
    if (grad_out.shape != std::vector<int>{B, O, To, Ho, Wo})
        throw ArgumentError("conv3d_backward grad_out shape " + shape_str(grad_out.shape) +
                            " inconsistent with forward output " +
                            shape_str({B, O, To, Ho, Wo}));

    Conv3dGrads<S> g;
    if (need_grad_input) g.grad_input = Tensor<S>({B, C, T, H, W});
    g.grad_weight = Tensor<S>({O, C, kt, kh, kw});
    g.grad_bias = Tensor<S>({O});

    const size_t in_plane = size_t(T) * H * W;
    const size_t out_plane = size_t(To) * Ho * Wo;

    for (int o = 0; o < O; ++o) {
        S acc = S(0);
        for (int b = 0; b < B; ++b) {
            const S* gp = grad_out.ptr() + (size_t(b) * O + size_t(o)) * out_plane;
            for (size_t i = 0; i < out_plane; ++i) acc += gp[i];
        }
        g.grad_bias.data[size_t(o)] = acc;
    }

    for (int b = 0; b < B; ++b) {
        for (int o = 0; o < O; ++o) {
            const S* gp = grad_out.ptr() + (size_t(b) * O + size_t(o)) * out_plane;
            for (int c = 0; c < C; ++c) {
                const S* ip = input.ptr() + (size_t(b) * C + size_t(c)) * in_plane;
                S* gip = need_grad_input
                             ? g.grad_input.ptr() + (size_t(b) * C + size_t(c)) * in_plane
                             : nullptr;
                S* gwp = g.grad_weight.ptr() +
                         ((size_t(o) * C + size_t(c)) * size_t(kt)) * size_t(kh) * kw;
                const S* wp = weight.ptr() +
                              ((size_t(o) * C + size_t(c)) * size_t(kt)) * size_t(kh) * kw;
                for (int dt = 0; dt < kt; ++dt) {
                    const int t_lo = std::max(0, pt - dt);
                    const int t_hi = std::min(To, T + pt - dt);
                    for (int dh = 0; dh < kh; ++dh) {
                        const int h_lo = std::max(0, ph - dh);
                        const int h_hi = std::min(Ho, H + ph - dh);
                        for (int dw = 0; dw < kw; ++dw) {
                            const int w_lo = std::max(0, pw - dw);
                            const int w_hi = std::min(Wo, W + pw - dw);
                            if (w_lo >= w_hi) continue;
                            const int in_w_off = dw - pw;
                            const size_t k_idx =
                                (size_t(dt) * kh + size_t(dh)) * size_t(kw) + size_t(dw);
                            const S wgt = wp[k_idx];
                            const int len = w_hi - w_lo;
                            S wacc = S(0);
                            for (int t = t_lo; t < t_hi; ++t) {
                                const int ti = t + dt - pt;
                                for (int h = h_lo; h < h_hi; ++h) {
                                    const int hi = h + dh - ph;
                                    const S* __restrict__ grow =
                                        gp + (size_t(t) * Ho + size_t(h)) * Wo + w_lo;
                                    const S* __restrict__ irow =
                                        ip + (size_t(ti) * H + size_t(hi)) * W + in_w_off + w_lo;
                                    if (need_grad_input) {
                                        S* __restrict__ girow = gip +
                                            (size_t(ti) * H + size_t(hi)) * W + in_w_off + w_lo;
                                        for (int w = 0; w < len; ++w)
                                            girow[w] += wgt * grow[w];
                                    }
                                    wacc += detail::lane_dot(grow, irow, len);
                                }
                            }
                            gwp[k_idx] += wacc;
                        }
                    }
                }
            }
        }
    }
    return g;
}

template <typename S>
Conv3dGrads<S> conv3d_backward(const Tensor<S>& grad_out, const Tensor<S>& input,
                               const Tensor<S>& weight, bool need_grad_input = true) {
    int kt = weight.shape[2], kh = weight.shape[3], kw = weight.shape[4];
    return conv3d_backward_padded(grad_out, input, weight, kt / 2, kh / 2, kw / 2,
                                  need_grad_input);
}

template <typename S>
Tensor<S> relu_forward(const Tensor<S>& input) {
    Tensor<S> out = input;
    for (S& v : out.data) v = v > S(0) ? v : S(0);
    return out;
}

template <typename S>
Tensor<S> relu_backward(const Tensor<S>& grad_out, const Tensor<S>& input) {
    if (!grad_out.same_shape(input))
        throw ArgumentError("relu_backward shape mismatch");
    Tensor<S> g = grad_out;
    for (size_t i = 0; i < g.data.size(); ++i)
        if (input.data[i] <= S(0)) g.data[i] = S(0);
    return g;
}

template <typename S>
struct MaxPoolResult {
    Tensor<S> output;              // [B,C,T,H/2,W/2]
    std::vector<uint8_t> argmax;   // 0..3, position within each 2x2 cell
};

// 2x2 max pooling over H and W only; T is preserved. Ties resolve to the
// first maximum in scan order.
template <typename S>
MaxPoolResult<S> maxpool2_spatial_forward(const Tensor<S>& input) {
    if (input.shape.size() != 5)
        throw ArgumentError("maxpool input must be [B,C,T,H,W]");
    const int H = input.shape[3], W = input.shape[4];
    if (H % 2 || W % 2)
        throw ArgumentError("maxpool requires even H and W, got " +
                            shape_str(input.shape));
    const int B = input.shape[0], C = input.shape[1], T = input.shape[2];
    MaxPoolResult<S> res;
    res.output = Tensor<S>({B, C, T, H / 2, W / 2});
    res.argmax.resize(res.output.numel());
    const size_t planes = size_t(B) * C * T;
    for (size_t p = 0; p < planes; ++p) {
        const S* in = input.ptr() + p * size_t(H) * W;
        S* out = res.output.ptr() + p * size_t(H / 2) * size_t(W / 2);
        uint8_t* am = res.argmax.data() + p * size_t(H / 2) * size_t(W / 2);
        for (int h = 0; h < H / 2; ++h) {
            for (int w = 0; w < W / 2; ++w) {
                const S* cell = in + size_t(2 * h) * W + size_t(2 * w);
                S best = cell[0];
                uint8_t idx = 0;
                if (cell[1] > best) { best = cell[1]; idx = 1; }
                if (cell[W] > best) { best = cell[W]; idx = 2; }
                if (cell[W + 1] > best) { best = cell[W + 1]; idx = 3; }
                out[size_t(h) * size_t(W / 2) + size_t(w)] = best;
                am[size_t(h) * size_t(W / 2) + size_t(w)] = idx;
            }
        }
    }
    return res;
}

template <typename S>
Tensor<S> maxpool2_spatial_backward(const Tensor<S>& grad_out,
                                    const std::vector<uint8_t>& argmax,
                                    const std::vector<int>& input_shape) {
    Tensor<S> g(input_shape);
    const int H = input_shape[3], W = input_shape[4];
    const size_t planes = g.numel() / (size_t(H) * W);
    for (size_t p = 0; p < planes; ++p) {
        const S* go = grad_out.ptr() + p * size_t(H / 2) * size_t(W / 2);
        const uint8_t* am = argmax.data() + p * size_t(H / 2) * size_t(W / 2);
        S* gi = g.ptr() + p * size_t(H) * W;
        for (int h = 0; h < H / 2; ++h) {
            for (int w = 0; w < W / 2; ++w) {
                size_t o = size_t(h) * size_t(W / 2) + size_t(w);
                uint8_t idx = am[o];
                size_t base = size_t(2 * h + idx / 2) * size_t(W) + size_t(2 * w + idx % 2);
                gi[base] += go[o];
            }
        }
    }
    return g;
}

// Nearest-neighbor doubling of H and W.
template <typename S>
Tensor<S> upsample2_nearest(const Tensor<S>& input) {
    if (input.shape.size() != 5)
        throw ArgumentError("upsample input must be [B,C,T,H,W]");
    const int H = input.shape[3], W = input.shape[4];
    Tensor<S> out({input.shape[0], input.shape[1], input.shape[2], 2 * H, 2 * W});
    const size_t planes = size_t(input.shape[0]) * input.shape[1] * input.shape[2];
    for (size_t p = 0; p < planes; ++p) {
        const S* in = input.ptr() + p * size_t(H) * W;
        S* o = out.ptr() + p * size_t(2 * H) * size_t(2 * W);
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) {
                S v = in[size_t(h) * W + size_t(w)];
                size_t base = size_t(2 * h) * size_t(2 * W) + size_t(2 * w);
                o[base] = v;
                o[base + 1] = v;
                o[base + size_t(2 * W)] = v;
                o[base + size_t(2 * W) + 1] = v;
            }
        }
    }
    return out;
}

template <typename S>
Tensor<S> upsample2_nearest_backward(const Tensor<S>& grad_out,
                                     const std::vector<int>& input_shape) {
    Tensor<S> g(input_shape);
    const int H = input_shape[3], W = input_shape[4];
    const size_t planes = g.numel() / (size_t(H) * W);
    for (size_t p = 0; p < planes; ++p) {
        const S* go = grad_out.ptr() + p * size_t(2 * H) * size_t(2 * W);
        S* gi = g.ptr() + p * size_t(H) * W;
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) {
                size_t base = size_t(2 * h) * size_t(2 * W) + size_t(2 * w);
                gi[size_t(h) * W + size_t(w)] = go[base] + go[base + 1] +
                                                go[base + size_t(2 * W)] +
                                                go[base + size_t(2 * W) + 1];
            }
        }
    }
    return g;
}

// Concatenation along the channel axis: [a | b].
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape.size() != 5 || b.shape.size() != 5)
        throw ArgumentError("concat_channels expects [B,C,T,H,W] tensors");
    for (size_t axis : {size_t(0), size_t(2), size_t(3), size_t(4)})
        if (a.shape[axis] != b.shape[axis])
            throw ArgumentError("concat_channels shape mismatch: " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
    const int Ca = a.shape[1], Cb = b.shape[1];
    Tensor<S> out({a.shape[0], Ca + Cb, a.shape[2], a.shape[3], a.shape[4]});
    const size_t plane = size_t(a.shape[2]) * a.shape[3] * a.shape[4];
    for (int bi = 0; bi < a.shape[0]; ++bi) {
        S* dst = out.ptr() + size_t(bi) * size_t(Ca + Cb) * plane;
        const S* pa = a.ptr() + size_t(bi) * size_t(Ca) * plane;
        const S* pb = b.ptr() + size_t(bi) * size_t(Cb) * plane;
        std::copy(pa, pa + size_t(Ca) * plane, dst);
        std::copy(pb, pb + size_t(Cb) * plane, dst + size_t(Ca) * plane);
    }
    return out;
}

template <typename S>
void split_channels_backward(const Tensor<S>& grad_out, int channels_a,
                             Tensor<S>& grad_a, Tensor<S>& grad_b) {
    const int C = grad_out.shape[1];
    const int Cb = C - channels_a;
    grad_a = Tensor<S>({grad_out.shape[0], channels_a, grad_out.shape[2],
                        grad_out.shape[3], grad_out.shape[4]});
    grad_b = Tensor<S>({grad_out.shape[0], Cb, grad_out.shape[2], grad_out.shape[3],
                        grad_out.shape[4]});
    const size_t plane = size_t(grad_out.shape[2]) * grad_out.shape[3] * grad_out.shape[4];
    for (int bi = 0; bi < grad_out.shape[0]; ++bi) {
        const S* src = grad_out.ptr() + size_t(bi) * size_t(C) * plane;
        std::copy(src, src + size_t(channels_a) * plane,
                  grad_a.ptr() + size_t(bi) * size_t(channels_a) * plane);
        std::copy(src + size_t(channels_a) * plane, src + size_t(C) * plane,
                  grad_b.ptr() + size_t(bi) * size_t(Cb) * plane);
    }
}

// Mean over all elements of (pred - target)^2, accumulated in double.
template <typename S>
double mse_loss_forward(const Tensor<S>& pred, const Tensor<S>& target) {
    if (!pred.same_shape(target))
        throw ArgumentError("mse_loss shape mismatch: " + shape_str(pred.shape) +
                            " vs " + shape_str(target.shape));
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        double d = double(pred.data[i]) - double(target.data[i]);
        acc += d * d;
    }
    double loss = acc / double(pred.numel());
    if (!std::isfinite(loss)) throw NumericError("non-finite MSE loss");
    return loss;
}

template <typename S>
Tensor<S> mse_loss_backward(const Tensor<S>& pred, const Tensor<S>& target) {
    Tensor<S> g(pred.shape);
    const S scale = S(2.0 / double(pred.numel()));
    for (size_t i = 0; i < pred.data.size(); ++i)
        g.data[i] = scale * (pred.data[i] - target.data[i]);
    return g;
}

}  // namespace nowcast
