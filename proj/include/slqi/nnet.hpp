#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "slqi/raster.hpp"
#include "slqi/rng.hpp"
#include "slqi/tensor.hpp"

namespace slqi {

struct LabelOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyDataset : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BranchId : std::uint8_t {
    Global = 0,
    Address = 1,
    Barcode = 2,
    FastPatch = 3,
    FusionHead = 4,
};

inline const char* branch_name(BranchId b) {
    switch (b) {
        case BranchId::Global: return "global";
        case BranchId::Address: return "address";
        case BranchId::Barcode: return "barcode";
        case BranchId::FastPatch: return "fastpatch";
        case BranchId::FusionHead: return "fusion";
    }
    return "unknown";
}

template <typename T>
struct ConvLayer {
    Tensor<T> w;  // [oc, ic, 3, 3]
    Tensor<T> b;  // [oc]
};

template <typename T>
struct DenseLayer {
    Tensor<T> w;  // [out, in]
    Tensor<T> b;  // [out]
};

/// Three conv/pool blocks, global average pooling, a dense feature layer
/// and a 5-way classifier head used during branch pretraining.
template <typename T>
struct ExtractorNet {
    BranchId branch = BranchId::Global;
    int input_side = 64;
    int feature_dim = 64;
    ConvLayer<T> conv1, conv2, conv3;
    DenseLayer<T> fc_feature, fc_head;

    template <typename F>
    void for_each_tensor(F&& f) {
        f(conv1.w); f(conv1.b);
        f(conv2.w); f(conv2.b);
        f(conv3.w); f(conv3.b);
        f(fc_feature.w); f(fc_feature.b);
        f(fc_head.w); f(fc_head.b);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        f(conv1.w); f(conv1.b);
        f(conv2.w); f(conv2.b);
        f(conv3.w); f(conv3.b);
        f(fc_feature.w); f(fc_feature.b);
        f(fc_head.w); f(fc_head.b);
    }
};

inline constexpr int kConvChannels[4] = {1, 8, 16, 32};

struct TrainConfig {
    double lr = 0.01;
    double momentum = 0.9;
    int epochs = 10;
    int batch_size = 16;
    std::uint64_t seed = 1;
    int input_side = 64;
    bool track_epoch_loss = false;
};

namespace nn_detail {

/// Copy [C,H,W] into a zero-padded [C,H+2,W+2] buffer.
template <typename T>
void pad1(const T* in, int C, int H, int W, T* pad) {
    const int PW = W + 2;
    std::fill(pad, pad + static_cast<std::size_t>(C) * (H + 2) * PW, T(0));
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            std::copy(in + (static_cast<std::size_t>(c) * H + y) * W,
                      in + (static_cast<std::size_t>(c) * H + y + 1) * W,
                      pad + (static_cast<std::size_t>(c) * (H + 2) + y + 1) * PW + 1);
}

/// 3x3 same-padding convolution over a pre-padded input.
template <typename T>
void conv3x3_forward(const T* pad, int C, int H, int W, const T* w,
                     const T* bias, int OC, T* out) {
    const int PW = W + 2;
    for (int oc = 0; oc < OC; ++oc) {
        T* out_c = out + static_cast<std::size_t>(oc) * H * W;
        std::fill(out_c, out_c + static_cast<std::size_t>(H) * W, bias[oc]);
        for (int c = 0; c < C; ++c) {
            const T* pc = pad + static_cast<std::size_t>(c) * (H + 2) * PW;
            const T* wk = w + (static_cast<std::size_t>(oc) * C + c) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = wk[ky * 3 + kx];
                    for (int y = 0; y < H; ++y) {
                        const T* in_row = pc + static_cast<std::size_t>(y + ky) * PW + kx;
                        T* out_row = out_c + static_cast<std::size_t>(y) * W;
                        for (int x = 0; x < W; ++x) out_row[x] += wv * in_row[x];
                    }
                }
        }
    }
}

/// Gradients of the 3x3 convolution. `dpad` (same layout as `pad`) may be
/// null when the input gradient is not needed (first layer).
template <typename T>
void conv3x3_backward(const T* pad, int C, int H, int W, const T* w, int OC,
                      const T* dout, T* dw, T* db, T* dpad) {
    const int PW = W + 2;
    if (dpad)
        std::fill(dpad, dpad + static_cast<std::size_t>(C) * (H + 2) * PW, T(0));
    for (int oc = 0; oc < OC; ++oc) {
        const T* dout_c = dout + static_cast<std::size_t>(oc) * H * W;
        T acc_b = 0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i)
            acc_b += dout_c[i];
        db[oc] += acc_b;
        for (int c = 0; c < C; ++c) {
            const T* pc = pad + static_cast<std::size_t>(c) * (H + 2) * PW;
            T* dpc = dpad ? dpad + static_cast<std::size_t>(c) * (H + 2) * PW : nullptr;
            const std::size_t wbase = (static_cast<std::size_t>(oc) * C + c) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    T acc = 0;
                    const T wv = w[wbase + ky * 3 + kx];
                    for (int y = 0; y < H; ++y) {
                        const T* in_row = pc + static_cast<std::size_t>(y + ky) * PW + kx;
                        const T* dout_row = dout_c + static_cast<std::size_t>(y) * W;
                        if (dpc) {
                            T* dpad_row = dpc + static_cast<std::size_t>(y + ky) * PW + kx;
                            for (int x = 0; x < W; ++x) {
                                acc += dout_row[x] * in_row[x];
                                dpad_row[x] += wv * dout_row[x];
                            }
                        } else {
                            for (int x = 0; x < W; ++x) acc += dout_row[x] * in_row[x];
                        }
                    }
                    dw[wbase + ky * 3 + kx] += acc;
                }
        }
    }
}

template <typename T>
void relu_inplace(T* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (v[i] < T(0)) v[i] = T(0);
}

/// 2x2 max pooling, stride 2. Ties keep the first element in scan order.
template <typename T>
void maxpool2_forward(const T* in, int C, int H, int W, T* out,
                      std::uint8_t* idx) {
    const int OH = H / 2, OW = W / 2;
    for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                const T* base = in + (static_cast<std::size_t>(c) * H + 2 * oy) * W + 2 * ox;
                T best = base[0];
                int code = 0;
                if (base[1] > best) { best = base[1]; code = 1; }
                if (base[W] > best) { best = base[W]; code = 2; }
                if (base[W + 1] > best) { best = base[W + 1]; code = 3; }
                const std::size_t o = (static_cast<std::size_t>(c) * OH + oy) * OW + ox;
                out[o] = best;
                idx[o] = static_cast<std::uint8_t>(code);
            }
}

template <typename T>
void maxpool2_backward(const T* dout, const std::uint8_t* idx, int C, int H,
                       int W, T* din) {
    const int OH = H / 2, OW = W / 2;
    std::fill(din, din + static_cast<std::size_t>(C) * H * W, T(0));
    for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                const std::size_t o = (static_cast<std::size_t>(c) * OH + oy) * OW + ox;
                const int code = idx[o];
                const std::size_t target =
                    (static_cast<std::size_t>(c) * H + 2 * oy + code / 2) * W +
                    2 * ox + code % 2;
                din[target] = dout[o];
            }
}

template <typename T>
void dense_forward(const T* in, int n_in, const T* w, const T* b, int n_out,
                   T* out) {
    for (int o = 0; o < n_out; ++o) {
        T acc = b[o];
        const T* wr = w + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) acc += wr[i] * in[i];
        out[o] = acc;
    }
}

template <typename T>
void dense_backward(const T* in, int n_in, const T* w, int n_out,
                    const T* dout, T* dw, T* db, T* din) {
    if (din) std::fill(din, din + n_in, T(0));
    for (int o = 0; o < n_out; ++o) {
        const T g = dout[o];
        db[o] += g;
        const T* wr = w + static_cast<std::size_t>(o) * n_in;
        T* dwr = dw + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) {
            dwr[i] += g * in[i];
            if (din) din[i] += wr[i] * g;
        }
    }
}

}  // namespace nn_detail

/// Numerically stable softmax (max-subtracted), accumulated in T.
template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
    T mx = logits[0];
    for (T v : logits) mx = std::max(mx, v);
    std::vector<T> p(logits.size());
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (T& v : p) v /= sum;
    return p;
}

/// Cross-entropy loss and its gradient w.r.t. the logits (p - onehot).
template <typename T>
std::pair<T, std::vector<T>> softmax_cross_entropy(const std::vector<T>& logits,
                                                   int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw LabelOutOfRange("label outside logit range");
    T mx = logits[0];
    for (T v : logits) mx = std::max(mx, v);
    T sum = 0;
    for (T v : logits) sum += std::exp(v - mx);
    const T loss = -(logits[label] - mx - std::log(sum));
    std::vector<T> grad(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        grad[i] = std::exp(logits[i] - mx) / sum -
                  (static_cast<int>(i) == label ? T(1) : T(0));
    return {loss, std::move(grad)};
}

/// Fresh extractor: He-normal weights drawn from the seeded stream in fixed
/// layer order, zero biases.
template <typename T>
ExtractorNet<T> init_extractor(BranchId branch, int input_side, int feature_dim,
                               std::uint64_t seed) {
    if (input_side < 8 || input_side % 8 != 0)
        throw ShapeMismatch("input side must be a positive multiple of 8");
    if (feature_dim < 1) throw ShapeMismatch("feature dim must be positive");
    ExtractorNet<T> net;
    net.branch = branch;
    net.input_side = input_side;
    net.feature_dim = feature_dim;
    net.conv1.w = Tensor<T>({kConvChannels[1], kConvChannels[0], 3, 3});
    net.conv1.b = Tensor<T>({kConvChannels[1]});
    net.conv2.w = Tensor<T>({kConvChannels[2], kConvChannels[1], 3, 3});
    net.conv2.b = Tensor<T>({kConvChannels[2]});
    net.conv3.w = Tensor<T>({kConvChannels[3], kConvChannels[2], 3, 3});
    net.conv3.b = Tensor<T>({kConvChannels[3]});
    net.fc_feature.w = Tensor<T>({feature_dim, kConvChannels[3]});
    net.fc_feature.b = Tensor<T>({feature_dim});
    net.fc_head.w = Tensor<T>({5, feature_dim});
    net.fc_head.b = Tensor<T>({5});

    Xoshiro256 rng(seed);
    const auto he_fill = [&rng](Tensor<T>& t, int fan_in) {
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (T& v : t.data) v = static_cast<T>(rng.next_normal() * std_dev);
    };
    he_fill(net.conv1.w, kConvChannels[0] * 9);
    he_fill(net.conv2.w, kConvChannels[1] * 9);
    he_fill(net.conv3.w, kConvChannels[2] * 9);
    he_fill(net.fc_feature.w, kConvChannels[3]);
    he_fill(net.fc_head.w, feature_dim);
    return net;
}

/// Per-sample activations kept for backprop; buffers are reused between
/// samples.
template <typename T>
struct ExtractorTrace {
    Tensor<T> pad_in, act1, pool1, pad_p1, act2, pool2, pad_p2, act3, pool3;
    std::vector<std::uint8_t> idx1, idx2, idx3;
    Tensor<T> gap, feat, logits;
};

/// Forward pass. `input` is [1, S, S] in [0,1]; fills `trace` and returns
/// the logits (trace.feat holds the post-ReLU feature vector).
template <typename T>
void forward_extractor(const ExtractorNet<T>& net, const Tensor<T>& input,
                       ExtractorTrace<T>& t) {
    using namespace nn_detail;
    const int S = net.input_side;
    if (input.shape != std::vector<int>{1, S, S})
        throw ShapeMismatch("extractor input must be [1, side, side]");
    const int C1 = kConvChannels[1], C2 = kConvChannels[2], C3 = kConvChannels[3];
    const int S2 = S / 2, S4 = S / 4, S8 = S / 8;

    t.pad_in.reshape({1, S + 2, S + 2});
    t.act1.reshape({C1, S, S});
    t.pool1.reshape({C1, S2, S2});
    t.pad_p1.reshape({C1, S2 + 2, S2 + 2});
    t.act2.reshape({C2, S2, S2});
    t.pool2.reshape({C2, S4, S4});
    t.pad_p2.reshape({C2, S4 + 2, S4 + 2});
    t.act3.reshape({C3, S4, S4});
    t.pool3.reshape({C3, S8, S8});
    t.idx1.resize(t.pool1.numel());
    t.idx2.resize(t.pool2.numel());
    t.idx3.resize(t.pool3.numel());
    t.gap.reshape({C3});
    t.feat.reshape({net.feature_dim});
    t.logits.reshape({5});

    pad1(input.ptr(), 1, S, S, t.pad_in.ptr());
    conv3x3_forward(t.pad_in.ptr(), 1, S, S, net.conv1.w.ptr(),
                    net.conv1.b.ptr(), C1, t.act1.ptr());
    relu_inplace(t.act1.ptr(), t.act1.numel());
    maxpool2_forward(t.act1.ptr(), C1, S, S, t.pool1.ptr(), t.idx1.data());

    pad1(t.pool1.ptr(), C1, S2, S2, t.pad_p1.ptr());
    conv3x3_forward(t.pad_p1.ptr(), C1, S2, S2, net.conv2.w.ptr(),
                    net.conv2.b.ptr(), C2, t.act2.ptr());
    relu_inplace(t.act2.ptr(), t.act2.numel());
    maxpool2_forward(t.act2.ptr(), C2, S2, S2, t.pool2.ptr(), t.idx2.data());

    pad1(t.pool2.ptr(), C2, S4, S4, t.pad_p2.ptr());
    conv3x3_forward(t.pad_p2.ptr(), C2, S4, S4, net.conv3.w.ptr(),
                    net.conv3.b.ptr(), C3, t.act3.ptr());
    relu_inplace(t.act3.ptr(), t.act3.numel());
    maxpool2_forward(t.act3.ptr(), C3, S4, S4, t.pool3.ptr(), t.idx3.data());

    for (int c = 0; c < C3; ++c) {
        T acc = 0;
        const T* p = t.pool3.ptr() + static_cast<std::size_t>(c) * S8 * S8;
        for (int i = 0; i < S8 * S8; ++i) acc += p[i];
        t.gap.data[c] = acc / static_cast<T>(S8 * S8);
    }
    dense_forward(t.gap.ptr(), C3, net.fc_feature.w.ptr(),
                  net.fc_feature.b.ptr(), net.feature_dim, t.feat.ptr());
    relu_inplace(t.feat.ptr(), t.feat.numel());
    dense_forward(t.feat.ptr(), net.feature_dim, net.fc_head.w.ptr(),
                  net.fc_head.b.ptr(), 5, t.logits.ptr());
}

/// Deterministic feature vector for one prepared input.
template <typename T>
std::vector<T> forward_features(const ExtractorNet<T>& net,
                                const Tensor<T>& input) {
    ExtractorTrace<T> t;
    forward_extractor(net, input, t);
    return t.feat.data;
}

/// Accumulate parameter gradients for one sample into `grads` (same shapes
/// as the net, caller zeroes between batches).
template <typename T>
void backward_extractor(const ExtractorNet<T>& net, const Tensor<T>& input,
                        const ExtractorTrace<T>& t, const std::vector<T>& dlogits,
                        ExtractorNet<T>& grads) {
    using namespace nn_detail;
    const int S = net.input_side;
    const int C1 = kConvChannels[1], C2 = kConvChannels[2], C3 = kConvChannels[3];
    const int S2 = S / 2, S4 = S / 4, S8 = S / 8;
    (void)input;

    std::vector<T> dfeat(net.feature_dim);
    dense_backward(t.feat.ptr(), net.feature_dim, net.fc_head.w.ptr(), 5,
                   dlogits.data(), grads.fc_head.w.ptr(), grads.fc_head.b.ptr(),
                   dfeat.data());
    for (int i = 0; i < net.feature_dim; ++i)
        if (t.feat.data[i] <= T(0)) dfeat[i] = T(0);

    std::vector<T> dgap(C3);
    dense_backward(t.gap.ptr(), C3, net.fc_feature.w.ptr(), net.feature_dim,
                   dfeat.data(), grads.fc_feature.w.ptr(),
                   grads.fc_feature.b.ptr(), dgap.data());

    Tensor<T> dpool3({C3, S8, S8});
    for (int c = 0; c < C3; ++c) {
        const T g = dgap[c] / static_cast<T>(S8 * S8);
        T* p = dpool3.ptr() + static_cast<std::size_t>(c) * S8 * S8;
        std::fill(p, p + S8 * S8, g);
    }

    Tensor<T> dact3({C3, S4, S4});
    maxpool2_backward(dpool3.ptr(), t.idx3.data(), C3, S4, S4, dact3.ptr());
    for (std::size_t i = 0; i < dact3.numel(); ++i)
        if (t.act3.data[i] <= T(0)) dact3.data[i] = T(0);

    Tensor<T> dpad_p2({C2, S4 + 2, S4 + 2});
    conv3x3_backward(t.pad_p2.ptr(), C2, S4, S4, net.conv3.w.ptr(), C3,
                     dact3.ptr(), grads.conv3.w.ptr(), grads.conv3.b.ptr(),
                     dpad_p2.ptr());
    Tensor<T> dpool2({C2, S4, S4});
    for (int c = 0; c < C2; ++c)
        for (int y = 0; y < S4; ++y)
            std::copy(dpad_p2.ptr() + (static_cast<std::size_t>(c) * (S4 + 2) + y + 1) * (S4 + 2) + 1,
                      dpad_p2.ptr() + (static_cast<std::size_t>(c) * (S4 + 2) + y + 1) * (S4 + 2) + 1 + S4,
                      dpool2.ptr() + (static_cast<std::size_t>(c) * S4 + y) * S4);

    Tensor<T> dact2({C2, S2, S2});
    maxpool2_backward(dpool2.ptr(), t.idx2.data(), C2, S2, S2, dact2.ptr());
    for (std::size_t i = 0; i < dact2.numel(); ++i)
        if (t.act2.data[i] <= T(0)) dact2.data[i] = T(0);

    Tensor<T> dpad_p1({C1, S2 + 2, S2 + 2});
    conv3x3_backward(t.pad_p1.ptr(), C1, S2, S2, net.conv2.w.ptr(), C2,
                     dact2.ptr(), grads.conv2.w.ptr(), grads.conv2.b.ptr(),
                     dpad_p1.ptr());
    Tensor<T> dpool1({C1, S2, S2});
    for (int c = 0; c < C1; ++c)
        for (int y = 0; y < S2; ++y)
            std::copy(dpad_p1.ptr() + (static_cast<std::size_t>(c) * (S2 + 2) + y + 1) * (S2 + 2) + 1,
                      dpad_p1.ptr() + (static_cast<std::size_t>(c) * (S2 + 2) + y + 1) * (S2 + 2) + 1 + S2,
                      dpool1.ptr() + (static_cast<std::size_t>(c) * S2 + y) * S2);

    Tensor<T> dact1({C1, S, S});
    maxpool2_backward(dpool1.ptr(), t.idx1.data(), C1, S, S, dact1.ptr());
    for (std::size_t i = 0; i < dact1.numel(); ++i)
        if (t.act1.data[i] <= T(0)) dact1.data[i] = T(0);

    conv3x3_backward(t.pad_in.ptr(), 1, S, S, net.conv1.w.ptr(), C1,
                     dact1.ptr(), grads.conv1.w.ptr(), grads.conv1.b.ptr(),
                     static_cast<T*>(nullptr));
}

template <typename T>
ExtractorNet<T> zeros_like(const ExtractorNet<T>& net) {
    ExtractorNet<T> z = net;
    z.for_each_tensor([](Tensor<T>& t) { t.zero(); });
    return z;
}

template <typename T>
bool all_finite(const ExtractorNet<T>& net) {
    bool ok = true;
    net.for_each_tensor([&ok](const Tensor<T>& t) {
        for (T v : t.data)
            if (!std::isfinite(static_cast<double>(v))) ok = false;
    });
    return ok;
}

template <typename T>
struct TrainResult {
    ExtractorNet<T> net;
    std::vector<double> epoch_losses;  // filled when track_epoch_loss is set
};

/// Minibatch SGD with momentum on softmax cross-entropy. Sample order is
/// reshuffled once per epoch from the seeded stream; the result is a pure
/// function of (inputs, labels, config).
template <typename T>
TrainResult<T> train_extractor(const std::vector<Tensor<T>>& inputs,
                               const std::vector<int>& labels, BranchId branch,
                               int feature_dim, const TrainConfig& cfg) {
    if (inputs.empty()) throw EmptyDataset("training split is empty");
    if (inputs.size() != labels.size())
        throw ShapeMismatch("inputs and labels differ in length");
    for (int l : labels)
        if (l < 0 || l >= 5) throw LabelOutOfRange("label outside [0,5)");

    TrainResult<T> result;
    result.net = init_extractor<T>(branch, cfg.input_side, feature_dim,
                                   splitmix64_at(cfg.seed, 0));
    ExtractorNet<T> grads = zeros_like(result.net);
    ExtractorNet<T> velocity = zeros_like(result.net);
    Xoshiro256 shuffle_rng(splitmix64_at(cfg.seed, 1));

    std::vector<int> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    ExtractorTrace<T> trace;

    std::vector<Tensor<T>*> ps, gs, vs;
    result.net.for_each_tensor([&ps](Tensor<T>& t) { ps.push_back(&t); });
    grads.for_each_tensor([&gs](Tensor<T>& t) { gs.push_back(&t); });
    velocity.for_each_tensor([&vs](Tensor<T>& t) { vs.push_back(&t); });

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            for (Tensor<T>* g : gs) g->zero();
            for (std::size_t i = start; i < end; ++i) {
                const int s = order[i];
                forward_extractor(result.net, inputs[s], trace);
                auto [loss, dlogits] =
                    softmax_cross_entropy(trace.logits.data, labels[s]);
                (void)loss;
                backward_extractor(result.net, inputs[s], trace, dlogits, grads);
            }
            const T scale = T(1) / static_cast<T>(end - start);
            for (std::size_t k = 0; k < ps.size(); ++k) {
                T* p = ps[k]->ptr();
                T* g = gs[k]->ptr();
                T* v = vs[k]->ptr();
                const std::size_t n = ps[k]->numel();
                for (std::size_t j = 0; j < n; ++j) {
                    v[j] = static_cast<T>(cfg.momentum) * v[j] -
                           static_cast<T>(cfg.lr) * g[j] * scale;
                    p[j] += v[j];
                }
            }
        }
        if (!all_finite(result.net))
            throw NumericFault("non-finite parameter after epoch " +
                               std::to_string(epoch));
        if (cfg.track_epoch_loss) {
            double total = 0.0;
            for (std::size_t s = 0; s < inputs.size(); ++s) {
                forward_extractor(result.net, inputs[s], trace);
                total += static_cast<double>(
                    softmax_cross_entropy(trace.logits.data, labels[s]).first);
            }
            result.epoch_losses.push_back(total / static_cast<double>(inputs.size()));
        }
    }
    return result;
}

struct GradCheckOptions {
    int min_samples = 200;
    std::uint64_t seed = 7;
    double step_scale = 1e-4;  // h = step_scale * max(1, |w|)
    // test hook: corrupt the analytic gradients before comparison
    std::function<void(ExtractorNet<double>&)> grad_mutator;
};

/// Compare analytic gradients against central finite differences on one
/// sample. Samples at least `min_samples` weights spread over every tensor;
/// returns the maximum relative error.
inline double gradient_check(const ExtractorNet<double>& net,
                             const Tensor<double>& input, int label,
                             const GradCheckOptions& opts = {}) {
    ExtractorTrace<double> trace;
    forward_extractor(net, input, trace);
    auto [loss0, dlogits] = softmax_cross_entropy(trace.logits.data, label);
    (void)loss0;
    ExtractorNet<double> grads = zeros_like(net);
    backward_extractor(net, input, trace, dlogits, grads);
    if (opts.grad_mutator) opts.grad_mutator(grads);

    std::size_t total = 0;
    net.for_each_tensor([&total](const Tensor<double>& t) { total += t.numel(); });

    ExtractorNet<double> probe = net;
    std::vector<Tensor<double>*> ptensors;
    probe.for_each_tensor([&ptensors](Tensor<double>& t) { ptensors.push_back(&t); });
    std::vector<const Tensor<double>*> gtensors;
    grads.for_each_tensor([&gtensors](const Tensor<double>& t) { gtensors.push_back(&t); });

    Xoshiro256 rng(opts.seed);
    const auto loss_at = [&]() {
        forward_extractor(probe, input, trace);
        return softmax_cross_entropy(trace.logits.data, label).first;
    };

    double max_rel = 0.0;
    for (std::size_t k = 0; k < ptensors.size(); ++k) {
        const std::size_t n = ptensors[k]->numel();
        const std::size_t want = std::max<std::size_t>(
            2, (static_cast<std::size_t>(opts.min_samples) * n + total - 1) / total);
        for (std::size_t s = 0; s < want; ++s) {
            const std::size_t j = rng.next_u64() % n;
            double& w = ptensors[k]->data[j];
            const double orig = w;
            const double h = opts.step_scale * std::max(1.0, std::abs(orig));
            w = orig + h;
            const double lp = loss_at();
            w = orig - h;
            const double lm = loss_at();
            w = orig;
            const double gn = (lp - lm) / (2 * h);
            const double ga = gtensors[k]->data[j];
            const double rel =
                std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

/// Grayscale, letterboxed, [0,1]-scaled network input for one raster.
template <typename T>
Tensor<T> prepare_input(const Raster& image, int side) {
    const Raster boxed = resize_letterbox(to_grayscale(image), side, side, 255);
    Tensor<T> t({1, side, side});
    for (std::size_t i = 0; i < boxed.data.size(); ++i)
        t.data[i] = static_cast<T>(boxed.data[i]) / T(255);
    return t;
}

}  // namespace slqi
