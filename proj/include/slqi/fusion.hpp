#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "slqi/nnet.hpp"
#include "slqi/rng.hpp"
#include "slqi/tensor.hpp"

namespace slqi {

struct DimMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WrongPatchCount : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AllZeroWeights : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
struct FeatureVector {
    BranchId branch = BranchId::Global;
    std::vector<T> values;
};

/// Dimensions of the fused classifier. Desk defaults keep the end-to-end
/// experiment CPU-cheap; paper_scale() switches to the 2048/512 layout.
struct FusionConfig {
    int global_dim = 64;
    int local_dim = 16;
    int hidden1 = 64;
    int hidden2 = 32;
    int n_p = 3;  // FAST-patch features pooled per image

    int fused_dim() const { return global_dim + 3 * local_dim; }

    static FusionConfig paper_scale() {
        return FusionConfig{2048, 512, 512, 128, 3};
    }

    void validate() const {
        if (global_dim < 1 || local_dim < 1 || hidden1 < 1 || hidden2 < 1 ||
            n_p < 1)
            throw DimMismatch("fusion dimensions must be positive");
    }
};

/// Concatenate [global | address | barcode | mean-pooled FAST patches].
template <typename T>
std::vector<T> fuse_features(const FeatureVector<T>& global,
                             const FeatureVector<T>& address,
                             const FeatureVector<T>& barcode,
                             const std::vector<FeatureVector<T>>& fast_patches,
                             const FusionConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(global.values.size()) != cfg.global_dim)
        throw DimMismatch("global feature dim mismatch");
    if (static_cast<int>(address.values.size()) != cfg.local_dim ||
        static_cast<int>(barcode.values.size()) != cfg.local_dim)
        throw DimMismatch("local feature dim mismatch");
    if (static_cast<int>(fast_patches.size()) != cfg.n_p)
        throw WrongPatchCount("expected exactly n_p FAST-patch features");
    for (const FeatureVector<T>& p : fast_patches)
        if (static_cast<int>(p.values.size()) != cfg.local_dim)
            throw DimMismatch("FAST-patch feature dim mismatch");

    std::vector<T> out;
    out.reserve(cfg.fused_dim());
    out.insert(out.end(), global.values.begin(), global.values.end());
    out.insert(out.end(), address.values.begin(), address.values.end());
    out.insert(out.end(), barcode.values.begin(), barcode.values.end());
    for (int i = 0; i < cfg.local_dim; ++i) {
        T acc = 0;
        for (const FeatureVector<T>& p : fast_patches) acc += p.values[i];
        out.push_back(acc / static_cast<T>(cfg.n_p));
    }
    return out;
}

/// Three dense layers (ReLU between, softmax at the output).
template <typename T>
struct FusionNet {
    DenseLayer<T> l1, l2, l3;

    int in_dim() const { return l1.w.shape[1]; }
    int h1() const { return l1.w.shape[0]; }
    int h2() const { return l2.w.shape[0]; }

    template <typename F>
    void for_each_tensor(F&& f) {
        f(l1.w); f(l1.b); f(l2.w); f(l2.b); f(l3.w); f(l3.b);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        f(l1.w); f(l1.b); f(l2.w); f(l2.b); f(l3.w); f(l3.b);
    }
};

template <typename T>
FusionNet<T> init_fusion(const FusionConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    FusionNet<T> net;
    net.l1.w = Tensor<T>({cfg.hidden1, cfg.fused_dim()});
    net.l1.b = Tensor<T>({cfg.hidden1});
    net.l2.w = Tensor<T>({cfg.hidden2, cfg.hidden1});
    net.l2.b = Tensor<T>({cfg.hidden2});
    net.l3.w = Tensor<T>({5, cfg.hidden2});
    net.l3.b = Tensor<T>({5});
    Xoshiro256 rng(seed);
    const auto he_fill = [&rng](Tensor<T>& t, int fan_in) {
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (T& v : t.data) v = static_cast<T>(rng.next_normal() * std_dev);
    };
    he_fill(net.l1.w, cfg.fused_dim());
    he_fill(net.l2.w, cfg.hidden1);
    he_fill(net.l3.w, cfg.hidden2);
    return net;
}

template <typename T>
struct FusionTrace {
    std::vector<T> a1, a2, logits;
};

template <typename T>
void forward_fusion(const FusionNet<T>& net, const std::vector<T>& x,
                    FusionTrace<T>& t) {
    using namespace nn_detail;
    if (static_cast<int>(x.size()) != net.in_dim())
        throw DimMismatch("fused feature dim mismatch");
    t.a1.assign(net.h1(), T(0));
    t.a2.assign(net.h2(), T(0));
    t.logits.assign(5, T(0));
    dense_forward(x.data(), net.in_dim(), net.l1.w.ptr(), net.l1.b.ptr(),
                  net.h1(), t.a1.data());
    relu_inplace(t.a1.data(), t.a1.size());
    dense_forward(t.a1.data(), net.h1(), net.l2.w.ptr(), net.l2.b.ptr(),
                  net.h2(), t.a2.data());
    relu_inplace(t.a2.data(), t.a2.size());
    dense_forward(t.a2.data(), net.h2(), net.l3.w.ptr(), net.l3.b.ptr(), 5,
                  t.logits.data());
}

template <typename T>
void backward_fusion(const FusionNet<T>& net, const std::vector<T>& x,
                     const FusionTrace<T>& t, const std::vector<T>& dlogits,
                     FusionNet<T>& grads) {
    using namespace nn_detail;
    std::vector<T> da2(net.h2()), da1(net.h1());
    dense_backward(t.a2.data(), net.h2(), net.l3.w.ptr(), 5, dlogits.data(),
                   grads.l3.w.ptr(), grads.l3.b.ptr(), da2.data());
    for (int i = 0; i < net.h2(); ++i)
        if (t.a2[i] <= T(0)) da2[i] = T(0);
    dense_backward(t.a1.data(), net.h1(), net.l2.w.ptr(), net.h2(), da2.data(),
                   grads.l2.w.ptr(), grads.l2.b.ptr(), da1.data());
    for (int i = 0; i < net.h1(); ++i)
        if (t.a1[i] <= T(0)) da1[i] = T(0);
    dense_backward(x.data(), net.in_dim(), net.l1.w.ptr(), net.h1(), da1.data(),
                   grads.l1.w.ptr(), grads.l1.b.ptr(), static_cast<T*>(nullptr));
}

template <typename T>
struct FusionTrainResult {
    FusionNet<T> net;
    std::vector<double> epoch_losses;
};

/// Stacked-generalization head: branch extractors stay frozen, the head is
/// trained on their precomputed fused features.
template <typename T>
FusionTrainResult<T> train_fusion_head(const std::vector<std::vector<T>>& features,
                                       const std::vector<int>& labels,
                                       const FusionConfig& fusion_cfg,
                                       const TrainConfig& cfg) {
    if (features.empty()) throw EmptyDataset("fusion training split is empty");
    if (features.size() != labels.size())
        throw ShapeMismatch("features and labels differ in length");
    for (const std::vector<T>& f : features)
        if (static_cast<int>(f.size()) != fusion_cfg.fused_dim())
            throw DimMismatch("fused feature dim mismatch");
    for (int l : labels)
        if (l < 0 || l >= 5) throw LabelOutOfRange("label outside [0,5)");

    FusionTrainResult<T> result;
    result.net = init_fusion<T>(fusion_cfg, splitmix64_at(cfg.seed, 0));
    FusionNet<T> grads = result.net;
    grads.for_each_tensor([](Tensor<T>& t) { t.zero(); });
    FusionNet<T> velocity = grads;
    Xoshiro256 shuffle_rng(splitmix64_at(cfg.seed, 1));

    std::vector<Tensor<T>*> ps, gs, vs;
    result.net.for_each_tensor([&ps](Tensor<T>& t) { ps.push_back(&t); });
    grads.for_each_tensor([&gs](Tensor<T>& t) { gs.push_back(&t); });
    velocity.for_each_tensor([&vs](Tensor<T>& t) { vs.push_back(&t); });

    std::vector<int> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    FusionTrace<T> trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            for (Tensor<T>* g : gs) g->zero();
            for (std::size_t i = start; i < end; ++i) {
                const int s = order[i];
                forward_fusion(result.net, features[s], trace);
                auto [loss, dlogits] = softmax_cross_entropy(trace.logits, labels[s]);
                (void)loss;
                backward_fusion(result.net, features[s], trace, dlogits, grads);
            }
            const T scale = T(1) / static_cast<T>(end - start);
            for (std::size_t k = 0; k < ps.size(); ++k) {
                T* p = ps[k]->ptr();
                T* g = gs[k]->ptr();
                T* v = vs[k]->ptr();
                for (std::size_t j = 0; j < ps[k]->numel(); ++j) {
                    v[j] = static_cast<T>(cfg.momentum) * v[j] -
                           static_cast<T>(cfg.lr) * g[j] * scale;
                    p[j] += v[j];
                }
            }
        }
        bool finite = true;
        result.net.for_each_tensor([&finite](const Tensor<T>& t) {
            for (T v : t.data)
                if (!std::isfinite(static_cast<double>(v))) finite = false;
        });
        if (!finite)
            throw NumericFault("non-finite fusion parameter after epoch " +
                               std::to_string(epoch));
        if (cfg.track_epoch_loss) {
            double total = 0.0;
            for (std::size_t s = 0; s < features.size(); ++s) {
                forward_fusion(result.net, features[s], trace);
                total += static_cast<double>(
                    softmax_cross_entropy(trace.logits, labels[s]).first);
            }
            result.epoch_losses.push_back(total / static_cast<double>(features.size()));
        }
    }
    return result;
}

struct Prediction {
    int cls = 0;  // argmax of probabilities, lowest index on ties
    std::array<double, 5> probabilities{};
};

inline int argmax_lowest(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

template <typename T>
Prediction predict_stacked(const FusionNet<T>& net, const std::vector<T>& fused) {
    FusionTrace<T> trace;
    forward_fusion(net, fused, trace);
    std::vector<double> logits(trace.logits.begin(), trace.logits.end());
    const std::vector<double> probs = softmax(logits);
    Prediction p;
    std::copy(probs.begin(), probs.end(), p.probabilities.begin());
    p.cls = argmax_lowest(p.probabilities.data(), 5);
    return p;
}

/// Plurality vote; ties resolve to the lowest class index.
inline int predict_majority(const std::vector<int>& predictions) {
    if (predictions.empty()) throw EmptyInput("no predictions to vote on");
    std::array<int, 5> counts{};
    for (int p : predictions) {
        if (p < 0 || p >= 5) throw LabelOutOfRange("prediction outside [0,5)");
        ++counts[p];
    }
    int best = 0;
    for (int i = 1; i < 5; ++i)
        if (counts[i] > counts[best]) best = i;
    return best;
}

/// Weighted plurality; ties resolve to the lowest class index.
inline int predict_weighted_majority(const std::vector<int>& predictions,
                                     const std::vector<double>& weights) {
    if (predictions.empty()) throw EmptyInput("no predictions to vote on");
    if (predictions.size() != weights.size())
        throw std::invalid_argument("weights must align with predictions");
    double total = 0.0;
    std::array<double, 5> scores{};
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] < 0 || predictions[i] >= 5)
            throw LabelOutOfRange("prediction outside [0,5)");
        if (weights[i] < 0) throw std::invalid_argument("negative vote weight");
        scores[predictions[i]] += weights[i];
        total += weights[i];
    }
    if (total <= 0.0) throw AllZeroWeights("all vote weights are zero");
    int best = 0;
    for (int i = 1; i < 5; ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

}  // namespace slqi
