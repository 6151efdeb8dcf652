#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "slqi/dataset.hpp"
#include "slqi/eval.hpp"
#include "slqi/fastloc.hpp"
#include "slqi/fusion.hpp"
#include "slqi/nnet.hpp"
#include "slqi/parallel.hpp"
#include "slqi/roidet.hpp"
#include "slqi/weights.hpp"

namespace slqi {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    std::string dataset_dir = "data";
    std::string weights_dir = "weights";
    std::string reports_dir = "reports";
    GenConfig gen;
    PatchSelectionConfig patches;
    TrainConfig train_global, train_address, train_barcode, train_fastpatch;
    TrainConfig train_fusion;
    FusionConfig fusion;
    DetectorMethod detector = DetectorMethod::Oracle;
    int eval_k = 5;
    std::uint64_t eval_seed = 7;
    int eval_quota = 0;
    double val_fraction = 0.2;

    void validate() const {
        gen.validate();
        patches.validate();
        fusion.validate();
        if (eval_k < 2) throw ConfigError("eval.k must be at least 2");
        if (val_fraction < 0.0 || val_fraction > 0.5)
            throw ConfigError("eval.val_fraction must be in [0, 0.5]");
        for (const TrainConfig* t : {&train_global, &train_address,
                                     &train_barcode, &train_fastpatch,
                                     &train_fusion}) {
            if (t->lr <= 0) throw ConfigError("learning rate must be positive");
            if (t->epochs < 1) throw ConfigError("epochs must be at least 1");
            if (t->batch_size < 1) throw ConfigError("batch size must be positive");
        }
    }

    /// Switch feature dims to the full-size layout (2048 global / 512 local).
    void apply_paper_scale() {
        fusion = FusionConfig::paper_scale();
        fusion.n_p = patches.n_p;
    }
};

namespace pipeline_detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key \"" + key + "\" in " + where);
}

inline TrainConfig train_config_from_json(const nlohmann::json& j,
                                          const TrainConfig& defaults,
                                          const std::string& where) {
    reject_unknown_keys(
        j, {"lr", "momentum", "epochs", "batch_size", "seed", "input_side"},
        where);
    TrainConfig c = defaults;
    if (j.contains("lr")) c.lr = j["lr"];
    if (j.contains("momentum")) c.momentum = j["momentum"];
    if (j.contains("epochs")) c.epochs = j["epochs"];
    if (j.contains("batch_size")) c.batch_size = j["batch_size"];
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("input_side")) c.input_side = j["input_side"];
    return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["lr"] = c.lr;
    j["momentum"] = c.momentum;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["input_side"] = c.input_side;
    return j;
}

}  // namespace pipeline_detail

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    using pipeline_detail::reject_unknown_keys;
    using pipeline_detail::train_config_from_json;
    reject_unknown_keys(
        j, {"paths", "gen", "patches", "train", "fusion", "detector", "eval"},
        "config root");
    PipelineConfig c;
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        reject_unknown_keys(p, {"dataset_dir", "weights_dir", "reports_dir"},
                            "paths");
        if (p.contains("dataset_dir")) c.dataset_dir = p["dataset_dir"];
        if (p.contains("weights_dir")) c.weights_dir = p["weights_dir"];
        if (p.contains("reports_dir")) c.reports_dir = p["reports_dir"];
    }
    if (j.contains("gen")) {
        reject_unknown_keys(j["gen"],
                            {"per_class_count", "per_class_override",
                             "image_size_range", "master_seed", "font_scale",
                             "margin", "intensity"},
                            "gen");
        c.gen = gen_config_from_json(j["gen"]);
    }
    if (j.contains("patches")) {
        const auto& p = j["patches"];
        reject_unknown_keys(p, {"t", "patch_w", "patch_h", "n_p"}, "patches");
        if (p.contains("t")) c.patches.t = p["t"];
        if (p.contains("patch_w")) c.patches.patch_w = p["patch_w"];
        if (p.contains("patch_h")) c.patches.patch_h = p["patch_h"];
        if (p.contains("n_p")) c.patches.n_p = p["n_p"];
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        reject_unknown_keys(
            t, {"global", "address", "barcode", "fastpatch", "fusion"}, "train");
        if (t.contains("global"))
            c.train_global = train_config_from_json(t["global"], c.train_global,
                                                    "train.global");
        if (t.contains("address"))
            c.train_address = train_config_from_json(t["address"],
                                                     c.train_address,
                                                     "train.address");
        if (t.contains("barcode"))
            c.train_barcode = train_config_from_json(t["barcode"],
                                                     c.train_barcode,
                                                     "train.barcode");
        if (t.contains("fastpatch"))
            c.train_fastpatch = train_config_from_json(t["fastpatch"],
                                                       c.train_fastpatch,
                                                       "train.fastpatch");
        if (t.contains("fusion"))
            c.train_fusion = train_config_from_json(t["fusion"], c.train_fusion,
                                                    "train.fusion");
    }
    if (j.contains("fusion")) {
        const auto& f = j["fusion"];
        reject_unknown_keys(f, {"global_dim", "local_dim", "hidden1", "hidden2"},
                            "fusion");
        if (f.contains("global_dim")) c.fusion.global_dim = f["global_dim"];
        if (f.contains("local_dim")) c.fusion.local_dim = f["local_dim"];
        if (f.contains("hidden1")) c.fusion.hidden1 = f["hidden1"];
        if (f.contains("hidden2")) c.fusion.hidden2 = f["hidden2"];
    }
    if (j.contains("detector")) {
        const std::string d = j["detector"];
        if (d == "oracle")
            c.detector = DetectorMethod::Oracle;
        else if (d == "classical")
            c.detector = DetectorMethod::Classical;
        else
            throw ConfigError("detector must be \"oracle\" or \"classical\"");
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        reject_unknown_keys(e, {"k", "seed", "quota", "val_fraction"}, "eval");
        if (e.contains("k")) c.eval_k = e["k"];
        if (e.contains("seed")) c.eval_seed = e["seed"];
        if (e.contains("quota")) c.eval_quota = e["quota"];
        if (e.contains("val_fraction")) c.val_fraction = e["val_fraction"];
    }
    c.fusion.n_p = c.patches.n_p;
    c.validate();
    return c;
}

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
    using pipeline_detail::train_config_to_json;
    nlohmann::json j;
    j["paths"] = {{"dataset_dir", c.dataset_dir},
                  {"weights_dir", c.weights_dir},
                  {"reports_dir", c.reports_dir}};
    j["gen"] = gen_config_to_json(c.gen);
    j["patches"] = {{"t", c.patches.t},
                    {"patch_w", c.patches.patch_w},
                    {"patch_h", c.patches.patch_h},
                    {"n_p", c.patches.n_p}};
    j["train"] = {{"global", train_config_to_json(c.train_global)},
                  {"address", train_config_to_json(c.train_address)},
                  {"barcode", train_config_to_json(c.train_barcode)},
                  {"fastpatch", train_config_to_json(c.train_fastpatch)},
                  {"fusion", train_config_to_json(c.train_fusion)}};
    j["fusion"] = {{"global_dim", c.fusion.global_dim},
                   {"local_dim", c.fusion.local_dim},
                   {"hidden1", c.fusion.hidden1},
                   {"hidden2", c.fusion.hidden2}};
    j["detector"] = c.detector == DetectorMethod::Oracle ? "oracle" : "classical";
    j["eval"] = {{"k", c.eval_k},
                 {"seed", c.eval_seed},
                 {"quota", c.eval_quota},
                 {"val_fraction", c.val_fraction}};
    return j;
}

/// All four branch inputs for one image, precomputed once and shared
/// between folds.
struct PreparedSample {
    int label = 0;
    Tensor<float> global, address, barcode;
    std::vector<Tensor<float>> patches;
};

/// Crop boxes for the local branches: annotation boxes under the oracle
/// detector, detected boxes (full image as fallback) under the classical one.
inline std::pair<BoundingBox, BoundingBox> roi_boxes(const Raster& img,
                                                     const Annotation* ann,
                                                     DetectorMethod method) {
    if (method == DetectorMethod::Oracle)
        return {detect_rois(img, method, ann)[0].box,
                detect_rois(img, method, ann)[1].box};
    const BoundingBox whole{0, 0, img.width, img.height};
    BoundingBox bc = whole, addr = whole;
    for (const Detection& d : detect_rois(img, DetectorMethod::Classical))
        (d.kind == RegionKind::Barcode ? bc : addr) = d.box;
    return {bc, addr};
}

inline PreparedSample prepare_sample(const Raster& img, const Annotation& ann,
                                     const PipelineConfig& cfg) {
    PreparedSample s;
    s.label = static_cast<int>(ann.cls);
    const auto [bc_box, addr_box] = roi_boxes(img, &ann, cfg.detector);
    s.global = prepare_input<float>(img, cfg.train_global.input_side);
    s.address = prepare_input<float>(crop(img, addr_box),
                                     cfg.train_address.input_side);
    s.barcode = prepare_input<float>(crop(img, bc_box),
                                     cfg.train_barcode.input_side);
    const PatchSet ps = select_patches(img, cfg.patches);
    for (const Raster& p : ps.patches)
        s.patches.push_back(prepare_input<float>(p, cfg.train_fastpatch.input_side));
    return s;
}

inline std::vector<PreparedSample> prepare_samples(
    const DatasetManifest& manifest, const std::filesystem::path& root,
    const PipelineConfig& cfg) {
    std::vector<PreparedSample> out(manifest.entries.size());
    parallel_for(manifest.entries.size(), [&](std::size_t i) {
        const Annotation& ann = manifest.entries[i];
        const Raster img = read_pnm(read_file(root / ann.image_path));
        out[i] = prepare_sample(img, ann, cfg);
    });
    return out;
}

struct BranchModels {
    ExtractorNet<float> global, address, barcode, fastpatch;
    FusionNet<float> fusion;
    std::array<double, 4> val_accuracy{};  // weighted-majority weights
};

namespace pipeline_detail {

/// Stratified fit/validation split of `indices`.
inline std::pair<std::vector<int>, std::vector<int>> split_fit_val(
    const std::vector<PreparedSample>& samples, const std::vector<int>& indices,
    double val_fraction, std::uint64_t seed) {
    std::vector<std::vector<int>> per_class(kNumClasses);
    for (int i : indices) per_class[samples[i].label].push_back(i);
    std::vector<int> fit, val;
    for (int c = 0; c < kNumClasses; ++c) {
        Xoshiro256 rng(splitmix64_at(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(per_class[c]);
        std::size_t n_val = static_cast<std::size_t>(
            val_fraction * static_cast<double>(per_class[c].size()) + 0.5);
        if (val_fraction > 0 && !per_class[c].empty())
            n_val = std::max<std::size_t>(1, n_val);
        n_val = std::min(n_val, per_class[c].size());
        for (std::size_t i = 0; i < per_class[c].size(); ++i)
            (i < n_val ? val : fit).push_back(per_class[c][i]);
    }
    std::sort(fit.begin(), fit.end());
    std::sort(val.begin(), val.end());
    if (fit.empty()) fit = indices;  // degenerate split: train on everything
    if (val.empty()) val = fit;
    return {fit, val};
}

inline int head_prediction(const ExtractorNet<float>& net,
                           const Tensor<float>& input) {
    ExtractorTrace<float> trace;
    forward_extractor(net, input, trace);
    std::array<double, 5> logits;
    for (int i = 0; i < 5; ++i) logits[i] = trace.logits.data[i];
    return argmax_lowest(logits.data(), 5);
}

inline int fastpatch_prediction(const ExtractorNet<float>& net,
                                const std::vector<Tensor<float>>& patches) {
    std::vector<int> votes;
    for (const Tensor<float>& p : patches) votes.push_back(head_prediction(net, p));
    return predict_majority(votes);
}

}  // namespace pipeline_detail

/// Train the four branch extractors and the fusion head on `train_idx`.
/// An internal stratified fit/val split supplies the held-out accuracies
/// used as weighted-majority weights.
inline BranchModels train_models(const std::vector<PreparedSample>& samples,
                                 const std::vector<int>& train_idx,
                                 const PipelineConfig& cfg, int fold) {
    using pipeline_detail::split_fit_val;
    if (train_idx.empty()) throw EmptyDataset("no training images");
    const auto [fit, val] = split_fit_val(
        samples, train_idx, cfg.val_fraction,
        splitmix64_at(cfg.eval_seed, 900 + static_cast<std::uint64_t>(fold)));

    BranchModels models;
    const std::array<BranchId, 4> branches = {BranchId::Global, BranchId::Address,
                                              BranchId::Barcode, BranchId::FastPatch};
    std::array<const TrainConfig*, 4> tcfg = {&cfg.train_global, &cfg.train_address,
                                              &cfg.train_barcode, &cfg.train_fastpatch};
    std::array<ExtractorNet<float>*, 4> nets = {&models.global, &models.address,
                                                &models.barcode, &models.fastpatch};

    std::array<std::string, 4> errors;
    parallel_for(4, [&](std::size_t b) {
        try {
            std::vector<Tensor<float>> inputs;
            std::vector<int> labels;
            for (int i : fit) {
                const PreparedSample& s = samples[i];
                if (branches[b] == BranchId::FastPatch) {
                    for (const Tensor<float>& p : s.patches) {
                        inputs.push_back(p);
                        labels.push_back(s.label);
                    }
                } else {
                    inputs.push_back(branches[b] == BranchId::Global ? s.global
                                     : branches[b] == BranchId::Address
                                         ? s.address
                                         : s.barcode);
                    labels.push_back(s.label);
                }
            }
            TrainConfig tc = *tcfg[b];
            tc.seed = splitmix64_at(tc.seed, static_cast<std::uint64_t>(fold));
            const int fd = branches[b] == BranchId::Global ? cfg.fusion.global_dim
                                                           : cfg.fusion.local_dim;
            *nets[b] = train_extractor(inputs, labels, branches[b], fd, tc).net;
        } catch (const std::exception& e) {
            errors[b] = e.what();
        }
    });
    for (const std::string& e : errors)
        if (!e.empty()) throw NumericFault("branch training failed: " + e);

    // held-out accuracy per branch
    for (std::size_t b = 0; b < 4; ++b) {
        int correct = 0;
        for (int i : val) {
            const PreparedSample& s = samples[i];
            const int pred =
                branches[b] == BranchId::FastPatch
                    ? pipeline_detail::fastpatch_prediction(*nets[b], s.patches)
                    : pipeline_detail::head_prediction(
                          *nets[b], branches[b] == BranchId::Global ? s.global
                                    : branches[b] == BranchId::Address
                                        ? s.address
                                        : s.barcode);
            correct += pred == s.label;
        }
        models.val_accuracy[b] =
            val.empty() ? 0.0 : static_cast<double>(correct) / val.size();
    }

    // frozen-extractor features for the stacked head
    std::vector<std::vector<float>> features(fit.size());
    std::vector<int> labels(fit.size());
    parallel_for(fit.size(), [&](std::size_t i) {
        const PreparedSample& s = samples[fit[i]];
        FeatureVector<float> g{BranchId::Global,
                               forward_features(models.global, s.global)};
        FeatureVector<float> a{BranchId::Address,
                               forward_features(models.address, s.address)};
        FeatureVector<float> bc{BranchId::Barcode,
                                forward_features(models.barcode, s.barcode)};
        std::vector<FeatureVector<float>> patches;
        for (const Tensor<float>& p : s.patches)
            patches.push_back({BranchId::FastPatch,
                               forward_features(models.fastpatch, p)});
        features[i] = fuse_features(g, a, bc, patches, cfg.fusion);
        labels[i] = s.label;
    });
    TrainConfig fc = cfg.train_fusion;
    fc.seed = splitmix64_at(fc.seed, static_cast<std::uint64_t>(fold));
    models.fusion = train_fusion_head(features, labels, cfg.fusion, fc).net;
    return models;
}

struct SamplePredictions {
    int stacked = 0;
    int majority = 0;
    int weighted = 0;
    int global_only = 0;
    std::array<double, 5> probabilities{};
};

inline SamplePredictions predict_sample(const BranchModels& models,
                                        const PreparedSample& s,
                                        const FusionConfig& fusion_cfg) {
    ExtractorTrace<float> trace;
    const auto run = [&trace](const ExtractorNet<float>& net,
                              const Tensor<float>& input,
                              std::vector<float>& feat) {
        forward_extractor(net, input, trace);
        feat = trace.feat.data;
        std::array<double, 5> logits;
        for (int i = 0; i < 5; ++i) logits[i] = trace.logits.data[i];
        return argmax_lowest(logits.data(), 5);
    };

    std::vector<float> feat_g, feat_a, feat_b;
    const int pred_g = run(models.global, s.global, feat_g);
    const int pred_a = run(models.address, s.address, feat_a);
    const int pred_b = run(models.barcode, s.barcode, feat_b);
    std::vector<FeatureVector<float>> patch_feats;
    std::vector<int> patch_votes;
    for (const Tensor<float>& p : s.patches) {
        std::vector<float> f;
        patch_votes.push_back(run(models.fastpatch, p, f));
        patch_feats.push_back({BranchId::FastPatch, std::move(f)});
    }
    const int pred_f = predict_majority(patch_votes);

    SamplePredictions out;
    const std::vector<float> fused =
        fuse_features({BranchId::Global, feat_g}, {BranchId::Address, feat_a},
                      {BranchId::Barcode, feat_b}, patch_feats, fusion_cfg);
    const Prediction stacked = predict_stacked(models.fusion, fused);
    out.stacked = stacked.cls;
    out.probabilities = stacked.probabilities;
    const std::vector<int> votes = {pred_g, pred_a, pred_b, pred_f};
    out.majority = predict_majority(votes);
    out.weighted = predict_weighted_majority(
        votes, {models.val_accuracy[0], models.val_accuracy[1],
                models.val_accuracy[2], models.val_accuracy[3]});
    out.global_only = pred_g;
    return out;
}

/// Cross-validated comparison of the four decision rules.
struct ExperimentResult {
    FoldPlan plan;
    RunSummary stacked, majority, weighted, global_only;  // percent
    ClassificationReport stacked_total, global_total;     // pooled over folds
};

inline ExperimentResult run_experiment(const std::vector<PreparedSample>& samples,
                                       const PipelineConfig& cfg) {
    std::vector<int> labels;
    for (const PreparedSample& s : samples) labels.push_back(s.label);
    ExperimentResult res;
    res.plan = kfold_split(labels, cfg.eval_k, cfg.eval_seed, cfg.eval_quota);

    std::vector<double> acc_stacked, acc_majority, acc_weighted, acc_global;
    std::vector<int> pooled_stacked, pooled_global, pooled_labels;
    for (int fold = 0; fold < res.plan.k; ++fold) {
        const std::vector<int> train_idx = res.plan.train_indices(fold);
        const BranchModels models = train_models(samples, train_idx, cfg, fold);
        const std::vector<int>& test_idx = res.plan.test_folds[fold];

        std::vector<SamplePredictions> preds(test_idx.size());
        parallel_for(test_idx.size(), [&](std::size_t i) {
            preds[i] = predict_sample(models, samples[test_idx[i]], cfg.fusion);
        });

        std::vector<int> truth, p_st, p_mj, p_wt, p_gl;
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            truth.push_back(samples[test_idx[i]].label);
            p_st.push_back(preds[i].stacked);
            p_mj.push_back(preds[i].majority);
            p_wt.push_back(preds[i].weighted);
            p_gl.push_back(preds[i].global_only);
        }
        acc_stacked.push_back(100.0 * evaluate_classifier(p_st, truth).accuracy);
        acc_majority.push_back(100.0 * evaluate_classifier(p_mj, truth).accuracy);
        acc_weighted.push_back(100.0 * evaluate_classifier(p_wt, truth).accuracy);
        acc_global.push_back(100.0 * evaluate_classifier(p_gl, truth).accuracy);
        pooled_labels.insert(pooled_labels.end(), truth.begin(), truth.end());
        pooled_stacked.insert(pooled_stacked.end(), p_st.begin(), p_st.end());
        pooled_global.insert(pooled_global.end(), p_gl.begin(), p_gl.end());
    }
    res.stacked = summarize_runs(acc_stacked);
    res.majority = summarize_runs(acc_majority);
    res.weighted = summarize_runs(acc_weighted);
    res.global_only = summarize_runs(acc_global);
    res.stacked_total = evaluate_classifier(pooled_stacked, pooled_labels);
    res.global_total = evaluate_classifier(pooled_global, pooled_labels);
    return res;
}

inline nlohmann::json experiment_to_json(const ExperimentResult& r) {
    nlohmann::json j;
    j["k"] = r.plan.k;
    j["methods"] = {{"global_only", summary_to_json(r.global_only)},
                    {"majority", summary_to_json(r.majority)},
                    {"weighted_majority", summary_to_json(r.weighted)},
                    {"stacked_fusion", summary_to_json(r.stacked)}};
    j["pooled"] = {{"stacked_fusion", report_to_json(r.stacked_total)},
                   {"global_only", report_to_json(r.global_total)}};
    return j;
}

/// Methods comparison in the mean ± std table layout.
inline std::string format_methods_table(const ExperimentResult& r) {
    std::string out;
    const auto row = [&out](const std::string& name, const RunSummary& s) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%-44s %s\n", name.c_str(),
                      format_mean_std(s.mean, s.stddev).c_str());
        out += buf;
    };
    out += "Method                                       Accuracy\n";
    row("Only global features", r.global_only);
    row("Global-local fusion (majority voting)", r.majority);
    row("Global-local fusion (weighted majority)", r.weighted);
    row("Global-local fusion (stacked)", r.stacked);
    return out;
}

/// Per-class accuracy breakdown, global-only vs stacked fusion.
inline std::string format_class_table(const ExperimentResult& r) {
    std::string out = "Class          Only global    Global-local fusion\n";
    for (int c = 0; c < kNumClasses; ++c) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%-14s %6.2f %%       %6.2f %%\n",
                      class_name(static_cast<QualityClass>(c)),
                      100.0 * r.global_total.per_class[c],
                      100.0 * r.stacked_total.per_class[c]);
        out += buf;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-14s %6.2f %%       %6.2f %%\n", "total",
                  100.0 * r.global_total.accuracy, 100.0 * r.stacked_total.accuracy);
    out += buf;
    return out;
}

}  // namespace slqi
