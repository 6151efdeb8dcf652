#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "slqi/rng.hpp"

namespace slqi {

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TooFewRuns : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// k test folds over dataset indices; the train set of fold f is everything
/// outside test_folds[f].
struct FoldPlan {
    int k = 0;
    int n = 0;
    std::vector<std::vector<int>> test_folds;

    std::vector<int> train_indices(int fold) const {
        std::vector<bool> in_test(n, false);
        for (int i : test_folds[fold]) in_test[i] = true;
        std::vector<int> train;
        train.reserve(n - test_folds[fold].size());
        for (int i = 0; i < n; ++i)
            if (!in_test[i]) train.push_back(i);
        return train;
    }
};

/// Stratified k-fold split. Without a quota the folds partition the dataset
/// (stratified round-robin deal after a seeded per-class shuffle). With a
/// per-class quota each fold's test set holds exactly `quota` images per
/// class, sampled without replacement across folds; leftovers train in every
/// fold.
inline FoldPlan kfold_split(const std::vector<int>& labels, int k,
                            std::uint64_t seed, int per_class_quota = 0) {
    if (k < 2) throw std::invalid_argument("k must be at least 2");
    const int n = static_cast<int>(labels.size());
    FoldPlan plan;
    plan.k = k;
    plan.n = n;
    plan.test_folds.assign(k, {});

    int n_classes = 0;
    for (int l : labels) n_classes = std::max(n_classes, l + 1);
    std::vector<std::vector<int>> per_class(n_classes);
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0) throw std::invalid_argument("negative class label");
        per_class[labels[i]].push_back(i);
    }

    if (per_class_quota > 0) {
        for (int c = 0; c < n_classes; ++c)
            if (static_cast<int>(per_class[c].size()) < k * per_class_quota)
                throw InsufficientData("class " + std::to_string(c) +
                                       " has fewer than k*quota images");
    } else if (n < k) {
        throw InsufficientData("fewer images than folds");
    }

    for (int c = 0; c < n_classes; ++c) {
        Xoshiro256 rng(splitmix64_at(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(per_class[c]);
        if (per_class_quota > 0) {
            for (int f = 0; f < k; ++f)
                for (int q = 0; q < per_class_quota; ++q)
                    plan.test_folds[f].push_back(
                        per_class[c][static_cast<std::size_t>(f) * per_class_quota + q]);
        } else {
            for (std::size_t pos = 0; pos < per_class[c].size(); ++pos)
                plan.test_folds[pos % k].push_back(per_class[c][pos]);
        }
    }
    for (std::vector<int>& fold : plan.test_folds)
        std::sort(fold.begin(), fold.end());
    return plan;
}

struct ClassificationReport {
    int n = 0;
    double accuracy = 0.0;
    std::array<double, 5> per_class{};
    std::array<int, 5> support{};
    std::array<std::array<int, 5>, 5> confusion{};  // [true][predicted]
};

inline ClassificationReport evaluate_classifier(const std::vector<int>& predictions,
                                                const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw LengthMismatch("predictions and labels differ in length");
    ClassificationReport r;
    r.n = static_cast<int>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= 5 || predictions[i] < 0 ||
            predictions[i] >= 5)
            throw std::out_of_range("class outside [0,5)");
        ++r.confusion[labels[i]][predictions[i]];
        ++r.support[labels[i]];
    }
    int correct = 0;
    for (int c = 0; c < 5; ++c) {
        correct += r.confusion[c][c];
        r.per_class[c] = r.support[c] > 0
                             ? static_cast<double>(r.confusion[c][c]) / r.support[c]
                             : 0.0;
    }
    r.accuracy = r.n > 0 ? static_cast<double>(correct) / r.n : 0.0;
    return r;
}

struct RunSummary {
    std::vector<double> fold_values;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n-1)
};

inline RunSummary summarize_runs(const std::vector<double>& fold_values) {
    if (fold_values.size() < 2)
        throw TooFewRuns("need at least two runs to summarize");
    RunSummary s;
    s.fold_values = fold_values;
    s.mean = std::accumulate(fold_values.begin(), fold_values.end(), 0.0) /
             static_cast<double>(fold_values.size());
    double ss = 0.0;
    for (double v : fold_values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(fold_values.size() - 1));
    return s;
}

/// "99.06 ± 0.66 %" (values already in percent).
inline std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f %%", mean, stddev);
    return buf;
}

inline nlohmann::json report_to_json(const ClassificationReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["per_class"] = r.per_class;
    j["support"] = r.support;
    j["confusion"] = r.confusion;
    return j;
}

inline ClassificationReport report_from_json(const nlohmann::json& j) {
    ClassificationReport r;
    r.n = j.at("n");
    r.accuracy = j.at("accuracy");
    for (int c = 0; c < 5; ++c) {
        r.per_class[c] = j.at("per_class").at(c);
        r.support[c] = j.at("support").at(c);
        for (int p = 0; p < 5; ++p) r.confusion[c][p] = j.at("confusion").at(c).at(p);
    }
    return r;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
    nlohmann::json j;
    j["folds"] = s.fold_values;
    j["mean"] = s.mean;
    j["stddev"] = s.stddev;
    return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j) {
    RunSummary s;
    s.fold_values = j.at("folds").get<std::vector<double>>();
    s.mean = j.at("mean");
    s.stddev = j.at("stddev");
    return s;
}

}  // namespace slqi
