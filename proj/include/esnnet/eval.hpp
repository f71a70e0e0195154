#pragma once

// Evaluation protocols and metrics: stratified within-subject splits,
// leave-one-subject-out folds, confusion matrices with per-class F1, and
// multi-seed aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "esnnet/common.hpp"
#include "esnnet/rng.hpp"

namespace esnnet {

enum class SplitScheme { stratified_holdout, loso };

struct SplitPlan {
    std::vector<std::size_t> train;  // gradient updates
    std::vector<std::size_t> val;    // early-stopping monitor
    std::vector<std::size_t> test;   // reported metrics (== val for holdout)
    SplitScheme scheme = SplitScheme::stratified_holdout;
    std::uint64_t seed = 0;
    int held_out_subject = -1;  // loso only
};

/// Per class: seeded shuffle, then the first round(eval_fraction * n_c)
/// indices become the evaluation set and the rest train.
inline SplitPlan stratified_split(const std::vector<int>& labels, std::uint64_t seed,
                                  double eval_fraction = 0.3) {
    std::map<int, std::vector<std::size_t>> per_class;
    for (std::size_t i = 0; i < labels.size(); ++i) per_class[labels[i]].push_back(i);
    for (const auto& [cls, idx] : per_class)
        if (idx.size() < 2)
            throw DataError("stratified split: class " + std::to_string(cls) + " has only " +
                            std::to_string(idx.size()) + " sample(s)");

    SplitPlan plan;
    plan.scheme = SplitScheme::stratified_holdout;
    plan.seed = seed;
    RngStream rng = RngStream(seed).fork("stratified-split");
    for (auto& [cls, idx] : per_class) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, int64_t(i) - 1))]);
        const std::size_t n_eval =
            static_cast<std::size_t>(std::lround(eval_fraction * double(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_eval ? plan.val : plan.train).push_back(idx[i]);
    }
    std::sort(plan.train.begin(), plan.train.end());
    std::sort(plan.val.begin(), plan.val.end());
    plan.test = plan.val;
    return plan;
}

/// One fold per distinct subject; the held-out subject contributes nothing to
/// any training-time computation. Early stopping monitors a stratified
/// carve-out of the training pool, never the held-out subject.
inline std::vector<SplitPlan> loso_folds(const std::vector<int>& subjects,
                                         const std::vector<int>& labels, std::uint64_t seed,
                                         double val_fraction = 0.3) {
    if (subjects.size() != labels.size())
        throw DataError("loso: subject and label lists differ in length");
    std::set<int> distinct(subjects.begin(), subjects.end());
    if (distinct.size() < 2)
        throw DataError("loso: needs at least two distinct subjects, got " +
                        std::to_string(distinct.size()));

    std::vector<SplitPlan> folds;
    for (const int held : distinct) {
        SplitPlan plan;
        plan.scheme = SplitScheme::loso;
        plan.seed = seed;
        plan.held_out_subject = held;

        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < subjects.size(); ++i)
            (subjects[i] == held ? plan.test : pool).push_back(i);

        // Inner stratified split of the training pool for the early stopper.
        std::vector<int> pool_labels(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool_labels[i] = labels[pool[i]];
        const SplitPlan inner =
            stratified_split(pool_labels, RngStream(seed).fork("loso-inner", held).seed(),
                             val_fraction);
        for (const std::size_t i : inner.train) plan.train.push_back(pool[i]);
        for (const std::size_t i : inner.val) plan.val.push_back(pool[i]);
        std::sort(plan.train.begin(), plan.train.end());
        std::sort(plan.val.begin(), plan.val.end());
        folds.push_back(std::move(plan));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ClassMetrics {
    double precision = 0, recall = 0, f1 = 0;
};

/// Confusion matrix and derived per-class metrics for one evaluation run.
struct RunMetrics {
    std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][pred]
    double accuracy = 0;
    std::array<ClassMetrics, 3> per_class{};
    std::size_t total = 0;
};

/// confusion[i][j] counts true class i predicted as j; F1 = 2PR/(P+R) with
/// the convention 0 when P + R == 0.
inline RunMetrics confusion_and_f1(const std::vector<int>& predictions,
                                   const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw DataError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
    RunMetrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 2 || predictions[i] < 0 || predictions[i] > 2)
            throw DataError("metrics: class index out of range at position " + std::to_string(i));
        ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }
    m.total = labels.size();
    std::size_t correct = 0;
    for (int k = 0; k < 3; ++k) correct += m.confusion[k][k];
    m.accuracy = m.total ? double(correct) / double(m.total) : 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t tp = m.confusion[k][k], pred_k = 0, true_k = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            pred_k += m.confusion[j][k];
            true_k += m.confusion[k][j];
        }
        const double p = pred_k ? double(tp) / double(pred_k) : 0.0;
        const double r = true_k ? double(tp) / double(true_k) : 0.0;
        m.per_class[k].precision = p;
        m.per_class[k].recall = r;
        m.per_class[k].f1 = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    return m;
}

struct AggregateStats {
    double mean = 0, std_dev = 0;  // sample standard deviation (n - 1)
    std::size_t count = 0;
};

inline AggregateStats aggregate_values(const std::vector<double>& values) {
    AggregateStats s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0;
    for (const double v : values) sum += v;
    s.mean = sum / double(values.size());
    if (values.size() > 1) {
        double ss = 0;
        for (const double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std_dev = std::sqrt(ss / double(values.size() - 1));
    }
    return s;
}

}  // namespace esnnet
