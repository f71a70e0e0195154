#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "esnnet/eval.hpp"
#include "esnnet/report.hpp"

using namespace esnnet;
using Catch::Approx;

TEST_CASE("stratified split: 100 per class gives 70/30 per class") {
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c) labels.insert(labels.end(), 100, c);
    const SplitPlan plan = stratified_split(labels, 7);
    REQUIRE(plan.train.size() == 210);
    REQUIRE(plan.val.size() == 90);
    std::array<int, 3> train_hist{}, val_hist{};
    for (const std::size_t i : plan.train) ++train_hist[std::size_t(labels[i])];
    for (const std::size_t i : plan.val) ++val_hist[std::size_t(labels[i])];
    for (int c = 0; c < 3; ++c) {
        REQUIRE(train_hist[std::size_t(c)] == 70);
        REQUIRE(val_hist[std::size_t(c)] == 30);
    }
    REQUIRE(plan.test == plan.val);
}

TEST_CASE("stratified split: identical seeds give identical plans") {
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) labels.push_back(i % 3);
    const SplitPlan a = stratified_split(labels, 123);
    const SplitPlan b = stratified_split(labels, 123);
    REQUIRE(a.train == b.train);
    REQUIRE(a.val == b.val);
    const SplitPlan c = stratified_split(labels, 124);
    REQUIRE(a.train != c.train);
}

TEST_CASE("stratified split: 7 samples round to 2 eval / 5 train") {
    std::vector<int> labels(7, 0);
    labels.insert(labels.end(), 10, 1);
    const SplitPlan plan = stratified_split(labels, 5);
    std::size_t eval0 = 0, train0 = 0;
    for (const std::size_t i : plan.val)
        if (labels[i] == 0) ++eval0;
    for (const std::size_t i : plan.train)
        if (labels[i] == 0) ++train0;
    REQUIRE(eval0 == 2);  // round(0.3 * 7) = 2
    REQUIRE(train0 == 5);
}

TEST_CASE("stratified split: class with fewer than two samples is rejected") {
    std::vector<int> labels{0, 0, 1};
    REQUIRE_THROWS_AS(stratified_split(labels, 1), DataError);
}

TEST_CASE("stratified split: disjointness, coverage, per-class balance (property)") {
    RngStream rng(900);
    for (int rep = 0; rep < 60; ++rep) {
        std::vector<int> labels;
        for (int c = 0; c < 3; ++c) {
            const int n = int(rng.uniform_int(2, 40));
            labels.insert(labels.end(), n, c);
        }
        for (std::size_t i = labels.size(); i > 1; --i)
            std::swap(labels[i - 1], labels[std::size_t(rng.uniform_int(0, int64_t(i) - 1))]);
        const SplitPlan plan = stratified_split(labels, rng.next_u64());

        std::set<std::size_t> train(plan.train.begin(), plan.train.end());
        std::set<std::size_t> val(plan.val.begin(), plan.val.end());
        REQUIRE(train.size() == plan.train.size());
        REQUIRE(val.size() == plan.val.size());
        for (const std::size_t i : val) REQUIRE(train.count(i) == 0);
        REQUIRE(train.size() + val.size() == labels.size());

        std::array<double, 3> total{}, in_val{};
        for (std::size_t i = 0; i < labels.size(); ++i) ++total[std::size_t(labels[i])];
        for (const std::size_t i : val) ++in_val[std::size_t(labels[i])];
        for (int c = 0; c < 3; ++c)
            REQUIRE(std::abs(in_val[std::size_t(c)] - 0.3 * total[std::size_t(c)]) <= 1.0);
    }
}

TEST_CASE("loso: one fold per subject, held-out subject never trains") {
    std::vector<int> subjects, labels;
    for (int s = 0; s < 5; ++s)
        for (int i = 0; i < 6; ++i) {
            subjects.push_back(s);
            labels.push_back(i % 3);
        }
    const auto folds = loso_folds(subjects, labels, 11);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> all_test;
    for (const SplitPlan& fold : folds) {
        for (const std::size_t i : fold.train)
            REQUIRE(subjects[i] != fold.held_out_subject);
        for (const std::size_t i : fold.val) REQUIRE(subjects[i] != fold.held_out_subject);
        for (const std::size_t i : fold.test) {
            REQUIRE(subjects[i] == fold.held_out_subject);
            all_test.insert(i);
        }
        std::set<std::size_t> train(fold.train.begin(), fold.train.end());
        for (const std::size_t i : fold.val) REQUIRE(train.count(i) == 0);
    }
    REQUIRE(all_test.size() == subjects.size());  // folds cover the dataset
}

TEST_CASE("loso: single subject is a protocol error") {
    std::vector<int> subjects(10, 3), labels;
    for (int i = 0; i < 10; ++i) labels.push_back(i % 3);
    REQUIRE_THROWS_AS(loso_folds(subjects, labels, 1), DataError);
}

TEST_CASE("metrics: perfect predictions") {
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(i % 3);
    const RunMetrics m = confusion_and_f1(labels, labels);
    REQUIRE(m.accuracy == 1.0);
    for (int c = 0; c < 3; ++c) REQUIRE(m.per_class[std::size_t(c)].f1 == 1.0);
}

TEST_CASE("metrics: everything predicted as class 2 on balanced data") {
    std::vector<int> labels, pred;
    for (int i = 0; i < 30; ++i) {
        labels.push_back(i % 3);
        pred.push_back(2);
    }
    const RunMetrics m = confusion_and_f1(pred, labels);
    REQUIRE(m.accuracy == Approx(1.0 / 3.0).epsilon(1e-12));
    REQUIRE(m.per_class[0].f1 == 0.0);
    REQUIRE(m.per_class[1].f1 == 0.0);
    REQUIRE(m.per_class[2].f1 == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("metrics: hand-computed confusion fixture") {
    // Confusion [[5,1,0],[2,3,1],[0,0,8]] realized as prediction/label pairs.
    std::vector<int> labels, pred;
    const int fixture[3][3] = {{5, 1, 0}, {2, 3, 1}, {0, 0, 8}};
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p)
            for (int n = 0; n < fixture[t][p]; ++n) {
                labels.push_back(t);
                pred.push_back(p);
            }
    const RunMetrics m = confusion_and_f1(pred, labels);
    REQUIRE(m.accuracy == Approx(0.8).epsilon(1e-12));
    REQUIRE(m.per_class[0].f1 == Approx(10.0 / 13.0).epsilon(1e-12));  // P=5/7, R=5/6
}

TEST_CASE("metrics: brute-force recount oracle on random fixtures") {
    RngStream rng(21);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = std::size_t(rng.uniform_int(1, 60));
        std::vector<int> labels(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = int(rng.uniform_int(0, 2));
            pred[i] = int(rng.uniform_int(0, 2));
        }
        const RunMetrics m = confusion_and_f1(pred, labels);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == pred[i]) ++correct;
        REQUIRE(m.accuracy == Approx(double(correct) / double(n)).margin(1e-15));
        for (int k = 0; k < 3; ++k) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (pred[i] == k && labels[i] == k) ++tp;
                if (pred[i] == k && labels[i] != k) ++fp;
                if (pred[i] != k && labels[i] == k) ++fn;
            }
            const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
            const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
            const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
            REQUIRE(m.per_class[std::size_t(k)].f1 == Approx(f1).margin(1e-15));
        }
    }
}

TEST_CASE("metrics: length mismatch is a data error") {
    REQUIRE_THROWS_AS(confusion_and_f1({0, 1}, {0}), DataError);
}

TEST_CASE("aggregate: degenerate and two-point statistics") {
    const AggregateStats single = aggregate_values({0.84});
    REQUIRE(single.mean == 0.84);
    REQUIRE(single.std_dev == 0.0);

    const AggregateStats two = aggregate_values({0.8, 0.9});
    REQUIRE(two.mean == Approx(0.85).epsilon(1e-15));
    REQUIRE(two.std_dev == Approx(0.07071067811865475).epsilon(1e-12));

    const AggregateStats same = aggregate_values({0.7, 0.7, 0.7, 0.7, 0.7});
    REQUIRE(same.std_dev == 0.0);
}

TEST_CASE("report aggregation: per-subject over seeds, macro across subjects") {
    EvalReport report;
    report.protocol = "within-subject";
    report.variant = "full";
    auto add = [&](int subject, std::uint64_t seed, double acc) {
        RunRecord r;
        r.subject = subject;
        r.seed = seed;
        r.metrics.accuracy = acc;
        report.runs.push_back(r);
    };
    add(0, 0, 0.8);
    add(0, 1, 0.9);
    add(1, 0, 0.6);
    add(1, 1, 0.6);
    aggregate_report(report);
    REQUIRE(report.per_subject.size() == 2);
    REQUIRE(report.per_subject[0].accuracy.mean == Approx(0.85));
    REQUIRE(report.per_subject[0].accuracy.std_dev == Approx(0.07071067811865475));
    REQUIRE(report.per_subject[1].accuracy.std_dev == 0.0);
    REQUIRE(report.macro_accuracy.mean == Approx(0.725));
    REQUIRE(report.macro_accuracy.std_dev == Approx(aggregate_values({0.85, 0.6}).std_dev));
}
