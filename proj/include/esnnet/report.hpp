#pragma once

// EvalReport: the machine-readable record of an experiment, serialized as
// JSON with deterministic key order plus an aligned text rendering with one
// row per subject and a macro-average row.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esnnet/eval.hpp"

namespace esnnet {

struct RunRecord {
    int subject = 0;  // evaluated subject (held-out one for LOSO)
    std::uint64_t seed = 0;
    RunMetrics metrics;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
};

struct SubjectSummary {
    int subject = 0;
    AggregateStats accuracy;
    std::array<AggregateStats, 3> f1;
};

struct EvalReport {
    std::string protocol;  // "within-subject" | "loso"
    std::string variant;   // "full" | "conv-only"
    std::vector<RunRecord> runs;
    std::vector<SubjectSummary> per_subject;
    AggregateStats macro_accuracy;        // across per-subject means
    std::array<AggregateStats, 3> macro_f1;
};

/// Fills per-subject and macro aggregates from the raw runs. Per subject:
/// mean and sample std over seeds. Macro row: statistics of the per-subject
/// means across subjects (single-subject reports degenerate to std 0).
inline void aggregate_report(EvalReport& report) {
    std::map<int, std::vector<const RunRecord*>> by_subject;
    for (const RunRecord& r : report.runs) by_subject[r.subject].push_back(&r);

    report.per_subject.clear();
    std::vector<double> subject_acc_means;
    std::array<std::vector<double>, 3> subject_f1_means;
    for (const auto& [subject, runs] : by_subject) {
        SubjectSummary s;
        s.subject = subject;
        std::vector<double> acc;
        std::array<std::vector<double>, 3> f1;
        for (const RunRecord* r : runs) {
            acc.push_back(r->metrics.accuracy);
            for (std::size_t k = 0; k < 3; ++k) f1[k].push_back(r->metrics.per_class[k].f1);
        }
        s.accuracy = aggregate_values(acc);
        for (std::size_t k = 0; k < 3; ++k) s.f1[k] = aggregate_values(f1[k]);
        subject_acc_means.push_back(s.accuracy.mean);
        for (std::size_t k = 0; k < 3; ++k) subject_f1_means[k].push_back(s.f1[k].mean);
        report.per_subject.push_back(std::move(s));
    }
    report.macro_accuracy = aggregate_values(subject_acc_means);
    for (std::size_t k = 0; k < 3; ++k) report.macro_f1[k] = aggregate_values(subject_f1_means[k]);
}

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["protocol"] = report.protocol;
    j["variant"] = report.variant;
    j["runs"] = nlohmann::ordered_json::array();
    for (const RunRecord& r : report.runs) {
        nlohmann::ordered_json rj;
        rj["subject"] = r.subject;
        rj["seed"] = r.seed;
        rj["accuracy"] = r.metrics.accuracy;
        rj["confusion"] = r.metrics.confusion;
        for (std::size_t k = 0; k < 3; ++k) {
            rj["precision"].push_back(r.metrics.per_class[k].precision);
            rj["recall"].push_back(r.metrics.per_class[k].recall);
            rj["f1"].push_back(r.metrics.per_class[k].f1);
        }
        rj["epochs_run"] = r.epochs_run;
        rj["best_epoch"] = r.best_epoch;
        rj["best_val_accuracy"] = r.best_val_accuracy;
        j["runs"].push_back(std::move(rj));
    }
    j["per_subject"] = nlohmann::ordered_json::array();
    for (const SubjectSummary& s : report.per_subject) {
        nlohmann::ordered_json sj;
        sj["subject"] = s.subject;
        sj["accuracy_mean"] = s.accuracy.mean;
        sj["accuracy_std"] = s.accuracy.std_dev;
        for (std::size_t k = 0; k < 3; ++k) {
            sj["f1_mean"].push_back(s.f1[k].mean);
            sj["f1_std"].push_back(s.f1[k].std_dev);
        }
        j["per_subject"].push_back(std::move(sj));
    }
    j["macro"] = {{"accuracy_mean", report.macro_accuracy.mean},
                  {"accuracy_std", report.macro_accuracy.std_dev},
                  {"f1_mean",
                   {report.macro_f1[0].mean, report.macro_f1[1].mean, report.macro_f1[2].mean}},
                  {"f1_std",
                   {report.macro_f1[0].std_dev, report.macro_f1[1].std_dev,
                    report.macro_f1[2].std_dev}}};
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.protocol = j.at("protocol").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    for (const auto& rj : j.at("runs")) {
        RunRecord run;
        run.subject = rj.at("subject").get<int>();
        run.seed = rj.at("seed").get<std::uint64_t>();
        run.metrics.accuracy = rj.at("accuracy").get<double>();
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b)
                run.metrics.confusion[a][b] = rj.at("confusion")[a][b].get<std::size_t>();
        run.metrics.total = 0;
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) run.metrics.total += run.metrics.confusion[a][b];
        for (std::size_t k = 0; k < 3; ++k) {
            run.metrics.per_class[k].precision = rj.at("precision")[k].get<double>();
            run.metrics.per_class[k].recall = rj.at("recall")[k].get<double>();
            run.metrics.per_class[k].f1 = rj.at("f1")[k].get<double>();
        }
        run.epochs_run = rj.at("epochs_run").get<std::size_t>();
        run.best_epoch = rj.at("best_epoch").get<std::size_t>();
        run.best_val_accuracy = rj.at("best_val_accuracy").get<double>();
        r.runs.push_back(std::move(run));
    }
    aggregate_report(r);
    return r;
}

inline void write_report(const EvalReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("report: cannot write " + path);
    os << report_to_json(report).dump(2) << '\n';
    if (!os) throw IoError("report: write failed for " + path);
}

inline EvalReport read_report(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("report: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report " + path + ": " + e.what());
    }
    return report_from_json(j);
}

/// Aligned text table: accuracy mean +- std per subject plus a macro-average
/// row, then per-class F1. With several reports, one column group per model.
inline std::string render_report_table(const std::vector<EvalReport>& reports) {
    if (reports.empty()) return "(no reports)\n";
    std::string out;
    char buf[160];

    std::set<int> subjects;
    for (const EvalReport& r : reports)
        for (const SubjectSummary& s : r.per_subject) subjects.insert(s.subject);

    out += "Accuracy (mean +- std across seeds, % )\n";
    std::snprintf(buf, sizeof(buf), "%-16s", "Subject");
    out += buf;
    for (const EvalReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "  %-20s", (r.variant + " (" + r.protocol + ")").c_str());
        out += buf;
    }
    out += '\n';
    for (const int subject : subjects) {
        std::snprintf(buf, sizeof(buf), "Subject %-8d", subject);
        out += buf;
        for (const EvalReport& r : reports) {
            const auto it = std::find_if(r.per_subject.begin(), r.per_subject.end(),
                                         [&](const SubjectSummary& s) { return s.subject == subject; });
            if (it == r.per_subject.end())
                std::snprintf(buf, sizeof(buf), "  %-20s", "-");
            else
                std::snprintf(buf, sizeof(buf), "  %5.1f +- %-4.1f %%     ", 100.0 * it->accuracy.mean,
                              100.0 * it->accuracy.std_dev);
            out += buf;
        }
        out += '\n';
    }
    std::snprintf(buf, sizeof(buf), "%-16s", "Macro Average");
    out += buf;
    for (const EvalReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "  %5.1f +- %-4.1f %%     ", 100.0 * r.macro_accuracy.mean,
                      100.0 * r.macro_accuracy.std_dev);
        out += buf;
    }
    out += "\n\nPer-class F1 (macro across subjects)\n";
    std::snprintf(buf, sizeof(buf), "%-16s%-12s%-12s%-12s\n", "Model", "Backside", "Frontside",
                  "Pumping");
    out += buf;
    for (const EvalReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "%-16s%-12.2f%-12.2f%-12.2f\n", r.variant.c_str(),
                      r.macro_f1[0].mean, r.macro_f1[1].mean, r.macro_f1[2].mean);
        out += buf;
    }
    return out;
}

}  // namespace esnnet
