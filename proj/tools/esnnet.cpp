// Command-line entry point: dataset synthesis, training under the
// within-subject and LOSO protocols, checkpoint evaluation, and report
// rendering. Exit codes: 0 ok, 2 config, 3 data, 4 numeric, 5 I/O.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "esnnet/esnnet.hpp"

namespace fs = std::filesystem;
using namespace esnnet;

namespace {

void write_effective_config(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream os(fs::path(dir) / "config.json", std::ios::trunc);
    os << cfg.effective.dump(2) << '\n';
    if (!os) throw IoError("cannot write resolved config into " + dir);
}

void emit_report(const EvalReport& report, const std::string& dir) {
    write_report(report, (fs::path(dir) / "report.json").string());
    const std::string table = render_report_table({report});
    std::ofstream os(fs::path(dir) / "report.txt", std::ios::trunc);
    os << table;
    std::cout << table;
}

int cmd_synth(const RunConfig& cfg) {
    const Dataset ds = synth_generate(cfg.synth);
    const std::string manifest = write_dataset(ds, cfg.out_dir);
    write_effective_config(cfg, cfg.out_dir);
    std::size_t events = 0;
    for (const Trial& t : ds.trials) events += t.events.size();
    std::printf("wrote %zu trials (%zu events, %zu subjects) -> %s\n", ds.trials.size(), events,
                cfg.synth.subjects, manifest.c_str());
    return exit_code::ok;
}

template <Scalar T>
int cmd_train_typed(const RunConfig& cfg) {
    write_effective_config(cfg, cfg.out_dir);
    const std::vector<Segment<T>> segments = prepare_segments<T>(cfg);
    RunPaths paths;
    paths.out_dir = cfg.out_dir;
    const EvalReport report = cfg.protocol == Protocol::loso
                                  ? run_loso(segments, cfg, paths)
                                  : run_within_subject(segments, cfg, paths);
    emit_report(report, cfg.out_dir);
    return exit_code::ok;
}

int cmd_train(const RunConfig& cfg, Protocol protocol) {
    RunConfig actual = cfg;
    actual.protocol = protocol;
    return actual.precision == "f64" ? cmd_train_typed<double>(actual)
                                     : cmd_train_typed<float>(actual);
}

template <Scalar T>
int cmd_eval_typed(const RunConfig& cfg, const std::string& checkpoint) {
    EsnNet<T> model = load_checkpoint<T>(checkpoint);
    const std::vector<Segment<T>> segments = prepare_segments<T>(cfg);
    std::vector<const Segment<T>*> pool;
    std::vector<std::size_t> indices;
    std::vector<int> labels;
    for (const Segment<T>& s : segments) {
        indices.push_back(pool.size());
        pool.push_back(&s);
        labels.push_back(s.label);
    }
    const std::vector<int> pred = evaluate(model, pool, indices, model.config().batch_size);
    const RunMetrics metrics = confusion_and_f1(pred, labels);

    EvalReport report;
    report.protocol = "eval";
    report.variant = variant_name(model.variant());
    RunRecord record;
    record.subject = -1;
    record.seed = model.build_seed();
    record.metrics = metrics;
    report.runs.push_back(record);
    aggregate_report(report);
    fs::create_directories(cfg.out_dir);
    write_effective_config(cfg, cfg.out_dir);
    emit_report(report, cfg.out_dir);
    std::printf("accuracy %.4f over %zu segments\n", metrics.accuracy, metrics.total);
    return exit_code::ok;
}

int cmd_report(const std::vector<std::string>& files) {
    std::vector<EvalReport> reports;
    for (const std::string& f : files) reports.push_back(read_report(f));
    std::cout << render_report_table(reports);
    return exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ESNNet: hybrid convolutional + echo-state-network EEG decoder"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint;
    std::vector<std::string> report_files;
    std::string out_dir;
    std::size_t jobs = SIZE_MAX;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON config file (empty = defaults)");
        sub->add_option("-s,--set", overrides, "dotted-key override, e.g. esn.alpha=0.2");
        sub->add_option("-o,--out", out_dir, "output directory (overrides config 'out')");
        sub->add_option("-j,--jobs", jobs, "parallel runs (overrides config 'jobs')");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth);
    CLI::App* train = app.add_subcommand("train", "within-subject protocol over all seeds");
    add_common(train);
    CLI::App* loso = app.add_subcommand("loso", "leave-one-subject-out protocol");
    add_common(loso);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint, "model checkpoint to evaluate")->required();
    CLI::App* report = app.add_subcommand("report", "render stored report JSON as text tables");
    report->add_option("files", report_files, "report.json files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) return cmd_report(report_files);

        RunConfig cfg = parse_config(config_path, overrides);
        if (!out_dir.empty()) {
            cfg.out_dir = out_dir;
            cfg.effective["out"] = out_dir;
        }
        if (jobs != SIZE_MAX) {
            cfg.jobs = jobs;
            cfg.effective["jobs"] = jobs;
        }

        if (synth->parsed()) return cmd_synth(cfg);
        if (train->parsed()) return cmd_train(cfg, Protocol::within_subject);
        if (loso->parsed()) return cmd_train(cfg, Protocol::loso);
        if (eval->parsed())
            return cfg.precision == "f64" ? cmd_eval_typed<double>(cfg, checkpoint)
                                          : cmd_eval_typed<float>(cfg, checkpoint);
        return exit_code::failure;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_code::config;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_code::data;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return exit_code::numeric;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return exit_code::io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
}
