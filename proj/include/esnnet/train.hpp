#pragma once

// Experiment drivers: one training run (with augmentation, early stopping,
// best-epoch restore), within-subject and LOSO protocols, and multi-run
// orchestration with optional parallelism across independent runs. Every run
// owns its model, optimizer and RNG streams; results are reduced in a fixed
// order so identical configurations give byte-identical reports.

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "esnnet/checkpoint.hpp"
#include "esnnet/config.hpp"
#include "esnnet/data.hpp"
#include "esnnet/model.hpp"
#include "esnnet/optim.hpp"
#include "esnnet/report.hpp"

namespace esnnet {

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0, train_accuracy = 0, val_accuracy = 0;
    double wall_ms = 0;
};

template <Scalar T>
struct TrainOutcome {
    RunRecord record;
    std::vector<EpochLog> log;
    EsnNet<T> model;  // restored to the best epoch
};

namespace detail {

/// Copies every state tensor (parameters + BN running stats).
template <Scalar T>
std::vector<Tensor<T>> snapshot_state(EsnNet<T>& model) {
    std::vector<Tensor<T>> out;
    for (auto& [name, tensor] : model.state_tensors()) out.push_back(*tensor);
    return out;
}

template <Scalar T>
void restore_state(EsnNet<T>& model, const std::vector<Tensor<T>>& snapshot) {
    auto tensors = model.state_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i].second = snapshot[i];
}

}  // namespace detail

/// Inference over `indices` of the pool in fixed order; returns predictions.
template <Scalar T>
std::vector<int> evaluate(EsnNet<T>& model, const std::vector<const Segment<T>*>& pool,
                          const std::vector<std::size_t>& indices, std::size_t batch_size) {
    const std::size_t C = model.config().channels, Tn = model.config().samples;
    std::vector<int> predictions;
    predictions.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, indices.size() - start);
        Tensor<T> batch({n, C, Tn});
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor<T>& seg = pool[indices[start + i]]->data;
            std::copy(seg.data(), seg.data() + seg.numel(), batch.data() + i * C * Tn);
        }
        const Tensor<T> logits = model.forward(batch, Mode::infer);
        const std::vector<int> pred = predict(logits);
        predictions.insert(predictions.end(), pred.begin(), pred.end());
    }
    return predictions;
}

/// One full training run over a split plan. Augmentation touches training
/// batches only; the validation and test paths assemble raw segments.
template <Scalar T>
TrainOutcome<T> train_one(const std::vector<const Segment<T>*>& pool, const SplitPlan& plan,
                          const ModelConfig& cfg, const AugmentConfig& aug, std::uint64_t seed) {
    const RngStream root(seed);
    TrainOutcome<T> out;
    out.model = EsnNet<T>(cfg, seed);
    EsnNet<T>& model = out.model;
    Adam<T> adam(cfg.learning_rate);
    auto params = model.parameters();
    EarlyStopper stopper(cfg.patience);

    const std::size_t C = cfg.channels, Tn = cfg.samples, B = cfg.batch_size;
    std::vector<std::size_t> order = plan.train;
    RngStream aug_rng = root.fork("augment");

    std::vector<int> val_labels;
    for (const std::size_t i : plan.val) val_labels.push_back(pool[i]->label);

    double best_acc = -1.0;
    std::size_t best_epoch = 0;
    std::vector<Tensor<T>> best_state = detail::snapshot_state(model);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle = root.fork("shuffle", epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(shuffle.uniform_int(0, int64_t(i) - 1))]);

        double loss_sum = 0;
        std::size_t seen = 0, correct = 0;
        for (std::size_t start = 0; start < order.size(); start += B) {
            const std::size_t n = std::min(B, order.size() - start);
            Tensor<T> batch({n, C, Tn});
            std::vector<int> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                const Segment<T>& seg = *pool[order[start + i]];
                const Tensor<T> augmented = augment(seg.data, aug, aug_rng);
                std::copy(augmented.data(), augmented.data() + augmented.numel(),
                          batch.data() + i * C * Tn);
                labels[i] = seg.label;
            }
            model.zero_grad();
            const Tensor<T> logits = model.forward(batch, Mode::train);
            const double loss = model.loss(logits, labels);
            if (!std::isfinite(loss))
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch));
            model.backward();
            adam.step(params);
            loss_sum += loss * double(n);
            seen += n;
            const std::vector<int> pred = predict(logits);
            for (std::size_t i = 0; i < n; ++i)
                if (pred[i] == labels[i]) ++correct;
        }

        const std::vector<int> val_pred = evaluate(model, pool, plan.val, B);
        std::size_t val_correct = 0;
        for (std::size_t i = 0; i < val_pred.size(); ++i)
            if (val_pred[i] == val_labels[i]) ++val_correct;
        const double val_acc =
            val_labels.empty() ? 0.0 : double(val_correct) / double(val_labels.size());

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = seen ? loss_sum / double(seen) : 0.0;
        log.train_accuracy = seen ? double(correct) / double(seen) : 0.0;
        log.val_accuracy = val_acc;
        log.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        out.log.push_back(log);

        if (val_acc > best_acc) {
            best_acc = val_acc;
            best_epoch = epoch;
            best_state = detail::snapshot_state(model);
        }
        if (stopper.should_stop(val_acc)) break;
    }

    detail::restore_state(model, best_state);

    std::vector<int> test_labels;
    for (const std::size_t i : plan.test) test_labels.push_back(pool[i]->label);
    const std::vector<int> test_pred = evaluate(model, pool, plan.test, B);

    out.record.seed = seed;
    out.record.subject = plan.held_out_subject;
    out.record.metrics = confusion_and_f1(test_pred, test_labels);
    out.record.epochs_run = out.log.size();
    out.record.best_epoch = best_epoch;
    out.record.best_val_accuracy = best_acc;
    return out;
}

// ---------------------------------------------------------------------------
// Protocol drivers
// ---------------------------------------------------------------------------

struct RunPaths {
    std::string out_dir;  // empty = no artifacts written
    bool checkpoints = true;
    bool epoch_logs = true;
};

namespace detail {

inline void write_epoch_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("train: cannot write " + path);
    for (const EpochLog& e : log) {
        nlohmann::ordered_json j{{"epoch", e.epoch},
                                 {"train_loss", e.train_loss},
                                 {"train_acc", e.train_accuracy},
                                 {"val_acc", e.val_accuracy},
                                 {"wall_ms", e.wall_ms}};
        os << j.dump() << '\n';
    }
}

/// Runs `tasks` with up to `jobs` worker threads; rethrows the first failure.
inline void parallel_for(std::size_t count, std::size_t jobs,
                         const std::function<void(std::size_t)>& task) {
    if (jobs == 0) jobs = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
            } catch (...) {
                errors[w] = std::current_exception();
                next.store(count);
            }
        });
    for (std::thread& t : workers) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Within-subject protocol: per subject, per seed, a stratified 7:3 split of
/// that subject's segments; validation accuracy is what gets reported.
template <Scalar T>
EvalReport run_within_subject(const std::vector<Segment<T>>& segments, const RunConfig& cfg,
                              const RunPaths& paths = {}) {
    std::set<int> subjects;
    for (const Segment<T>& s : segments) subjects.insert(s.subject);

    struct Task {
        int subject;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const int subject : subjects)
        for (const std::uint64_t seed : cfg.model.seeds) tasks.push_back({subject, seed});

    std::vector<RunRecord> records(tasks.size());
    detail::parallel_for(tasks.size(), cfg.jobs, [&](std::size_t idx) {
        const Task& task = tasks[idx];
        std::vector<const Segment<T>*> pool;
        std::vector<int> labels;
        for (const Segment<T>& s : segments)
            if (s.subject == task.subject) {
                pool.push_back(&s);
                labels.push_back(s.label);
            }
        SplitPlan plan =
            stratified_split(labels, RngStream(task.seed).fork("split", task.subject).seed());
        plan.held_out_subject = task.subject;

        TrainOutcome<T> outcome = train_one(pool, plan, cfg.model, cfg.augment, task.seed);
        outcome.record.subject = task.subject;
        records[idx] = outcome.record;
        if (!paths.out_dir.empty()) {
            namespace fs = std::filesystem;
            const std::string stem = "within_s" + std::to_string(task.subject) + "_seed" +
                                     std::to_string(task.seed);
            if (paths.checkpoints)
                save_checkpoint(outcome.model, model_config_json(cfg.model),
                                (fs::path(paths.out_dir) / (stem + ".ckpt")).string());
            if (paths.epoch_logs)
                detail::write_epoch_log(outcome.log,
                                        (fs::path(paths.out_dir) / (stem + ".log.jsonl")).string());
        }
    });

    EvalReport report;
    report.protocol = "within-subject";
    report.variant = variant_name(cfg.model.variant);
    report.runs = std::move(records);
    aggregate_report(report);
    return report;
}

/// LOSO protocol: one fold per held-out subject, trained per seed on the
/// remaining subjects with an inner stratified validation carve-out.
template <Scalar T>
EvalReport run_loso(const std::vector<Segment<T>>& segments, const RunConfig& cfg,
                    const RunPaths& paths = {}) {
    std::vector<int> subjects, labels;
    std::vector<const Segment<T>*> pool;
    for (const Segment<T>& s : segments) {
        pool.push_back(&s);
        subjects.push_back(s.subject);
        labels.push_back(s.label);
    }

    struct Task {
        SplitPlan plan;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const std::uint64_t seed : cfg.model.seeds) {
        const std::vector<SplitPlan> folds = loso_folds(subjects, labels, seed);
        for (const SplitPlan& fold : folds) tasks.push_back({fold, seed});
    }

    std::vector<RunRecord> records(tasks.size());
    detail::parallel_for(tasks.size(), cfg.jobs, [&](std::size_t idx) {
        const Task& task = tasks[idx];
        TrainOutcome<T> outcome = train_one(pool, task.plan, cfg.model, cfg.augment, task.seed);
        records[idx] = outcome.record;
        if (!paths.out_dir.empty()) {
            namespace fs = std::filesystem;
            const std::string stem = "loso_s" + std::to_string(task.plan.held_out_subject) +
                                     "_seed" + std::to_string(task.seed);
            if (paths.checkpoints)
                save_checkpoint(outcome.model, model_config_json(cfg.model),
                                (fs::path(paths.out_dir) / (stem + ".ckpt")).string());
            if (paths.epoch_logs)
                detail::write_epoch_log(outcome.log,
                                        (fs::path(paths.out_dir) / (stem + ".log.jsonl")).string());
        }
    });

    EvalReport report;
    report.protocol = "loso";
    report.variant = variant_name(cfg.model.variant);
    report.runs = std::move(records);
    aggregate_report(report);
    return report;
}

/// Loads or synthesizes the dataset named by the config and preprocesses it.
template <Scalar T>
std::vector<Segment<T>> prepare_segments(const RunConfig& cfg) {
    const Dataset ds = cfg.manifest.empty() ? synth_generate(cfg.synth) : load_dataset(cfg.manifest);
    return preprocess_trials<T>(ds, cfg.preprocess);
}

}  // namespace esnnet
