#pragma once

// Synthetic dataset generator for desk-scale verification. Three classes are
// realized as oscillation bursts at 8 / 14 / 22 Hz injected through a
// class-specific random spatial mixing vector, on top of pink-plus-white
// background noise. A per-subject perturbation of the mixing vectors models
// inter-subject variability. Every stream is forked from (seed, trial index),
// so parallel and serial generation produce identical datasets.

#include <cmath>
#include <numbers>
#include <vector>

#include "esnnet/data.hpp"
#include "esnnet/rng.hpp"

namespace esnnet {

struct SynthSpec {
    std::size_t per_class = 300;   // events per class per subject
    std::size_t subjects = 3;
    std::uint64_t seed = 1234;
    double noise_scale = 0.5;      // background noise standard deviation
    double burst_amp = 3.0;        // oscillation amplitude before mixing
    double subject_jitter = 0.35;  // perturbation of class mixing per subject
    std::size_t channels = 72;
    double sample_rate = 500.0;
    std::size_t events_per_trial = 25;
    double event_spacing_s = 0.6;
    double lead_s = 0.5;
    double tail_s = 0.8;

    void validate() const {
        if (per_class < 1) throw ConfigError("synth.per_class: must be >= 1");
        if (subjects < 1) throw ConfigError("synth.subjects: must be >= 1");
        if (noise_scale < 0) throw ConfigError("synth.noise_scale: must be >= 0");
        if (channels < 1 || sample_rate <= 0) throw ConfigError("synth: bad geometry");
    }
};

inline constexpr double kSynthClassHz[3] = {8.0, 14.0, 22.0};

namespace detail {

/// Paul Kellett's economy pink-noise filter driven by unit normals; output
/// scaled to roughly unit variance.
class PinkNoise {
  public:
    double next(RngStream& rng) {
        const double w = rng.normal();
        b0_ = 0.99886 * b0_ + w * 0.0555179;
        b1_ = 0.99332 * b1_ + w * 0.0750759;
        b2_ = 0.96900 * b2_ + w * 0.1538520;
        b3_ = 0.86650 * b3_ + w * 0.3104856;
        b4_ = 0.55000 * b4_ + w * 0.5329522;
        b5_ = -0.7616 * b5_ - w * 0.0168980;
        const double pink = b0_ + b1_ + b2_ + b3_ + b4_ + b5_ + b6_ + w * 0.5362;
        b6_ = w * 0.115926;
        return pink * 0.2;
    }

  private:
    double b0_ = 0, b1_ = 0, b2_ = 0, b3_ = 0, b4_ = 0, b5_ = 0, b6_ = 0;
};

inline std::vector<double> unit_mixing(std::size_t channels, RngStream rng) {
    std::vector<double> m(channels);
    double norm = 0;
    for (double& v : m) {
        v = rng.uniform(-1.0, 1.0);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : m) v /= norm;
    return m;
}

}  // namespace detail

/// Generates the full synthetic dataset in manifest form (in memory).
inline Dataset synth_generate(const SynthSpec& spec) {
    spec.validate();
    const RngStream root(spec.seed);
    const double fs = spec.sample_rate;
    const std::size_t C = spec.channels;
    const double pi2 = 2.0 * std::numbers::pi;

    // Class mixing vectors plus per-(subject, class) perturbed variants.
    std::vector<std::vector<double>> mixing(spec.subjects * 3);
    for (int cls = 0; cls < 3; ++cls) {
        const std::vector<double> base =
            detail::unit_mixing(C, root.fork("class-mix", std::uint64_t(cls)));
        for (std::size_t s = 0; s < spec.subjects; ++s) {
            const std::vector<double> jit =
                detail::unit_mixing(C, root.fork("subject-mix", s * 3 + std::uint64_t(cls)));
            std::vector<double> m(C);
            double norm = 0;
            for (std::size_t c = 0; c < C; ++c) {
                m[c] = base[c] + spec.subject_jitter * jit[c];
                norm += m[c] * m[c];
            }
            norm = std::sqrt(norm);
            for (double& v : m) v /= norm;
            mixing[s * 3 + std::size_t(cls)] = std::move(m);
        }
    }

    Dataset ds;
    ds.sample_rate = fs;
    ds.channels = C;

    std::size_t trial_index = 0;
    for (std::size_t s = 0; s < spec.subjects; ++s) {
        // Balanced, subject-shuffled label sequence.
        std::vector<int> labels;
        labels.reserve(spec.per_class * 3);
        for (int cls = 0; cls < 3; ++cls)
            labels.insert(labels.end(), spec.per_class, cls);
        RngStream shuffle_rng = root.fork("label-shuffle", s);
        for (std::size_t i = labels.size(); i > 1; --i)
            std::swap(labels[i - 1],
                      labels[static_cast<std::size_t>(shuffle_rng.uniform_int(0, int64_t(i) - 1))]);

        for (std::size_t first = 0; first < labels.size(); first += spec.events_per_trial) {
            const std::size_t count = std::min(spec.events_per_trial, labels.size() - first);
            const double duration = spec.lead_s + double(count) * spec.event_spacing_s + spec.tail_s;
            const std::size_t n = static_cast<std::size_t>(std::lround(duration * fs));

            Trial trial;
            trial.subject = static_cast<int>(s);
            trial.condition = trial_index % 2 == 0 ? "laser" : "led";
            trial.sample_rate = fs;
            trial.samples = Tensor<float>({C, n});

            RngStream trial_rng = root.fork("trial", trial_index);
            for (std::size_t c = 0; c < C; ++c) {
                RngStream ch_rng = trial_rng.fork("channel", c);
                detail::PinkNoise pink;
                float* row = trial.samples.data() + c * n;
                for (std::size_t t = 0; t < n; ++t) {
                    const double v = 0.8 * pink.next(ch_rng) + 0.6 * ch_rng.normal();
                    row[t] = static_cast<float>(spec.noise_scale * v);
                }
            }

            RngStream event_rng = trial_rng.fork("events");
            for (std::size_t e = 0; e < count; ++e) {
                const int cls = labels[first + e];
                const double onset = spec.lead_s + double(e) * spec.event_spacing_s;
                trial.events.push_back({onset, cls});

                // Burst slightly wider than the extraction window so the
                // whole segment carries signal.
                const double t0 = onset + 0.15, t1 = onset + 0.75;
                const std::size_t i0 = static_cast<std::size_t>(std::lround(t0 * fs));
                const std::size_t i1 = std::min(n, static_cast<std::size_t>(std::lround(t1 * fs)));
                const double phase = event_rng.uniform(0.0, pi2);
                const double freq = kSynthClassHz[cls];
                const std::vector<double>& m = mixing[s * 3 + std::size_t(cls)];
                for (std::size_t t = i0; t < i1; ++t) {
                    const double u = double(t - i0) / double(i1 - i0 - 1);
                    const double env = 0.5 * (1.0 - std::cos(pi2 * u));  // Hann
                    const double osc =
                        spec.burst_amp * env * std::sin(pi2 * freq * double(t) / fs + phase);
                    for (std::size_t c = 0; c < C; ++c)
                        trial.samples[c * n + t] += static_cast<float>(m[c] * osc);
                }
            }
            ds.trials.push_back(std::move(trial));
            ++trial_index;
        }
    }
    return ds;
}

}  // namespace esnnet
