#pragma once

// Trial ingestion and preprocessing: manifest-driven dataset loading,
// band-pass filtering of continuous recordings, segment extraction around
// event onsets, per-channel z-scoring, and train-time augmentation.
//
// Dataset manifest (JSON):
//   { "version": 1, "sample_rate": 500.0, "channels": 72,
//     "trials": [ { "file": "trial_000.f32", "subject": 0,
//                   "condition": "laser",
//                   "events": [ { "onset_s": 0.5, "label": "backside" } ] } ] }
// Trial payload: raw little-endian 32-bit floats, channel-major
// (all samples of channel 0, then channel 1, ...), length = channels * N.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esnnet/dsp.hpp"
#include "esnnet/rng.hpp"
#include "esnnet/tensor.hpp"

namespace esnnet {

inline constexpr const char* kClassNames[3] = {"backside", "frontside", "pumping"};

inline int label_index(const std::string& name) {
    for (int i = 0; i < 3; ++i)
        if (name == kClassNames[i]) return i;
    throw DataError("unknown event label '" + name + "' (expected backside|frontside|pumping)");
}

struct Event {
    double onset_s = 0.0;
    int label = 0;
};

/// One continuous recording with its onset annotations. Payloads stay in
/// 32-bit floats (the on-disk format); the pipeline converts per segment.
struct Trial {
    int subject = 0;
    std::string condition;
    double sample_rate = 500.0;
    Tensor<float> samples;  // [C, N]
    std::vector<Event> events;

    double duration_s() const { return double(samples.extent(1)) / sample_rate; }
};

struct Dataset {
    double sample_rate = 500.0;
    std::size_t channels = 72;
    std::vector<Trial> trials;
};

/// One fixed-length training sample.
template <Scalar T>
struct Segment {
    Tensor<T> data;  // [C, window]
    int label = 0;
    int subject = 0;
};

struct AugmentConfig {
    double noise_sigma = 0.01;
    int max_shift_samples = 12;
    double inversion_probability = 0.5;
    bool noise_enabled = true;
    bool shift_enabled = true;
    bool inversion_enabled = true;

    void validate() const {
        if (noise_sigma < 0) throw ConfigError("augment.noise_sigma: must be >= 0");
        if (max_shift_samples < 0) throw ConfigError("augment.max_shift_samples: must be >= 0");
        if (inversion_probability < 0 || inversion_probability > 1)
            throw ConfigError("augment.inversion_probability: must lie in [0, 1]");
    }
};

// ---------------------------------------------------------------------------
// Manifest IO
// ---------------------------------------------------------------------------

namespace detail {

inline void require_key(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw DataError(where + ": missing key '" + key + "'");
}

}  // namespace detail

/// Loads and fully validates a dataset; any inconsistency rejects the whole
/// manifest with a message naming the offending trial.
inline Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("manifest: cannot open " + manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest_path + ": " + e.what());
    }
    detail::require_key(j, "version", manifest_path);
    detail::require_key(j, "sample_rate", manifest_path);
    detail::require_key(j, "channels", manifest_path);
    detail::require_key(j, "trials", manifest_path);
    if (j["version"].get<int>() != 1)
        throw DataError("manifest " + manifest_path + ": unsupported version " +
                        j["version"].dump());

    Dataset ds;
    ds.sample_rate = j["sample_rate"].get<double>();
    ds.channels = j["channels"].get<std::size_t>();
    if (ds.sample_rate <= 0) throw DataError("manifest: sample_rate must be positive");
    if (ds.channels == 0) throw DataError("manifest: channels must be positive");

    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    std::size_t index = 0;
    for (const auto& tj : j["trials"]) {
        const std::string where = "trial #" + std::to_string(index) + " in " + manifest_path;
        detail::require_key(tj, "file", where);
        detail::require_key(tj, "subject", where);
        detail::require_key(tj, "events", where);

        Trial trial;
        trial.subject = tj["subject"].get<int>();
        trial.condition = tj.value("condition", std::string());
        trial.sample_rate = ds.sample_rate;

        const std::filesystem::path file = base / tj["file"].get<std::string>();
        std::ifstream payload(file, std::ios::binary | std::ios::ate);
        if (!payload) throw IoError(where + ": missing payload file " + file.string());
        const std::size_t bytes = static_cast<std::size_t>(payload.tellg());
        const std::size_t row_bytes = ds.channels * sizeof(float);
        if (bytes == 0 || bytes % row_bytes != 0)
            throw DataError(where + ": payload size " + std::to_string(bytes) +
                            " bytes is not a whole number of " + std::to_string(ds.channels) +
                            "-channel samples");
        const std::size_t n = bytes / row_bytes;
        trial.samples = Tensor<float>({ds.channels, n});
        payload.seekg(0);
        payload.read(reinterpret_cast<char*>(trial.samples.data()),
                     static_cast<std::streamsize>(bytes));
        if (!payload) throw IoError(where + ": short read from " + file.string());
        if (!trial.samples.all_finite())
            throw DataError(where + ": payload contains NaN or Inf samples");

        std::size_t ev_index = 0;
        for (const auto& ej : tj["events"]) {
            const std::string ev_where = where + ", event #" + std::to_string(ev_index);
            detail::require_key(ej, "onset_s", ev_where);
            detail::require_key(ej, "label", ev_where);
            Event ev;
            ev.onset_s = ej["onset_s"].get<double>();
            ev.label = label_index(ej["label"].get<std::string>());
            if (ev.onset_s < 0 || ev.onset_s + 0.7 > trial.duration_s())
                throw DataError(ev_where + ": onset " + std::to_string(ev.onset_s) +
                                "s leaves no room for the 0.2-0.7s window in a " +
                                std::to_string(trial.duration_s()) + "s recording");
            trial.events.push_back(ev);
            ++ev_index;
        }
        ds.trials.push_back(std::move(trial));
        ++index;
    }
    return ds;
}

/// Writes payload files plus manifest.json under `dir`.
inline std::string write_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["sample_rate"] = ds.sample_rate;
    j["channels"] = ds.channels;
    j["trials"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
        const Trial& t = ds.trials[i];
        char name[32];
        std::snprintf(name, sizeof(name), "trial_%04zu.f32", i);
        std::ofstream payload(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        if (!payload) throw IoError("dataset: cannot write payload in " + dir);
        payload.write(reinterpret_cast<const char*>(t.samples.data()),
                      static_cast<std::streamsize>(t.samples.numel() * sizeof(float)));
        if (!payload) throw IoError("dataset: payload write failed in " + dir);

        nlohmann::ordered_json tj;
        tj["file"] = name;
        tj["subject"] = t.subject;
        tj["condition"] = t.condition;
        tj["events"] = nlohmann::ordered_json::array();
        for (const Event& e : t.events)
            tj["events"].push_back({{"onset_s", e.onset_s}, {"label", kClassNames[e.label]}});
        j["trials"].push_back(std::move(tj));
    }
    const std::string manifest = (fs::path(dir) / "manifest.json").string();
    std::ofstream out(manifest, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("dataset: cannot write " + manifest);
    return manifest;
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Per channel: subtract the mean, divide by the population standard
/// deviation. Channels with std below 1e-8 become all zeros.
template <Scalar T>
Tensor<T> zscore(const Tensor<T>& segment) {
    if (segment.rank() != 2) throw ShapeError("zscore: segment must be [C,T]");
    const std::size_t C = segment.extent(0), Tn = segment.extent(1);
    Tensor<T> out({C, Tn});
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0;
        for (std::size_t t = 0; t < Tn; ++t) s += double(segment[c * Tn + t]);
        const double mu = s / double(Tn);
        double s2 = 0;
        for (std::size_t t = 0; t < Tn; ++t) {
            const double d = double(segment[c * Tn + t]) - mu;
            s2 += d * d;
        }
        const double sd = std::sqrt(s2 / double(Tn));
        if (sd < 1e-8) {
            for (std::size_t t = 0; t < Tn; ++t) out[c * Tn + t] = T(0);
        } else {
            for (std::size_t t = 0; t < Tn; ++t)
                out[c * Tn + t] = static_cast<T>((double(segment[c * Tn + t]) - mu) / sd);
        }
    }
    return out;
}

inline std::size_t segment_window_len(double fs) {
    return static_cast<std::size_t>(std::lround(0.5 * fs));
}

/// Cuts the [onset+0.2s, onset+0.7s) window: sample indices
/// [round((onset+0.2)*fs), round((onset+0.2)*fs) + round(0.5*fs)).
template <Scalar T>
Segment<T> extract_segment(const Tensor<T>& filtered, const Trial& trial, const Event& event) {
    const double fs = trial.sample_rate;
    const std::size_t start = static_cast<std::size_t>(std::lround((event.onset_s + 0.2) * fs));
    const std::size_t len = segment_window_len(fs);
    const std::size_t C = filtered.extent(0), N = filtered.extent(1);
    if (start + len > N)
        throw DataError("extract_segment: window [" + std::to_string(start) + ", " +
                        std::to_string(start + len) + ") exceeds recording of " +
                        std::to_string(N) + " samples");
    Segment<T> seg;
    seg.data = Tensor<T>({C, len});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < len; ++t)
            seg.data[c * len + t] = filtered[c * N + start + t];
    seg.label = event.label;
    seg.subject = trial.subject;
    return seg;
}

struct PreprocessOptions {
    double band_low_hz = 1.0;
    double band_high_hz = 40.0;
    int filter_order = 4;
};

/// Full deterministic pipeline: band-pass the continuous recording, cut each
/// event window, z-score per channel within the segment.
template <Scalar T>
std::vector<Segment<T>> preprocess_trials(const Dataset& ds,
                                          const PreprocessOptions& opt = {}) {
    std::vector<Segment<T>> out;
    for (const Trial& trial : ds.trials) {
        Tensor<T> wide({trial.samples.extent(0), trial.samples.extent(1)});
        for (std::size_t i = 0; i < wide.numel(); ++i)
            wide[i] = static_cast<T>(trial.samples[i]);
        const Tensor<T> filtered =
            bandpass(wide, opt.band_low_hz, opt.band_high_hz, trial.sample_rate, opt.filter_order);
        for (const Event& ev : trial.events) {
            Segment<T> seg = extract_segment(filtered, trial, ev);
            seg.data = zscore(seg.data);
            out.push_back(std::move(seg));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation (training only; the evaluation path never calls this)
// ---------------------------------------------------------------------------

/// Applies, in this order: additive Gaussian noise, integer temporal shift
/// with zero fill at the vacated edge, whole-segment sign inversion.
template <Scalar T>
Tensor<T> augment(const Tensor<T>& segment, const AugmentConfig& cfg, RngStream& rng) {
    const std::size_t C = segment.extent(0), Tn = segment.extent(1);
    if (cfg.max_shift_samples >= static_cast<int>(Tn))
        throw ConfigError("augment: shift magnitude must stay below the segment length");
    Tensor<T> out = segment;
    if (cfg.noise_enabled && cfg.noise_sigma > 0)
        for (T& v : out.values()) v += static_cast<T>(cfg.noise_sigma * rng.normal());
    if (cfg.shift_enabled && cfg.max_shift_samples > 0) {
        const int shift = static_cast<int>(
            rng.uniform_int(-cfg.max_shift_samples, cfg.max_shift_samples));
        if (shift != 0) {
            Tensor<T> shifted({C, Tn}, T(0));
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < Tn; ++t) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) - shift;
                    if (src >= 0 && src < static_cast<std::ptrdiff_t>(Tn))
                        shifted[c * Tn + t] = out[c * Tn + static_cast<std::size_t>(src)];
                }
            out = std::move(shifted);
        }
    }
    if (cfg.inversion_enabled && rng.bernoulli(cfg.inversion_probability))
        for (T& v : out.values()) v = -v;
    return out;
}

}  // namespace esnnet
