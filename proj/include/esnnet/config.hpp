#pragma once

// Run configuration: JSON file + dotted-key command-line overrides, resolved
// against documented defaults. Unknown keys are rejected with their full
// path; every invariant violation names the offending key.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esnnet/checkpoint.hpp"
#include "esnnet/data.hpp"
#include "esnnet/model.hpp"
#include "esnnet/synth.hpp"

namespace esnnet {

using ojson = nlohmann::ordered_json;

enum class Protocol { within_subject, loso };

struct RunConfig {
    ModelConfig model;
    AugmentConfig augment;
    PreprocessOptions preprocess;
    Protocol protocol = Protocol::within_subject;
    std::string manifest;  // dataset path; empty means synthesize
    SynthSpec synth;
    std::string precision = "f32";  // training scalar; gradient tests always use f64
    std::string out_dir = "runs/latest";
    std::size_t jobs = 0;  // 0 = hardware concurrency
    ojson effective;       // fully resolved tree, written next to outputs

    void validate() const {
        model.validate();
        augment.validate();
        synth.validate();
        if (precision != "f32" && precision != "f64")
            throw ConfigError("train.precision: expected 'f32' or 'f64', got '" + precision + "'");
        if (!(preprocess.band_low_hz > 0 && preprocess.band_low_hz < preprocess.band_high_hz))
            throw ConfigError("preprocess: need 0 < band_low_hz < band_high_hz");
    }
};

namespace detail {

inline ojson default_config() {
    return ojson{
        {"model",
         {{"channels", 72},
          {"samples", 250},
          {"filters", 180},
          {"kernel", 5},
          {"variant", "full"}}},
        {"esn", {{"size", 100}, {"rho", 0.99}, {"alpha", 0.1}, {"density", 0.1}}},
        {"train",
         {{"learning_rate", 1e-3},
          {"batch_size", 64},
          {"max_epochs", 40},
          {"patience", 8},
          {"l2", 1e-4},
          {"precision", "f32"},
          {"seeds", {0, 1, 2, 3, 4}}}},
        {"augment",
         {{"noise_sigma", 0.01},
          {"max_shift_samples", 12},
          {"inversion_probability", 0.5},
          {"noise", true},
          {"shift", true},
          {"inversion", true}}},
        {"preprocess", {{"band_low_hz", 1.0}, {"band_high_hz", 40.0}, {"filter_order", 4}}},
        {"data",
         {{"manifest", ""},
          {"synth",
           {{"per_class", 300},
            {"subjects", 3},
            {"seed", 1234},
            {"noise_scale", 0.5},
            {"burst_amp", 3.0}}}}},
        {"protocol", "within-subject"},
        {"out", "runs/latest"},
        {"jobs", 0},
    };
}

/// Recursive merge that rejects keys absent from the defaults and values of
/// a different JSON kind.
inline void merge_into(ojson& base, const ojson& patch, const std::string& path) {
    for (const auto& [key, value] : patch.items()) {
        const std::string full = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError("config: unknown key '" + full + "'");
        ojson& slot = base[key];
        if (slot.is_object()) {
            if (!value.is_object())
                throw ConfigError("config: '" + full + "' must be an object");
            merge_into(slot, value, full);
        } else {
            const bool numeric_ok = slot.is_number() && value.is_number();
            if (!numeric_ok && slot.type() != value.type() &&
                !(slot.is_array() && value.is_array()))
                throw ConfigError("config: type mismatch at '" + full + "'");
            slot = value;
        }
    }
}

/// Applies one "dotted.key=value" override; the value is parsed with the
/// type of the existing default.
inline void apply_override(ojson& base, const std::string& spec) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config: override '" + spec + "' is not of the form key.path=value");
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);

    ojson* node = &base;
    std::size_t start = 0;
    std::string walked;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        walked = walked.empty() ? key : walked + "." + key;
        if (!node->contains(key)) throw ConfigError("config: unknown key '" + walked + "'");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object()) throw ConfigError("config: '" + path + "' is a section, not a value");
    try {
        if (node->is_string())
            *node = raw;
        else if (node->is_boolean())
            *node = raw == "true" || raw == "1";
        else if (node->is_number_integer() || node->is_number_unsigned())
            *node = ojson::parse(raw);
        else
            *node = ojson::parse(raw);  // floats and arrays
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: cannot parse override value for '" + path + "': " + raw);
    }
}

}  // namespace detail

/// Parses file + overrides into a validated RunConfig. An empty or missing
/// path yields the documented defaults.
inline RunConfig parse_config(const std::string& path,
                              const std::vector<std::string>& overrides = {}) {
    ojson tree = detail::default_config();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw IoError("config: cannot open " + path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        // An empty file means "all defaults".
        std::size_t first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos) {
            ojson file;
            try {
                file = ojson::parse(text);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config " + path + ": " + e.what());
            }
            detail::merge_into(tree, file, "");
        }
    }
    for (const std::string& o : overrides) detail::apply_override(tree, o);

    RunConfig cfg;
    cfg.effective = tree;
    const ojson& m = tree["model"];
    cfg.model.channels = m["channels"].get<std::size_t>();
    cfg.model.samples = m["samples"].get<std::size_t>();
    cfg.model.filters = m["filters"].get<std::size_t>();
    cfg.model.kernel = m["kernel"].get<std::size_t>();
    const std::string variant = m["variant"].get<std::string>();
    if (variant == "full")
        cfg.model.variant = Variant::full;
    else if (variant == "conv-only")
        cfg.model.variant = Variant::conv_only;
    else
        throw ConfigError("model.variant: expected 'full' or 'conv-only', got '" + variant + "'");

    const ojson& e = tree["esn"];
    cfg.model.reservoir = e["size"].get<std::size_t>();
    cfg.model.rho = e["rho"].get<double>();
    cfg.model.alpha = e["alpha"].get<double>();
    cfg.model.density = e["density"].get<double>();

    const ojson& t = tree["train"];
    cfg.model.learning_rate = t["learning_rate"].get<double>();
    cfg.model.batch_size = t["batch_size"].get<std::size_t>();
    cfg.model.max_epochs = t["max_epochs"].get<std::size_t>();
    cfg.model.patience = t["patience"].get<std::size_t>();
    cfg.model.l2 = t["l2"].get<double>();
    cfg.precision = t["precision"].get<std::string>();
    cfg.model.seeds.clear();
    for (const auto& s : t["seeds"]) cfg.model.seeds.push_back(s.get<std::uint64_t>());

    const ojson& a = tree["augment"];
    cfg.augment.noise_sigma = a["noise_sigma"].get<double>();
    cfg.augment.max_shift_samples = a["max_shift_samples"].get<int>();
    cfg.augment.inversion_probability = a["inversion_probability"].get<double>();
    cfg.augment.noise_enabled = a["noise"].get<bool>();
    cfg.augment.shift_enabled = a["shift"].get<bool>();
    cfg.augment.inversion_enabled = a["inversion"].get<bool>();

    const ojson& p = tree["preprocess"];
    cfg.preprocess.band_low_hz = p["band_low_hz"].get<double>();
    cfg.preprocess.band_high_hz = p["band_high_hz"].get<double>();
    cfg.preprocess.filter_order = p["filter_order"].get<int>();

    const ojson& d = tree["data"];
    cfg.manifest = d["manifest"].get<std::string>();
    cfg.synth.per_class = d["synth"]["per_class"].get<std::size_t>();
    cfg.synth.subjects = d["synth"]["subjects"].get<std::size_t>();
    cfg.synth.seed = d["synth"]["seed"].get<std::uint64_t>();
    cfg.synth.noise_scale = d["synth"]["noise_scale"].get<double>();
    cfg.synth.burst_amp = d["synth"]["burst_amp"].get<double>();
    cfg.synth.channels = cfg.model.channels;
    cfg.synth.sample_rate = 500.0;

    const std::string protocol = tree["protocol"].get<std::string>();
    if (protocol == "within-subject")
        cfg.protocol = Protocol::within_subject;
    else if (protocol == "loso")
        cfg.protocol = Protocol::loso;
    else
        throw ConfigError("protocol: expected 'within-subject' or 'loso', got '" + protocol + "'");
    cfg.out_dir = tree["out"].get<std::string>();
    cfg.jobs = tree["jobs"].get<std::size_t>();

    cfg.validate();
    return cfg;
}

/// Serializes the model section back to JSON (stored inside checkpoints).
inline std::string model_config_json(const ModelConfig& m) {
    ojson j{{"channels", m.channels},
            {"samples", m.samples},
            {"filters", m.filters},
            {"kernel", m.kernel},
            {"variant", m.variant == Variant::full ? "full" : "conv-only"},
            {"reservoir", m.reservoir},
            {"rho", m.rho},
            {"alpha", m.alpha},
            {"density", m.density},
            {"l2", m.l2},
            {"learning_rate", m.learning_rate},
            {"batch_size", m.batch_size},
            {"max_epochs", m.max_epochs},
            {"patience", m.patience},
            {"seeds", m.seeds}};
    return j.dump();
}

inline ModelConfig model_config_from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint config blob is not valid JSON: ") + e.what());
    }
    ModelConfig m;
    m.channels = j["channels"].get<std::size_t>();
    m.samples = j["samples"].get<std::size_t>();
    m.filters = j["filters"].get<std::size_t>();
    m.kernel = j["kernel"].get<std::size_t>();
    m.variant = j["variant"].get<std::string>() == "full" ? Variant::full : Variant::conv_only;
    m.reservoir = j["reservoir"].get<std::size_t>();
    m.rho = j["rho"].get<double>();
    m.alpha = j["alpha"].get<double>();
    m.density = j["density"].get<double>();
    m.l2 = j["l2"].get<double>();
    m.learning_rate = j["learning_rate"].get<double>();
    m.batch_size = j["batch_size"].get<std::size_t>();
    m.max_epochs = j["max_epochs"].get<std::size_t>();
    m.patience = j["patience"].get<std::size_t>();
    m.seeds.clear();
    for (const auto& s : j["seeds"]) m.seeds.push_back(s.get<std::uint64_t>());
    return m;
}

/// Rebuilds a model from a checkpoint file (header config + tensors).
template <Scalar T>
EsnNet<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    const CheckpointHeader h = read_checkpoint_header(is, path);
    if (h.scalar_width != sizeof(T))
        throw IoError("checkpoint: stored scalar width " + std::to_string(h.scalar_width) +
                      " does not match requested precision (" + std::to_string(sizeof(T)) + ")");
    ModelConfig cfg = model_config_from_json(h.config_json);
    cfg.variant = h.variant;
    EsnNet<T> model(cfg, h.build_seed);
    load_checkpoint_tensors(is, model, path);
    return model;
}

}  // namespace esnnet
