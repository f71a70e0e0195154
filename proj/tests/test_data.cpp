#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "esnnet/data.hpp"
#include "esnnet/synth.hpp"
#include "oracle_probe.hpp"

using namespace esnnet;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("zscore: mean zero, unit std, degenerate channels go to zero") {
    RngStream rng(1);
    const auto seg = Tensor<double>::uniform({3, 100}, rng, -4.0, 4.0);
    const auto z = zscore(seg);
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 0, s2 = 0;
        for (std::size_t t = 0; t < 100; ++t) {
            s += z.at({c, t});
            s2 += z.at({c, t}) * z.at({c, t});
        }
        REQUIRE(std::abs(s / 100.0) < 1e-12);
        REQUIRE(std::sqrt(s2 / 100.0) == Approx(1.0).margin(1e-9));
    }
    Tensor<double> constant({1, 50}, 7.5);
    const auto zc = zscore(constant);
    for (std::size_t t = 0; t < 50; ++t) REQUIRE(zc.at({0, t}) == 0.0);
}

TEST_CASE("zscore: hand-computed 2x4 fixture") {
    const Tensor<double> seg({2, 4}, std::vector<double>{1, 2, 3, 4, 5, 5, 5, 5});
    const auto z = zscore(seg);
    const double sd = std::sqrt(1.25);  // population std of {1,2,3,4}
    const double expect[4] = {-1.5 / sd, -0.5 / sd, 0.5 / sd, 1.5 / sd};
    for (std::size_t t = 0; t < 4; ++t) {
        REQUIRE(z.at({0, t}) == Approx(expect[t]).epsilon(1e-14));
        REQUIRE(z.at({1, t}) == 0.0);  // constant channel
    }
}

namespace {

Trial ramp_trial(std::size_t channels, std::size_t n) {
    Trial trial;
    trial.subject = 0;
    trial.sample_rate = 500.0;
    trial.samples = Tensor<float>({channels, n});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t t = 0; t < n; ++t)
            trial.samples[c * n + t] = static_cast<float>(t);  // payload = sample index
    return trial;
}

}  // namespace

TEST_CASE("extract_segment: onset arithmetic") {
    const Trial trial = ramp_trial(2, 1000);
    Tensor<double> wide({2, 1000});
    for (std::size_t i = 0; i < wide.numel(); ++i) wide[i] = trial.samples[i];

    const auto seg0 = extract_segment(wide, trial, {0.0, 1});
    REQUIRE(seg0.data.shape() == Shape{2, 250});
    REQUIRE(seg0.data.at({0, 0}) == 100.0);    // window starts at sample 100
    REQUIRE(seg0.data.at({0, 249}) == 349.0);  // and ends before 350
    REQUIRE(seg0.label == 1);

    const auto seg1 = extract_segment(wide, trial, {1.0, 2});
    REQUIRE(seg1.data.at({0, 0}) == 600.0);
    REQUIRE(seg1.data.at({0, 249}) == 849.0);

    REQUIRE_THROWS_AS(extract_segment(wide, trial, {1.41, 0}), DataError);
}

TEST_CASE("augment: noise std over 1e5 elements within 2% of sigma") {
    RngStream data_rng(5);
    const auto seg = Tensor<double>::uniform({400, 250}, data_rng);
    AugmentConfig cfg;
    cfg.shift_enabled = false;
    cfg.inversion_enabled = false;
    cfg.noise_sigma = 0.01;
    RngStream rng(6);
    const auto out = augment(seg, cfg, rng);
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < seg.numel(); ++i) {
        const double d = out[i] - seg[i];
        s += d;
        s2 += d * d;
    }
    const double mean = s / double(seg.numel());
    const double std_dev = std::sqrt(s2 / double(seg.numel()) - mean * mean);
    REQUIRE(std_dev >= 0.0098);
    REQUIRE(std_dev <= 0.0102);
}

TEST_CASE("augment: zero shift draw is the identity") {
    std::uint64_t seed = 0;
    while (true) {  // deterministic scan for a seed whose first draw is 0
        RngStream probe(seed);
        if (probe.uniform_int(-12, 12) == 0) break;
        ++seed;
    }
    AugmentConfig cfg;
    cfg.noise_enabled = false;
    cfg.inversion_enabled = false;
    RngStream rng(seed);
    RngStream data_rng(7);
    const auto seg = Tensor<double>::uniform({3, 30}, data_rng);
    const auto out = augment(seg, cfg, rng);
    REQUIRE(out.values() == seg.values());
}

TEST_CASE("augment: positive shift fills the vacated left edge with zeros") {
    std::uint64_t seed = 0;
    while (true) {
        RngStream probe(seed);
        if (probe.uniform_int(-12, 12) == 3) break;
        ++seed;
    }
    AugmentConfig cfg;
    cfg.noise_enabled = false;
    cfg.inversion_enabled = false;
    RngStream rng(seed);
    RngStream data_rng(8);
    const auto seg = Tensor<double>::uniform({2, 20}, data_rng);
    const auto out = augment(seg, cfg, rng);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t t = 0; t < 3; ++t) REQUIRE(out.at({c, t}) == 0.0);
        for (std::size_t t = 3; t < 20; ++t) REQUIRE(out.at({c, t}) == seg.at({c, t - 3}));
    }
}

TEST_CASE("augment: forced inversion negates the segment") {
    AugmentConfig cfg;
    cfg.noise_enabled = false;
    cfg.shift_enabled = false;
    cfg.inversion_probability = 1.0;
    RngStream rng(9);
    RngStream data_rng(10);
    const auto seg = Tensor<double>::uniform({2, 15}, data_rng);
    const auto out = augment(seg, cfg, rng);
    for (std::size_t i = 0; i < seg.numel(); ++i) REQUIRE(out[i] == -seg[i]);
}

TEST_CASE("synthetic dataset round-trips through manifest files") {
    SynthSpec spec;
    spec.per_class = 4;
    spec.subjects = 2;
    spec.events_per_trial = 6;
    spec.seed = 21;
    const Dataset ds = synth_generate(spec);
    const fs::path dir = temp_dir("esnnet_roundtrip");
    write_dataset(ds, dir.string());
    const Dataset back = load_dataset((dir / "manifest.json").string());

    REQUIRE(back.trials.size() == ds.trials.size());
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
        REQUIRE(back.trials[i].subject == ds.trials[i].subject);
        REQUIRE(back.trials[i].samples.values() == ds.trials[i].samples.values());
        REQUIRE(back.trials[i].events.size() == ds.trials[i].events.size());
        for (std::size_t e = 0; e < ds.trials[i].events.size(); ++e) {
            REQUIRE(back.trials[i].events[e].onset_s == ds.trials[i].events[e].onset_s);
            REQUIRE(back.trials[i].events[e].label == ds.trials[i].events[e].label);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest declaring the wrong channel count names the trial") {
    SynthSpec spec;
    spec.per_class = 2;
    spec.subjects = 1;
    spec.events_per_trial = 6;
    spec.channels = 72;
    const fs::path dir = temp_dir("esnnet_badchan");
    write_dataset(synth_generate(spec), dir.string());
    // Rewrite the manifest with 71 channels against 72-channel payloads.
    nlohmann::json j;
    {
        std::ifstream in(dir / "manifest.json");
        in >> j;
    }
    j["channels"] = 71;
    {
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        out << j.dump();
    }
    try {
        load_dataset((dir / "manifest.json").string());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("trial #0") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("hand-built fixture: exact values at documented byte offsets") {
    const fs::path dir = temp_dir("esnnet_fixture");
    // Three trials, 2 channels, 400 samples each, channel-major f32.
    for (int tr = 0; tr < 3; ++tr) {
        std::ofstream payload(dir / ("t" + std::to_string(tr) + ".f32"), std::ios::binary);
        for (int c = 0; c < 2; ++c)
            for (int t = 0; t < 400; ++t) {
                const float v = float(1000 * tr + 100 * c) + float(t) * 0.5f;
                payload.write(reinterpret_cast<const char*>(&v), sizeof(float));
            }
    }
    nlohmann::json manifest{
        {"version", 1},
        {"sample_rate", 500.0},
        {"channels", 2},
        {"trials", nlohmann::json::array()}};
    for (int tr = 0; tr < 3; ++tr)
        manifest["trials"].push_back(
            {{"file", "t" + std::to_string(tr) + ".f32"},
             {"subject", tr},
             {"condition", "laser"},
             {"events", {{{"onset_s", 0.05}, {"label", "pumping"}}}}});
    {
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump();
    }
    const Dataset ds = load_dataset((dir / "manifest.json").string());
    REQUIRE(ds.trials.size() == 3);
    // Sample (trial 2, channel 1, t=37) sits at byte offset (1*400 + 37)*4 in
    // t2.f32 and must equal 2000 + 100 + 18.5.
    REQUIRE(ds.trials[2].samples.at({1, 37}) == Approx(2118.5f));
    REQUIRE(ds.trials[0].samples.at({0, 0}) == 0.0f);
    REQUIRE(ds.trials[1].samples.at({1, 399}) == Approx(1100.0f + 199.5f));
    REQUIRE(ds.trials[1].events[0].label == 2);
    fs::remove_all(dir);
}

TEST_CASE("NaN payloads, missing files and bad onsets are load errors") {
    const fs::path dir = temp_dir("esnnet_badpayload");
    {
        std::ofstream payload(dir / "t0.f32", std::ios::binary);
        const float nan = std::numeric_limits<float>::quiet_NaN();
        for (int i = 0; i < 800; ++i)
            payload.write(reinterpret_cast<const char*>(&nan), sizeof(float));
    }
    nlohmann::json manifest{{"version", 1},
                            {"sample_rate", 500.0},
                            {"channels", 2},
                            {"trials",
                             {{{"file", "t0.f32"},
                               {"subject", 0},
                               {"events", {{{"onset_s", 0.0}, {"label", "backside"}}}}}}}};
    auto write_manifest = [&](const nlohmann::json& j) {
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        out << j.dump();
    };
    write_manifest(manifest);
    REQUIRE_THROWS_AS(load_dataset((dir / "manifest.json").string()), DataError);

    nlohmann::json missing = manifest;
    missing["trials"][0]["file"] = "nowhere.f32";
    write_manifest(missing);
    REQUIRE_THROWS_AS(load_dataset((dir / "manifest.json").string()), IoError);

    // Valid payload but an onset whose window leaves the recording.
    {
        std::ofstream payload(dir / "t1.f32", std::ios::binary);
        const float zero = 0.0f;
        for (int i = 0; i < 800; ++i)
            payload.write(reinterpret_cast<const char*>(&zero), sizeof(float));
    }
    nlohmann::json late = manifest;
    late["trials"][0]["file"] = "t1.f32";
    late["trials"][0]["events"][0]["onset_s"] = 0.2;  // 0.2 + 0.7 > 0.8 s recording
    write_manifest(late);
    REQUIRE_THROWS_AS(load_dataset((dir / "manifest.json").string()), DataError);
    fs::remove_all(dir);
}

TEST_CASE("unknown event labels are rejected") {
    REQUIRE_THROWS_AS(label_index("ollie"), DataError);
    REQUIRE(label_index("backside") == 0);
    REQUIRE(label_index("frontside") == 1);
    REQUIRE(label_index("pumping") == 2);
}

TEST_CASE("preprocessing is deterministic over identical trial bytes") {
    SynthSpec spec;
    spec.per_class = 3;
    spec.subjects = 1;
    spec.events_per_trial = 9;
    spec.seed = 33;
    const Dataset ds = synth_generate(spec);
    const auto a = preprocess_trials<double>(ds);
    const auto b = preprocess_trials<double>(ds);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].data.values() == b[i].data.values());
        REQUIRE(a[i].label == b[i].label);
        REQUIRE(a[i].subject == b[i].subject);
    }
}

TEST_CASE("synthetic generator: segment geometry and balanced labels") {
    SynthSpec spec;
    spec.per_class = 5;
    spec.subjects = 2;
    spec.seed = 44;
    const Dataset ds = synth_generate(spec);
    const auto segments = preprocess_trials<double>(ds);
    REQUIRE(segments.size() == 5 * 3 * 2);
    std::array<std::array<int, 3>, 2> hist{};
    for (const auto& s : segments) {
        REQUIRE(s.data.shape() == Shape{72, 250});
        hist[std::size_t(s.subject)][std::size_t(s.label)] += 1;
    }
    for (const auto& per_subject : hist)
        for (const int count : per_subject) REQUIRE(count == 5);
}

TEST_CASE("synthetic generator is learnable by the linear band-power probe") {
    SynthSpec spec;
    spec.per_class = 60;
    spec.subjects = 1;
    spec.noise_scale = 0.5;
    spec.seed = 55;
    const Dataset ds = synth_generate(spec);
    const auto segments = preprocess_trials<double>(ds);
    const double acc = oracle::linear_probe_accuracy(segments, 500.0);
    INFO("probe accuracy " << acc);
    REQUIRE(acc >= 0.90);
}
