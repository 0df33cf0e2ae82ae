#include "spectropitch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "spectropitch/errors.hpp"
#include "spectropitch/fft.hpp"
#include "spectropitch/parallel.hpp"
#include "spectropitch/rng.hpp"

namespace spectropitch {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kF0Floor = 50.0;
constexpr double kF0Ceil = 500.0;
constexpr double kPeakNorm = 0.8;
}  // namespace

Trajectory Trajectory::constant(double f_hz) {
    Trajectory t;
    t.kind = Kind::constant;
    t.f_start_hz = t.f_end_hz = f_hz;
    return t;
}

Trajectory Trajectory::glide(double f_start_hz, double f_end_hz) {
    Trajectory t;
    t.kind = Kind::glide;
    t.f_start_hz = f_start_hz;
    t.f_end_hz = f_end_hz;
    return t;
}

Trajectory Trajectory::vibrato(double f_center_hz, double depth_hz, double rate_hz) {
    Trajectory t;
    t.kind = Kind::vibrato;
    t.f_start_hz = t.f_end_hz = f_center_hz;
    t.depth_hz = depth_hz;
    t.rate_hz = rate_hz;
    return t;
}

double Trajectory::at(double t_s, double duration_s) const {
    switch (kind) {
        case Kind::constant:
            return f_start_hz;
        case Kind::glide: {
            const double u = duration_s > 0.0 ? t_s / duration_s : 0.0;
            return f_start_hz + (f_end_hz - f_start_hz) * u;
        }
        case Kind::vibrato:
            return f_start_hz + depth_hz * std::sin(2.0 * kPi * rate_hz * t_s);
    }
    return f_start_hz;
}

double Trajectory::min_hz() const {
    switch (kind) {
        case Kind::constant:
            return f_start_hz;
        case Kind::glide:
            return std::min(f_start_hz, f_end_hz);
        case Kind::vibrato:
            return f_start_hz - std::abs(depth_hz);
    }
    return f_start_hz;
}

double Trajectory::max_hz() const {
    switch (kind) {
        case Kind::constant:
            return f_start_hz;
        case Kind::glide:
            return std::max(f_start_hz, f_end_hz);
        case Kind::vibrato:
            return f_start_hz + std::abs(depth_hz);
    }
    return f_start_hz;
}

void SynthSpec::validate() const {
    if (duration_s <= 0.0) throw InvalidSpec("duration_s must be positive");
    if (sample_rate_hz <= 0) throw InvalidSpec("sample_rate_hz must be positive");
    if (n_harmonics < 1) throw InvalidSpec("n_harmonics must be >= 1");
    if (rolloff_db_per_harmonic < 0.0) throw InvalidSpec("rolloff_db_per_harmonic must be >= 0");
    if (contour_hop_s <= 0.0) throw InvalidSpec("contour_hop_s must be positive");
    if (trajectory.min_hz() < kF0Floor || trajectory.max_hz() > kF0Ceil) {
        throw InvalidSpec("trajectory frequencies must stay within [50, 500] Hz");
    }
    if (trajectory.max_hz() >= 0.5 * sample_rate_hz) {
        throw InvalidSpec("fundamental exceeds Nyquist");
    }
    double prev_end = 0.0;
    for (const auto& [start, end] : voiced_segments) {
        if (start < prev_end || end <= start || end > duration_s + 1e-9) {
            throw InvalidSpec("voiced_segments must be disjoint, sorted and within the clip");
        }
        prev_end = end;
    }
}

std::pair<AudioClip, F0Contour> synth_harmonic(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int sr = spec.sample_rate_hz;
    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * sr));
    const double nyquist = 0.5 * sr;
    const double f_max = spec.trajectory.max_hz();

    // harmonics that would cross Nyquist anywhere along the trajectory are dropped
    int kept = 0;
    for (int k = 1; k <= spec.n_harmonics; ++k) {
        if (k * f_max < nyquist) kept = k;
    }

    Rng rng(seed);
    std::vector<double> amp(static_cast<std::size_t>(kept));
    std::vector<double> phase0(static_cast<std::size_t>(kept));
    for (int k = 0; k < kept; ++k) {
        amp[static_cast<std::size_t>(k)] =
            std::pow(10.0, -spec.rolloff_db_per_harmonic * k / 20.0);
        phase0[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2.0 * kPi);
    }

    AudioClip clip;
    clip.sample_rate_hz = sr;
    clip.samples.resize(n, 0.0f);

    std::vector<double> raw(n, 0.0);
    double phase = 0.0;  // 2*pi * integral of f0
    std::size_t seg = 0;
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        while (seg < spec.voiced_segments.size() && t >= spec.voiced_segments[seg].second) ++seg;
        const bool voiced =
            seg < spec.voiced_segments.size() && t >= spec.voiced_segments[seg].first;
        const double f = spec.trajectory.at(t, spec.duration_s);
        if (voiced) {
            double s = 0.0;
            for (int k = 0; k < kept; ++k) {
                s += amp[static_cast<std::size_t>(k)] *
                     std::sin((k + 1) * phase + phase0[static_cast<std::size_t>(k)]);
            }
            raw[i] = s;
            peak = std::max(peak, std::abs(s));
        }
        phase += 2.0 * kPi * f / sr;
    }
    const double scale = peak > 0.0 ? kPeakNorm / peak : 0.0;
    for (std::size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(raw[i] * scale);

    F0Contour contour;
    contour.hop_s = spec.contour_hop_s;
    const auto frames =
        static_cast<std::size_t>(std::ceil(spec.duration_s / spec.contour_hop_s - 1e-9));
    contour.f0_hz.resize(frames, 0.0);
    seg = 0;
    for (std::size_t j = 0; j < frames; ++j) {
        const double t = static_cast<double>(j) * spec.contour_hop_s;
        while (seg < spec.voiced_segments.size() && t >= spec.voiced_segments[seg].second) ++seg;
        const bool voiced =
            seg < spec.voiced_segments.size() && t >= spec.voiced_segments[seg].first;
        if (voiced) contour.f0_hz[j] = spec.trajectory.at(t, spec.duration_s);
    }
    return {std::move(clip), std::move(contour)};
}

const char* to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::white:
            return "white";
        case NoiseKind::pink:
            return "pink";
        case NoiseKind::road_surrogate:
            return "road_surrogate";
    }
    return "white";
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "white") return NoiseKind::white;
    if (name == "pink") return NoiseKind::pink;
    if (name == "road_surrogate") return NoiseKind::road_surrogate;
    throw std::invalid_argument("unknown noise kind: " + name);
}

AudioClip gen_noise(NoiseKind kind, std::size_t n_samples, int sample_rate_hz,
                    std::uint64_t seed) {
    if (n_samples == 0) throw std::invalid_argument("gen_noise: n_samples must be positive");
    if (sample_rate_hz <= 0) throw std::invalid_argument("gen_noise: bad sample rate");

    Rng rng(seed);
    AudioClip clip;
    clip.sample_rate_hz = sample_rate_hz;
    clip.samples.resize(n_samples);

    switch (kind) {
        case NoiseKind::white: {
            for (auto& s : clip.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
            break;
        }
        case NoiseKind::pink: {
            // white spectrum shaped by 1/sqrt(f), mirrored to keep the
            // inverse transform real
            const std::size_t m = next_pow2(std::max<std::size_t>(n_samples, 2));
            std::vector<std::complex<double>> buf(m);
            for (auto& x : buf) x = {rng.uniform(-1.0, 1.0), 0.0};
            fft_inplace(buf);
            buf[0] = 0.0;
            for (std::size_t k = 1; k <= m / 2; ++k) {
                const double g = 1.0 / std::sqrt(static_cast<double>(k));
                buf[k] *= g;
                if (k != m - k) buf[m - k] *= g;
            }
            fft_inplace(buf, true);
            double peak = 0.0;
            for (std::size_t i = 0; i < n_samples; ++i) {
                peak = std::max(peak, std::abs(buf[i].real()));
            }
            const double scale = peak > 0.0 ? 0.5 / peak : 0.0;
            for (std::size_t i = 0; i < n_samples; ++i) {
                clip.samples[i] = static_cast<float>(buf[i].real() * scale);
            }
            break;
        }
        case NoiseKind::road_surrogate: {
            // two cascaded one-pole low-pass sections at 300 Hz; a single
            // section leaves roughly a third of the energy above 500 Hz,
            // which is not low-frequency-dominated enough for a cabin-noise
            // stand-in
            const double alpha = std::exp(-2.0 * kPi * 300.0 / sample_rate_hz);
            double y1 = 0.0, y2 = 0.0;
            std::vector<double> raw(n_samples);
            double peak = 0.0;
            for (std::size_t i = 0; i < n_samples; ++i) {
                const double x = rng.uniform(-0.5, 0.5);
                y1 = alpha * y1 + (1.0 - alpha) * x;
                y2 = alpha * y2 + (1.0 - alpha) * y1;
                raw[i] = y2;
                peak = std::max(peak, std::abs(y2));
            }
            const double scale = peak > 0.0 ? 0.5 / peak : 0.0;
            for (std::size_t i = 0; i < n_samples; ++i) {
                clip.samples[i] = static_cast<float>(raw[i] * scale);
            }
            break;
        }
    }
    return clip;
}

AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db) {
    if (signal.sample_rate_hz != noise.sample_rate_hz) {
        throw std::invalid_argument("mix_at_snr: sample rates differ");
    }
    if (noise.size() < signal.size()) {
        throw std::invalid_argument("mix_at_snr: noise shorter than signal");
    }

    // powers over the voiced support only; silence must not deflate them
    double p_sig = 0.0, p_noise = 0.0;
    std::size_t support = 0;
    for (std::size_t i = 0; i < signal.size(); ++i) {
        if (signal.samples[i] != 0.0f) {
            const double s = signal.samples[i];
            const double v = noise.samples[i];
            p_sig += s * s;
            p_noise += v * v;
            ++support;
        }
    }
    if (support == 0 || p_sig <= 0.0) throw ZeroPower("mix_at_snr: silent signal");
    if (p_noise <= 0.0) throw ZeroPower("mix_at_snr: silent noise");
    p_sig /= static_cast<double>(support);
    p_noise /= static_cast<double>(support);

    const double scale = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));

    AudioClip out;
    out.sample_rate_hz = signal.sample_rate_hz;
    out.samples.resize(signal.size());
    for (std::size_t i = 0; i < signal.size(); ++i) {
        const double v = signal.samples[i] + scale * noise.samples[i];
        out.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    return out;
}

void DatasetConfig::validate() const {
    if (train_count < 0 || val_count < 0 || test_count < 0) {
        throw InvalidSpec("split counts must be non-negative");
    }
    if (train_count + val_count + test_count == 0) throw InvalidSpec("empty dataset");
    if (snr_db.empty()) throw InvalidSpec("snr_db list must be nonempty");
    if (noise_kinds.empty()) throw InvalidSpec("noise_kinds must be nonempty");
    if (f_min_hz < kF0Floor || f_max_hz > kF0Ceil || f_min_hz >= f_max_hz) {
        throw InvalidSpec("sampler F0 range must be inside [50, 500] Hz");
    }
    if (voiced_fraction <= 0.0 || voiced_fraction >= 1.0) {
        throw InvalidSpec("voiced_fraction must be in (0, 1)");
    }
    if (constant_weight < 0 || glide_weight < 0 || vibrato_weight < 0 ||
        constant_weight + glide_weight + vibrato_weight <= 0) {
        throw InvalidSpec("trajectory weights must be non-negative and not all zero");
    }
    if (duration_s <= 0.0) throw InvalidSpec("duration_s must be positive");
}

SynthSpec sample_entry_spec(const DatasetConfig& config, std::uint64_t entry_seed) {
    Rng rng(entry_seed);
    SynthSpec spec;
    spec.duration_s = config.duration_s;
    spec.sample_rate_hz = config.sample_rate_hz;
    spec.n_harmonics = config.n_harmonics;
    spec.rolloff_db_per_harmonic = config.rolloff_db_per_harmonic;
    spec.contour_hop_s = config.contour_hop_s;

    const double total = config.constant_weight + config.glide_weight + config.vibrato_weight;
    const double pick = rng.uniform(0.0, total);
    if (pick < config.constant_weight) {
        spec.trajectory = Trajectory::constant(rng.uniform(config.f_min_hz, config.f_max_hz));
    } else if (pick < config.constant_weight + config.glide_weight) {
        const double span = config.f_max_hz - config.f_min_hz;
        const double f_start = rng.uniform(config.f_min_hz, config.f_max_hz);
        const double gap = rng.uniform(0.2, 0.6) * span;
        double f_end = rng.uniform() < 0.5 ? f_start - gap : f_start + gap;
        if (f_end < config.f_min_hz || f_end > config.f_max_hz) {
            f_end = 2.0 * f_start - f_end;  // reflect back into range
        }
        f_end = std::clamp(f_end, config.f_min_hz, config.f_max_hz);
        spec.trajectory = Trajectory::glide(f_start, f_end);
    } else {
        // prosody-like pitch movement: wide swing at a slow rate, so the
        // contour changes little within one output frame yet spans enough
        // range for a meaningful per-entry correlation
        const double depth = rng.uniform(15.0, 45.0);
        const double center =
            rng.uniform(config.f_min_hz + depth, config.f_max_hz - depth);
        spec.trajectory = Trajectory::vibrato(center, depth, rng.uniform(0.5, 1.5));
    }

    // a clip carries a few utterance-length voiced runs rather than many short
    // bursts; a boundary slot's target is ambiguous (the onset position inside
    // the slot is below image resolution), so boundary density is kept low
    const int n_seg = (spec.duration_s >= 6.0 ? 2 : 1) + (rng.uniform() < 0.5 ? 1 : 0);
    const double frac = std::clamp(config.voiced_fraction * rng.uniform(0.92, 1.08), 0.05, 0.92);
    const double voiced_total = frac * spec.duration_s;
    const double silence_total = spec.duration_s - voiced_total;
    std::vector<double> seg_w(static_cast<std::size_t>(n_seg));
    std::vector<double> gap_w(static_cast<std::size_t>(n_seg) + 1);
    double seg_sum = 0.0, gap_sum = 0.0;
    for (auto& w : seg_w) seg_sum += w = rng.uniform(0.6, 1.4);
    for (auto& w : gap_w) gap_sum += w = rng.uniform(0.3, 1.0);
    double t = 0.0;
    for (int i = 0; i < n_seg; ++i) {
        t += silence_total * gap_w[static_cast<std::size_t>(i)] / gap_sum;
        const double len = voiced_total * seg_w[static_cast<std::size_t>(i)] / seg_sum;
        spec.voiced_segments.emplace_back(t, t + len);
        t += len;
    }
    return spec;
}

namespace {

struct PlannedEntry {
    DatasetEntry meta;
    std::filesystem::path clip_abs;
    std::filesystem::path contour_abs;
};

}  // namespace

DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir) {
    config.validate();

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const char* split_names[3] = {"train", "val", "test"};
    const int counts[3] = {config.train_count, config.val_count, config.test_count};
    for (int s = 0; s < 3; ++s) {
        if (counts[s] > 0) std::filesystem::create_directories(out_dir / split_names[s], ec);
    }
    if (ec) throw IoError("cannot create dataset directories under " + out_dir.string());

    std::vector<PlannedEntry> plan;
    std::size_t global = 0;
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < counts[s]; ++i, ++global) {
            PlannedEntry p;
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%06d", split_names[s], i);
            p.meta.id = name;
            p.meta.split = split_names[s];
            std::snprintf(name, sizeof(name), "%s/clip_%06d.wav", split_names[s], i);
            p.meta.clip_path = name;
            std::snprintf(name, sizeof(name), "%s/contour_%06d.csv", split_names[s], i);
            p.meta.contour_path = name;
            p.meta.snr_db = config.snr_db[global % config.snr_db.size()];
            p.meta.noise_kind = config.noise_kinds[global % config.noise_kinds.size()];
            p.meta.seed = derive_seed(config.seed, global);
            p.clip_abs = out_dir / p.meta.clip_path;
            p.contour_abs = out_dir / p.meta.contour_path;
            plan.push_back(std::move(p));
        }
    }

    std::vector<std::string> failures(plan.size());
    parallel_for(plan.size(), [&](std::size_t i) {
        const PlannedEntry& p = plan[i];
        try {
            const SynthSpec spec = sample_entry_spec(config, p.meta.seed);
            auto [clip, contour] = synth_harmonic(spec, derive_seed(p.meta.seed, 1));
            const AudioClip noise = gen_noise(p.meta.noise_kind, clip.size(),
                                              config.sample_rate_hz, derive_seed(p.meta.seed, 2));
            const AudioClip mixed = mix_at_snr(clip, noise, p.meta.snr_db);
            write_wav(mixed, p.clip_abs);
            write_contour_csv(contour, p.contour_abs);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) {
            throw IoError("entry " + plan[i].meta.id + " failed: " + failures[i]);
        }
    }

    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.entries.reserve(plan.size());
    for (auto& p : plan) manifest.entries.push_back(std::move(p.meta));
    write_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"id", e.id},
                           {"split", e.split},
                           {"clip", e.clip_path},
                           {"contour", e.contour_path},
                           {"snr_db", e.snr_db},
                           {"noise_kind", to_string(e.noise_kind)},
                           {"seed", e.seed}});
    }
    nlohmann::json doc{{"entries", entries}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
    DatasetManifest manifest;
    manifest.root = path.parent_path();
    try {
        for (const auto& j : doc.at("entries")) {
            DatasetEntry e;
            e.id = j.at("id").get<std::string>();
            e.split = j.at("split").get<std::string>();
            e.clip_path = j.at("clip").get<std::string>();
            e.contour_path = j.at("contour").get<std::string>();
            e.snr_db = j.at("snr_db").get<double>();
            e.noise_kind = noise_kind_from_string(j.at("noise_kind").get<std::string>());
            e.seed = j.at("seed").get<std::uint64_t>();
            manifest.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
    return manifest;
}

}  // namespace spectropitch
