#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spectropitch/audio.hpp"
#include "spectropitch/contour.hpp"

namespace spectropitch {

// F0 trajectory over the clip. All frequencies must stay in [50, 500] Hz.
struct Trajectory {
    enum class Kind { constant, glide, vibrato };

    Kind kind = Kind::constant;
    double f_start_hz = 200.0;  // constant value, glide start, or vibrato center
    double f_end_hz = 200.0;    // glide end
    double depth_hz = 0.0;      // vibrato
    double rate_hz = 0.0;       // vibrato

    static Trajectory constant(double f_hz);
    static Trajectory glide(double f_start_hz, double f_end_hz);
    static Trajectory vibrato(double f_center_hz, double depth_hz, double rate_hz);

    double at(double t_s, double duration_s) const;
    double min_hz() const;
    double max_hz() const;
};

struct SynthSpec {
    double duration_s = 2.0;
    Trajectory trajectory;
    std::vector<std::pair<double, double>> voiced_segments;  // [start_s, end_s)
    int n_harmonics = 10;
    double rolloff_db_per_harmonic = 3.0;
    int sample_rate_hz = 16000;
    double contour_hop_s = 0.005;

    void validate() const;  // throws InvalidSpec
};

// Renders the harmonic stack with phase accumulated from the running F0
// integral, gated by the voiced segments and peak-normalized to 0.8.
// Harmonics that would cross Nyquist are dropped; the seed only randomizes
// per-harmonic initial phases.
std::pair<AudioClip, F0Contour> synth_harmonic(const SynthSpec& spec, std::uint64_t seed);

enum class NoiseKind { white, pink, road_surrogate };

const char* to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

// Deterministic per (kind, n, sample rate, seed). white: flat PSD,
// pink: -3 dB/octave, road_surrogate: low-pass shaped (energy concentrated
// below typical speech harmonics).
AudioClip gen_noise(NoiseKind kind, std::size_t n_samples, int sample_rate_hz,
                    std::uint64_t seed);

// Scales the noise so that 10*log10(P_signal / P_noise) == snr_db, with both
// powers measured over the signal's voiced support (samples where the signal
// is nonzero). The sum is clipped to [-1, 1].
AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db);

struct DatasetEntry {
    std::string id;
    std::string split;  // train | val | test
    std::string clip_path;     // relative to the manifest directory
    std::string contour_path;  // relative to the manifest directory
    double snr_db = 0.0;
    NoiseKind noise_kind = NoiseKind::white;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<DatasetEntry> entries;
    std::filesystem::path root;  // directory the relative paths resolve against

    std::filesystem::path clip_file(const DatasetEntry& e) const { return root / e.clip_path; }
    std::filesystem::path contour_file(const DatasetEntry& e) const {
        return root / e.contour_path;
    }
};

struct DatasetConfig {
    int train_count = 600;
    int val_count = 150;
    int test_count = 100;
    std::vector<double> snr_db{20.0};
    std::vector<NoiseKind> noise_kinds{NoiseKind::white, NoiseKind::pink,
                                       NoiseKind::road_surrogate};
    double duration_s = 12.288;
    double f_min_hz = 100.0;
    double f_max_hz = 400.0;
    double voiced_fraction = 0.7;
    double constant_weight = 0.2;
    double glide_weight = 0.4;
    double vibrato_weight = 0.4;
    int n_harmonics = 10;
    double rolloff_db_per_harmonic = 2.0;
    double contour_hop_s = 0.005;
    int sample_rate_hz = 16000;
    std::uint64_t seed = 1;

    void validate() const;
};

// Draws one SynthSpec from the sampler ranges. Exposed so tests and the
// baseline study can generate single entries outside build_dataset.
SynthSpec sample_entry_spec(const DatasetConfig& config, std::uint64_t entry_seed);

// Generates WAV + contour files under out_dir/{train,val,test} plus
// manifest.json. Bit-for-bit reproducible from the config; entries may be
// rendered in parallel, the manifest is written once at the end.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace spectropitch
