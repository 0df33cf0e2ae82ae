#pragma once

#include "spectropitch/audio.hpp"
#include "spectropitch/contour.hpp"

namespace spectropitch {

// Autocorrelation-difference pitch tracker used as the non-learned baseline.
// The default hop equals the model's output frame (1.024 s buffer / 44) so
// both detectors land on the same evaluation grid.
struct YinConfig {
    double hop_s = 1.024 / 44.0;
    double f_min_hz = 50.0;
    double f_max_hz = 500.0;
    double threshold = 0.1;        // first normalized-difference dip below this wins
    double unvoiced_cmndf = 0.5;   // dips worse than this report unvoiced
    double rms_floor = 1e-4;       // frames quieter than this report unvoiced

    // analysis window: two full periods of the lowest trackable pitch
    int window_samples(int sample_rate_hz) const;
    void validate(int sample_rate_hz) const;
};

// Single estimate from the window centered at center_s (clamped to fit the
// clip). Returns 0 for unvoiced. Throws TooShort when the clip cannot fill
// one analysis window.
double yin_pitch_at(const AudioClip& clip, double center_s, const YinConfig& config);

// Full-clip track: frame j covers [j*hop, (j+1)*hop) and is analyzed at the
// interval center.
F0Contour yin_f0(const AudioClip& clip, const YinConfig& config);

}  // namespace spectropitch
