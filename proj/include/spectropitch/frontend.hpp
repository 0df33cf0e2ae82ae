#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "spectropitch/audio.hpp"
#include "spectropitch/contour.hpp"

namespace spectropitch {

inline constexpr std::size_t kImageRows = 27;   // frequency bands, low to high
inline constexpr std::size_t kImageCols = 64;   // time frames per image
inline constexpr std::size_t kTargetLen = 44;   // F0 sub-intervals per image

// Spectrogram frontend settings. Defaults give 400-sample Hann windows with a
// 256-sample hop, a 512-point FFT (31.25 Hz bins) cropped to 0..2 kHz, and
// 64-frame (1.024 s) image buffers.
struct FrontendConfig {
    int sample_rate_hz = 16000;
    double window_s = 0.025;
    int hop_samples = 256;
    int fft_size = 512;
    double crop_hz = 2000.0;
    double percentile = 20.0;     // per-image noise floor estimate
    double tau = 0.15;            // pixels below this go to zero
    double f0_norm_hz = 500.0;    // target normalizer

    void validate() const;

    int window_samples() const;
    double bin_hz() const;
    double frame_hop_s() const;
    std::size_t crop_bins() const;        // FFT bins kept below crop_hz
    std::size_t buffer_samples() const;   // samples per image buffer
    double buffer_s() const;
    double target_hop_s() const;          // buffer_s / kTargetLen
};

// Row-major magnitude plane: rows are frequency bins (row 0 = DC), columns
// are time frames.
struct MagnitudeGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// One model input: kImageRows x kImageCols grey pixels in [0, 1], row 0 the
// lowest band, plus where the buffer sits in the source clip.
struct SpectrogramImage {
    std::array<float, kImageRows * kImageCols> pixels{};
    double start_time_s = 0.0;
    double frame_hop_s = 0.0;

    float& at(std::size_t r, std::size_t c) { return pixels[r * kImageCols + c]; }
    float at(std::size_t r, std::size_t c) const { return pixels[r * kImageCols + c]; }
};

using TargetVector = std::array<float, kTargetLen>;

// Magnitude STFT with a Hann window. Frames = floor((len - window) / hop) + 1;
// throws TooShort when the clip cannot fill a single window.
MagnitudeGrid stft_magnitude(const AudioClip& clip, const FrontendConfig& config);

// Keeps the bins strictly below crop_hz (rows 0..crop_bins-1).
MagnitudeGrid crop_lowpass(const MagnitudeGrid& grid, const FrontendConfig& config);

// Per-image grey-scale tuning: log1p compression, subtract the per-image
// percentile floor, clamp at zero, min-max normalize, then zero everything
// below tau. A constant image tunes to all zeros.
MagnitudeGrid greyscale_tune(const MagnitudeGrid& grid, const FrontendConfig& config);

// Area-weighted reduction of the frequency axis to kImageRows bands.
MagnitudeGrid resize_to_model(const MagnitudeGrid& grid);

// Full pipeline: STFT, crop, split into ceil(frames / kImageCols) buffers
// (last one zero-padded), tune and resize each. Throws TooShort when the
// clip is shorter than one buffer.
std::vector<SpectrogramImage> make_image_windows(const AudioClip& clip,
                                                 const FrontendConfig& config);

// Per-image regression target: the buffer is split into kTargetLen equal
// sub-intervals; each slot is the mean voiced F0 over that sub-interval
// divided by f0_norm_hz, or 0 when no voiced contour sample falls inside.
TargetVector make_target(const F0Contour& contour, double window_start_s,
                         const FrontendConfig& config);

// Binary PGM (P5, maxval 255) with the highest frequency band on top.
void write_pgm(const SpectrogramImage& image, const std::filesystem::path& path);

}  // namespace spectropitch
