#include "spectropitch/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "spectropitch/errors.hpp"
#include "spectropitch/fft.hpp"
#include "spectropitch/parallel.hpp"

namespace spectropitch {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        w[static_cast<std::size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / (n - 1)));
    }
    return w;
}

// linear-interpolated percentile of the values in [first, last)
double percentile_of(std::vector<float> values, double p) {
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}
}  // namespace

void FrontendConfig::validate() const {
    if (sample_rate_hz <= 0) throw InvalidSpec("sample_rate_hz must be positive");
    if (window_s <= 0.0 || window_samples() < 2) throw InvalidSpec("window too short");
    if (hop_samples <= 0) throw InvalidSpec("hop_samples must be positive");
    if (fft_size < window_samples() || (fft_size & (fft_size - 1)) != 0) {
        throw InvalidSpec("fft_size must be a power of two covering the window");
    }
    if (crop_hz <= 0.0 || crop_hz > 0.5 * sample_rate_hz) {
        throw InvalidSpec("crop_hz must be in (0, nyquist]");
    }
    if (crop_bins() < kImageRows) throw InvalidSpec("crop keeps fewer bins than image rows");
    if (percentile < 0.0 || percentile > 100.0) throw InvalidSpec("percentile out of range");
    if (tau < 0.0 || tau >= 1.0) throw InvalidSpec("tau must be in [0, 1)");
    if (f0_norm_hz <= 0.0) throw InvalidSpec("f0_norm_hz must be positive");
}

int FrontendConfig::window_samples() const {
    return static_cast<int>(std::lround(window_s * sample_rate_hz));
}

double FrontendConfig::bin_hz() const {
    return static_cast<double>(sample_rate_hz) / fft_size;
}

double FrontendConfig::frame_hop_s() const {
    return static_cast<double>(hop_samples) / sample_rate_hz;
}

std::size_t FrontendConfig::crop_bins() const {
    // bins strictly below crop_hz
    auto bins = static_cast<std::size_t>(std::ceil(crop_hz / bin_hz() - 1e-9));
    return std::min(bins, static_cast<std::size_t>(fft_size / 2 + 1));
}

std::size_t FrontendConfig::buffer_samples() const {
    return kImageCols * static_cast<std::size_t>(hop_samples);
}

double FrontendConfig::buffer_s() const {
    return static_cast<double>(buffer_samples()) / sample_rate_hz;
}

double FrontendConfig::target_hop_s() const {
    return buffer_s() / static_cast<double>(kTargetLen);
}

MagnitudeGrid stft_magnitude(const AudioClip& clip, const FrontendConfig& config) {
    config.validate();
    if (clip.sample_rate_hz != config.sample_rate_hz) {
        throw std::invalid_argument("stft_magnitude: clip sample rate does not match config");
    }
    const auto w = static_cast<std::size_t>(config.window_samples());
    const auto hop = static_cast<std::size_t>(config.hop_samples);
    if (clip.size() < w) throw TooShort("clip shorter than one analysis window");
    const std::size_t frames = (clip.size() - w) / hop + 1;
    const auto bins = static_cast<std::size_t>(config.fft_size / 2 + 1);
    const std::vector<double> window = hann_window(config.window_samples());

    MagnitudeGrid grid;
    grid.rows = bins;
    grid.cols = frames;
    grid.data.assign(bins * frames, 0.0f);

    parallel_for(frames, [&](std::size_t c) {
        std::vector<double> frame(w);
        const std::size_t off = c * hop;
        for (std::size_t i = 0; i < w; ++i) frame[i] = clip.samples[off + i] * window[i];
        const std::vector<double> mag = real_fft_magnitude(frame, config.fft_size);
        for (std::size_t r = 0; r < bins; ++r) {
            grid.data[r * frames + c] = static_cast<float>(mag[r]);
        }
    });
    return grid;
}

MagnitudeGrid crop_lowpass(const MagnitudeGrid& grid, const FrontendConfig& config) {
    const std::size_t keep = config.crop_bins();
    if (grid.rows < keep) throw BadShape("grid has fewer bins than the crop keeps");
    MagnitudeGrid out;
    out.rows = keep;
    out.cols = grid.cols;
    out.data.assign(grid.data.begin(),
                    grid.data.begin() + static_cast<std::ptrdiff_t>(keep * grid.cols));
    return out;
}

MagnitudeGrid greyscale_tune(const MagnitudeGrid& grid, const FrontendConfig& config) {
    if (grid.data.empty()) throw BadShape("cannot tune an empty grid");
    MagnitudeGrid out = grid;
    for (auto& v : out.data) v = static_cast<float>(std::log1p(static_cast<double>(v)));

    const double floor = percentile_of(out.data, config.percentile);
    float max_v = 0.0f;
    for (auto& v : out.data) {
        v = std::max(0.0f, v - static_cast<float>(floor));
        max_v = std::max(max_v, v);
    }
    if (max_v <= 0.0f) {
        std::fill(out.data.begin(), out.data.end(), 0.0f);
        return out;
    }
    for (auto& v : out.data) {
        v /= max_v;
        if (v < config.tau) v = 0.0f;
    }
    return out;
}

MagnitudeGrid resize_to_model(const MagnitudeGrid& grid) {
    if (grid.rows < kImageRows) throw BadShape("grid has fewer rows than the model expects");
    if (grid.cols != kImageCols) throw BadShape("grid is not one image buffer wide");
    MagnitudeGrid out;
    out.rows = kImageRows;
    out.cols = grid.cols;
    out.data.assign(kImageRows * grid.cols, 0.0f);

    const double step = static_cast<double>(grid.rows) / kImageRows;
    for (std::size_t b = 0; b < kImageRows; ++b) {
        const double lo = b * step;
        const double hi = lo + step;
        for (std::size_t c = 0; c < grid.cols; ++c) {
            double acc = 0.0;
            for (auto r = static_cast<std::size_t>(lo); r < grid.rows && r < hi; ++r) {
                const double overlap =
                    std::min(hi, static_cast<double>(r) + 1.0) - std::max(lo, static_cast<double>(r));
                acc += overlap * grid.at(r, c);
            }
            out.at(b, c) = static_cast<float>(acc / step);
        }
    }
    return out;
}

std::vector<SpectrogramImage> make_image_windows(const AudioClip& clip,
                                                 const FrontendConfig& config) {
    config.validate();
    if (clip.size() < config.buffer_samples()) {
        throw TooShort("clip shorter than one image buffer");
    }
    const MagnitudeGrid cropped = crop_lowpass(stft_magnitude(clip, config), config);
    const std::size_t n_windows = (cropped.cols + kImageCols - 1) / kImageCols;

    std::vector<SpectrogramImage> images(n_windows);
    parallel_for(n_windows, [&](std::size_t wi) {
        MagnitudeGrid slice;
        slice.rows = cropped.rows;
        slice.cols = kImageCols;
        slice.data.assign(slice.rows * kImageCols, 0.0f);
        const std::size_t c0 = wi * kImageCols;
        const std::size_t avail = std::min(kImageCols, cropped.cols - c0);
        for (std::size_t r = 0; r < slice.rows; ++r) {
            for (std::size_t c = 0; c < avail; ++c) slice.at(r, c) = cropped.at(r, c0 + c);
        }
        const MagnitudeGrid small = resize_to_model(greyscale_tune(slice, config));

        SpectrogramImage& img = images[wi];
        img.start_time_s = static_cast<double>(c0) * config.frame_hop_s();
        img.frame_hop_s = config.frame_hop_s();
        for (std::size_t r = 0; r < kImageRows; ++r) {
            for (std::size_t c = 0; c < kImageCols; ++c) img.at(r, c) = small.at(r, c);
        }
    });
    return images;
}

TargetVector make_target(const F0Contour& contour, double window_start_s,
                         const FrontendConfig& config) {
    if (contour.hop_s <= 0.0) throw std::invalid_argument("make_target: bad contour hop");
    TargetVector target{};
    const double hop_t = config.target_hop_s();
    for (std::size_t k = 0; k < kTargetLen; ++k) {
        const double a = window_start_s + static_cast<double>(k) * hop_t;
        const double b = a + hop_t;
        auto j = static_cast<std::size_t>(std::max(0.0, std::ceil(a / contour.hop_s - 1e-9)));
        double sum = 0.0;
        std::size_t voiced = 0;
        for (; j < contour.size() && contour.time_at(j) < b - 1e-12; ++j) {
            if (contour.voiced(j)) {
                sum += contour.f0_hz[j];
                ++voiced;
            }
        }
        target[k] = voiced > 0 ? static_cast<float>(sum / static_cast<double>(voiced) /
                                                    config.f0_norm_hz)
                               : 0.0f;
    }
    return target;
}

void write_pgm(const SpectrogramImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    char header[64];
    const int len = std::snprintf(header, sizeof(header), "P5\n%zu %zu\n255\n", kImageCols,
                                  kImageRows);
    out.write(header, len);
    for (std::size_t r = kImageRows; r-- > 0;) {  // highest band first
        for (std::size_t c = 0; c < kImageCols; ++c) {
            const double v = std::clamp(static_cast<double>(image.at(r, c)), 0.0, 1.0);
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            out.put(static_cast<char>(byte));
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spectropitch
