#include "spectropitch/yin.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectropitch/errors.hpp"
#include "spectropitch/parallel.hpp"

namespace spectropitch {

int YinConfig::window_samples(int sample_rate_hz) const {
    return 2 * static_cast<int>(sample_rate_hz / f_min_hz);
}

void YinConfig::validate(int sample_rate_hz) const {
    if (sample_rate_hz <= 0) throw InvalidSpec("sample rate must be positive");
    if (hop_s <= 0.0) throw InvalidSpec("hop_s must be positive");
    if (f_min_hz <= 0.0 || f_max_hz <= f_min_hz) throw InvalidSpec("need 0 < f_min < f_max");
    if (f_max_hz > 0.5 * sample_rate_hz) throw InvalidSpec("f_max above Nyquist");
    if (threshold <= 0.0 || threshold >= 1.0) throw InvalidSpec("threshold must be in (0, 1)");
    if (unvoiced_cmndf < threshold) throw InvalidSpec("unvoiced_cmndf below threshold");
    if (rms_floor < 0.0) throw InvalidSpec("rms_floor must be >= 0");
    if (static_cast<int>(sample_rate_hz / f_max_hz) < 2) {
        throw InvalidSpec("f_max leaves fewer than two samples per period");
    }
}

double yin_pitch_at(const AudioClip& clip, double center_s, const YinConfig& config) {
    const int sr = clip.sample_rate_hz;
    config.validate(sr);
    const auto w = static_cast<std::size_t>(config.window_samples(sr));
    if (clip.size() < w) throw TooShort("clip shorter than one pitch analysis window");

    const auto n = w / 2;  // fixed summation length
    const auto tau_min = static_cast<std::size_t>(sr / config.f_max_hz);
    const std::size_t tau_max = n;

    auto center = static_cast<long long>(std::llround(center_s * sr));
    long long start = center - static_cast<long long>(w) / 2;
    start = std::clamp(start, 0LL, static_cast<long long>(clip.size() - w));
    const float* x = clip.samples.data() + start;

    double energy = 0.0;
    for (std::size_t i = 0; i < w; ++i) energy += static_cast<double>(x[i]) * x[i];
    if (std::sqrt(energy / static_cast<double>(w)) < config.rms_floor) return 0.0;

    // difference function, then cumulative-mean normalization
    std::vector<double> dprime(tau_max + 1, 1.0);
    double cum = 0.0;
    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = static_cast<double>(x[j]) - static_cast<double>(x[j + tau]);
            d += diff * diff;
        }
        cum += d;
        dprime[tau] = cum > 0.0 ? d * static_cast<double>(tau) / cum : 1.0;
    }

    std::size_t pick = 0;
    for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
        if (dprime[tau] < config.threshold) {
            while (tau + 1 <= tau_max && dprime[tau + 1] < dprime[tau]) ++tau;
            pick = tau;
            break;
        }
    }
    if (pick == 0) {  // no dip under threshold: fall back to the best dip
        pick = tau_min;
        for (std::size_t tau = tau_min + 1; tau <= tau_max; ++tau) {
            if (dprime[tau] < dprime[pick]) pick = tau;
        }
    }
    if (dprime[pick] > config.unvoiced_cmndf) return 0.0;

    double delta = 0.0;
    if (pick > 1 && pick < tau_max) {
        const double a = dprime[pick - 1], b = dprime[pick], c = dprime[pick + 1];
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    const double tau_star = std::clamp(static_cast<double>(pick) + delta,
                                       sr / config.f_max_hz, sr / config.f_min_hz);
    return static_cast<double>(sr) / tau_star;
}

F0Contour yin_f0(const AudioClip& clip, const YinConfig& config) {
    config.validate(clip.sample_rate_hz);
    if (clip.size() < static_cast<std::size_t>(config.window_samples(clip.sample_rate_hz))) {
        throw TooShort("clip shorter than one pitch analysis window");
    }
    const double duration = clip.duration_s();
    const auto frames = static_cast<std::size_t>(std::ceil(duration / config.hop_s - 1e-9));

    F0Contour contour;
    contour.hop_s = config.hop_s;
    contour.f0_hz.assign(frames, 0.0);
    parallel_for(frames, [&](std::size_t j) {
        const double center = (static_cast<double>(j) + 0.5) * config.hop_s;
        contour.f0_hz[j] = yin_pitch_at(clip, center, config);
    });
    return contour;
}

}  // namespace spectropitch
