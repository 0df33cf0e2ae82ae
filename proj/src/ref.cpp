#include "spectropitch/ref.hpp"

#include <cmath>

#include "spectropitch/errors.hpp"

namespace spectropitch::ref {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<double> dft_magnitude(std::span<const double> frame, int fft_size) {
    if (fft_size <= 0 || frame.size() > static_cast<std::size_t>(fft_size)) {
        throw std::invalid_argument("dft_magnitude: frame longer than transform");
    }
    const auto bins = static_cast<std::size_t>(fft_size / 2 + 1);
    std::vector<double> mag(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < frame.size(); ++t) {
            const double angle = -2.0 * kPi * static_cast<double>(k) *
                                 static_cast<double>(t) / static_cast<double>(fft_size);
            re += frame[t] * std::cos(angle);
            im += frame[t] * std::sin(angle);
        }
        mag[k] = std::sqrt(re * re + im * im);
    }
    return mag;
}

MagnitudeGrid stft_magnitude_serial(const AudioClip& clip, const FrontendConfig& config) {
    config.validate();
    const auto w = static_cast<std::size_t>(config.window_samples());
    const auto hop = static_cast<std::size_t>(config.hop_samples);
    if (clip.size() < w) throw TooShort("clip shorter than one analysis window");
    const std::size_t frames = (clip.size() - w) / hop + 1;
    const auto bins = static_cast<std::size_t>(config.fft_size / 2 + 1);

    std::vector<double> window(w);
    for (std::size_t i = 0; i < w; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                          static_cast<double>(w - 1)));
    }

    MagnitudeGrid grid;
    grid.rows = bins;
    grid.cols = frames;
    grid.data.assign(bins * frames, 0.0f);
    std::vector<double> frame(w);
    for (std::size_t c = 0; c < frames; ++c) {
        const std::size_t off = c * hop;
        for (std::size_t i = 0; i < w; ++i) frame[i] = clip.samples[off + i] * window[i];
        const std::vector<double> mag = dft_magnitude(frame, config.fft_size);
        for (std::size_t r = 0; r < bins; ++r) {
            grid.data[r * frames + c] = static_cast<float>(mag[r]);
        }
    }
    return grid;
}

double accumulate_batch_gradients_serial(const CnnModel& model,
                                         std::span<const SpectrogramImage> images,
                                         std::span<const TargetVector> targets,
                                         std::span<const std::size_t> batch, Gradients& out) {
    if (images.size() != targets.size() || batch.empty()) {
        throw std::invalid_argument("accumulate_batch_gradients_serial: bad inputs");
    }
    const std::size_t b = batch.size();
    std::vector<Gradients> slots(b, Gradients::zeros_like(model));
    std::vector<double> losses(b);
    Activations scratch;
    for (std::size_t i = 0; i < b; ++i) {
        losses[i] = backward(model, images[batch[i]], targets[batch[i]], slots[i], scratch);
    }

    out = Gradients::zeros_like(model);
    auto dst = out.arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
        std::vector<float>& target_arr = *dst[a];
        for (std::size_t j = 0; j < target_arr.size(); ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < b; ++i) acc += (*slots[i].arrays()[a])[j];
            target_arr[j] = static_cast<float>(acc / static_cast<double>(b));
        }
    }
    double loss = 0.0;
    for (const double l : losses) loss += l;
    return loss / static_cast<double>(b);
}

F0Contour yin_f0_serial(const AudioClip& clip, const YinConfig& config) {
    config.validate(clip.sample_rate_hz);
    if (clip.size() < static_cast<std::size_t>(config.window_samples(clip.sample_rate_hz))) {
        throw TooShort("clip shorter than one pitch analysis window");
    }
    const auto frames =
        static_cast<std::size_t>(std::ceil(clip.duration_s() / config.hop_s - 1e-9));
    F0Contour contour;
    contour.hop_s = config.hop_s;
    contour.f0_hz.assign(frames, 0.0);
    for (std::size_t j = 0; j < frames; ++j) {
        const double center = (static_cast<double>(j) + 0.5) * config.hop_s;
        contour.f0_hz[j] = yin_pitch_at(clip, center, config);
    }
    return contour;
}

}  // namespace spectropitch::ref
