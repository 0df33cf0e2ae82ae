#pragma once

#include <span>
#include <vector>

#include "spectropitch/audio.hpp"
#include "spectropitch/cnn.hpp"
#include "spectropitch/contour.hpp"
#include "spectropitch/frontend.hpp"
#include "spectropitch/trainer.hpp"
#include "spectropitch/yin.hpp"

// Slow, obviously-correct counterparts of the performance-sensitive kernels.
// Tests pin the fast paths against these; the bench target times both.
namespace spectropitch::ref {

// O(n^2) transform straight from the definition (bins 0..fft_size/2).
std::vector<double> dft_magnitude(std::span<const double> frame, int fft_size);

// Same framing and windowing as stft_magnitude, but one frame at a time
// through the naive transform.
MagnitudeGrid stft_magnitude_serial(const AudioClip& clip, const FrontendConfig& config);

// Sequential version of the batched gradient: identical slot layout and
// reduction order, no worker threads.
double accumulate_batch_gradients_serial(const CnnModel& model,
                                         std::span<const SpectrogramImage> images,
                                         std::span<const TargetVector> targets,
                                         std::span<const std::size_t> batch, Gradients& out);

// Frame loop without worker threads.
F0Contour yin_f0_serial(const AudioClip& clip, const YinConfig& config);

}  // namespace spectropitch::ref
