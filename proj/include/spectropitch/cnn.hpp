#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spectropitch/contour.hpp"
#include "spectropitch/frontend.hpp"

namespace spectropitch {

inline constexpr std::size_t kConvRows = 16;
inline constexpr std::size_t kConvCols = 3;
inline constexpr std::size_t kConvOutRows = kImageRows - kConvRows + 1;   // 12
inline constexpr std::size_t kConvOutCols = kImageCols - kConvCols + 1;   // 62
inline constexpr std::size_t kPoolRows = kConvOutRows / 2;                // 6
inline constexpr std::size_t kPoolCols = kConvOutCols / 2;                // 31
inline constexpr std::size_t kFc1 = 300;
inline constexpr std::size_t kFc2 = 200;

// Regression net: valid 16x3 convolution (C filters), ReLU, 2x2 max-pool,
// two ReLU dense layers, linear 44-way output. Conv activations are laid out
// (row, col, channel); the pooled plane flattens in that same order. Dense
// weights are output-major: w[o * in + i].
struct CnnModel {
    int conv_filters = 3;
    std::vector<float> conv_w;  // [C][16][3]
    std::vector<float> conv_b;  // [C]
    std::vector<float> fc1_w;   // [300][flatten]
    std::vector<float> fc1_b;
    std::vector<float> fc2_w;   // [200][300]
    std::vector<float> fc2_b;
    std::vector<float> out_w;   // [44][200]
    std::vector<float> out_b;

    std::size_t flatten_dim() const {
        return kPoolRows * kPoolCols * static_cast<std::size_t>(conv_filters);
    }
    std::size_t param_count() const;

    // the eight parameter arrays in serialization order
    std::array<std::vector<float>*, 8> arrays();
    std::array<const std::vector<float>*, 8> arrays() const;
    static std::array<const char*, 8> array_names();
};

// Gradient buffers with the same shapes as the model parameters.
struct Gradients {
    std::vector<float> conv_w, conv_b, fc1_w, fc1_b, fc2_w, fc2_b, out_w, out_b;

    static Gradients zeros_like(const CnnModel& model);
    void zero();
    std::array<std::vector<float>*, 8> arrays();
    std::array<const std::vector<float>*, 8> arrays() const;
};

// Intermediate activations kept for the backward pass; reusable across calls.
// The layer kernels are templated on the scalar so the gradient audit can run
// the exact same code in double precision.
namespace detail {
template <typename T>
struct ActivationsT {
    std::vector<T> conv;     // post-ReLU, (row, col, channel)
    std::vector<T> pooled;   // flatten_dim
    std::vector<std::uint32_t> pool_src;  // conv index feeding each pooled cell
    std::vector<T> h1, h2;   // post-ReLU dense activations
    std::array<T, kTargetLen> y{};
};
}  // namespace detail
using Activations = detail::ActivationsT<float>;

// Glorot-uniform weights (biases zero) drawn in a fixed array order from one
// seeded generator.
CnnModel init_model(int conv_filters, std::uint64_t seed);

// Forward pass. When pattern_hash is non-null it receives a digest of every
// ReLU on/off state and pool argmax choice, so callers can tell whether two
// nearby inputs or parameter settings follow the same linear region.
std::array<float, kTargetLen> forward(const CnnModel& model, const SpectrogramImage& image,
                                      Activations& scratch,
                                      std::uint64_t* pattern_hash = nullptr);

// Mean squared error over the 44 outputs.
double loss_mse(std::span<const float> pred, std::span<const float> target);

// Runs forward then adds dLoss/dParam into grads (caller zeroes when needed).
// Returns the sample loss. Ties in a pool window route gradient to the first
// cell in row-major order; ReLU passes no gradient at exactly zero.
double backward(const CnnModel& model, const SpectrogramImage& image,
                const TargetVector& target, Gradients& grads, Activations& scratch);

struct GradCheckConfig {
    std::size_t n_params = 200;   // parameters sampled across every array
    double epsilon = 1e-3;
    std::uint64_t seed = 0;
    // multiplies the analytic gradient before comparison; lets tests prove
    // the check catches a broken backward pass
    double analytic_scale = 1.0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;   // parameters whose nudge crossed a ReLU/pool boundary
};

// Central-difference check of the backward pass on one sample, run on the
// double instantiation of the same layer kernels the float path uses (float
// storage noise would otherwise swamp small gradients). The loss is piecewise
// quadratic in any single parameter, so the difference quotient is exact
// while both nudges stay in the same activation region; parameters where the
// region flips are retried with a smaller step and skipped if that fails.
GradCheckResult grad_check(const CnnModel& model, const SpectrogramImage& image,
                           const TargetVector& target, const GradCheckConfig& config);

// Double-precision analytic gradients from the shared templated kernels;
// lets tests bound the float path's storage rounding.
struct DoubleGradients {
    std::array<std::vector<double>, 8> arrays;
};
double backward_f64(const CnnModel& model, const SpectrogramImage& image,
                    const TargetVector& target, DoubleGradients& grads);

// Denormalized per-window F0: outputs scaled by f0_norm_hz, values below
// 50 Hz treated as unvoiced, values above 500 Hz clamped.
std::array<double, kTargetLen> predict_window(const CnnModel& model,
                                              const SpectrogramImage& image,
                                              double f0_norm_hz = 500.0);

// Concatenates predict_window over consecutive buffers of one clip into a
// contour whose hop is buffer_s / kTargetLen.
F0Contour predict_f0(const CnnModel& model, const std::vector<SpectrogramImage>& images,
                     double f0_norm_hz = 500.0);

// Little-endian binary model file ("SPF0"): header with version, filter
// count and layer dims, then the eight arrays as float32 in declaration
// order. Anything inconsistent loads as MalformedModelFile.
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace spectropitch
