#include "spectropitch/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "spectropitch/errors.hpp"
#include "spectropitch/rng.hpp"

namespace spectropitch {

namespace {

constexpr std::size_t kConvKernel = kConvRows * kConvCols;  // 48
constexpr std::uint32_t kModelVersion = 1;
constexpr double kVoicedFloorHz = 50.0;

void check_shapes(const CnnModel& m) {
    const auto C = static_cast<std::size_t>(m.conv_filters);
    if (m.conv_filters < 1) throw BadShape("model needs at least one conv filter");
    const std::size_t flat = m.flatten_dim();
    const bool ok = m.conv_w.size() == C * kConvKernel && m.conv_b.size() == C &&
                    m.fc1_w.size() == kFc1 * flat && m.fc1_b.size() == kFc1 &&
                    m.fc2_w.size() == kFc2 * kFc1 && m.fc2_b.size() == kFc2 &&
                    m.out_w.size() == kTargetLen * kFc2 && m.out_b.size() == kTargetLen;
    if (!ok) throw BadShape("model parameter arrays do not match the declared layer sizes");
}

struct Fnv1a {
    std::uint64_t h = 14695981039346656037ULL;
    void byte(std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ULL;
    }
};

// Layer kernels shared by the float production path and the double-precision
// gradient audit. Accumulation is always double; T is the storage type.

template <typename T>
struct ParamsView {
    std::size_t C = 0;
    std::size_t flat = 0;
    std::array<const T*, 8> p{};  // conv_w conv_b fc1_w fc1_b fc2_w fc2_b out_w out_b
};

template <typename T>
void forward_impl(const ParamsView<T>& m, const SpectrogramImage& image,
                  detail::ActivationsT<T>& s, Fnv1a* hash) {
    const std::size_t C = m.C;
    const std::size_t flat = m.flat;
    s.conv.assign(kConvOutRows * kConvOutCols * C, T(0));
    s.pooled.assign(flat, T(0));
    s.pool_src.assign(flat, 0);
    s.h1.assign(kFc1, T(0));
    s.h2.assign(kFc2, T(0));

    for (std::size_t f = 0; f < C; ++f) {
        const T* w = m.p[0] + f * kConvKernel;
        const double b = m.p[1][f];
        for (std::size_t r = 0; r < kConvOutRows; ++r) {
            for (std::size_t c = 0; c < kConvOutCols; ++c) {
                double acc = b;
                for (std::size_t i = 0; i < kConvRows; ++i) {
                    const float* px = &image.pixels[(r + i) * kImageCols + c];
                    const T* wk = w + i * kConvCols;
                    for (std::size_t j = 0; j < kConvCols; ++j) {
                        acc += static_cast<double>(px[j]) * static_cast<double>(wk[j]);
                    }
                }
                const T v = acc > 0.0 ? static_cast<T>(acc) : T(0);
                s.conv[(r * kConvOutCols + c) * C + f] = v;
                if (hash != nullptr) hash->byte(v > T(0) ? 1 : 0);
            }
        }
    }

    for (std::size_t r2 = 0; r2 < kPoolRows; ++r2) {
        for (std::size_t c2 = 0; c2 < kPoolCols; ++c2) {
            for (std::size_t f = 0; f < C; ++f) {
                T best = T(-1);
                std::uint32_t best_idx = 0;
                std::uint8_t which = 0;
                for (std::size_t dr = 0; dr < 2; ++dr) {
                    for (std::size_t dc = 0; dc < 2; ++dc) {
                        const auto idx = static_cast<std::uint32_t>(
                            ((2 * r2 + dr) * kConvOutCols + (2 * c2 + dc)) * C + f);
                        if (s.conv[idx] > best) {  // strict: ties keep the first cell
                            best = s.conv[idx];
                            best_idx = idx;
                            which = static_cast<std::uint8_t>(dr * 2 + dc);
                        }
                    }
                }
                const std::size_t out_idx = (r2 * kPoolCols + c2) * C + f;
                s.pooled[out_idx] = best;
                s.pool_src[out_idx] = best_idx;
                if (hash != nullptr) hash->byte(which);
            }
        }
    }

    for (std::size_t o = 0; o < kFc1; ++o) {
        const T* w = m.p[2] + o * flat;
        double acc = m.p[3][o];
        for (std::size_t i = 0; i < flat; ++i) {
            acc += static_cast<double>(w[i]) * static_cast<double>(s.pooled[i]);
        }
        s.h1[o] = acc > 0.0 ? static_cast<T>(acc) : T(0);
        if (hash != nullptr) hash->byte(s.h1[o] > T(0) ? 1 : 0);
    }
    for (std::size_t o = 0; o < kFc2; ++o) {
        const T* w = m.p[4] + o * kFc1;
        double acc = m.p[5][o];
        for (std::size_t i = 0; i < kFc1; ++i) {
            acc += static_cast<double>(w[i]) * static_cast<double>(s.h1[i]);
        }
        s.h2[o] = acc > 0.0 ? static_cast<T>(acc) : T(0);
        if (hash != nullptr) hash->byte(s.h2[o] > T(0) ? 1 : 0);
    }
    for (std::size_t k = 0; k < kTargetLen; ++k) {
        const T* w = m.p[6] + k * kFc2;
        double acc = m.p[7][k];
        for (std::size_t i = 0; i < kFc2; ++i) {
            acc += static_cast<double>(w[i]) * static_cast<double>(s.h2[i]);
        }
        s.y[k] = static_cast<T>(acc);
    }
}

template <typename T>
double loss_of(const std::array<T, kTargetLen>& y, const TargetVector& target) {
    double acc = 0.0;
    for (std::size_t k = 0; k < kTargetLen; ++k) {
        const double d = static_cast<double>(y[k]) - static_cast<double>(target[k]);
        acc += d * d;
    }
    return acc / static_cast<double>(kTargetLen);
}

// Adds dLoss/dParam into g (same 8-array layout as ParamsView). Gradient of
// the mean squared error over the 44 outputs.
template <typename T>
double backward_impl(const ParamsView<T>& m, const SpectrogramImage& image,
                     const TargetVector& target, const std::array<T*, 8>& g,
                     detail::ActivationsT<T>& s) {
    forward_impl(m, image, s, nullptr);
    const std::size_t C = m.C;
    const std::size_t flat = m.flat;
    const double loss = loss_of(s.y, target);

    std::array<double, kTargetLen> dy{};
    for (std::size_t k = 0; k < kTargetLen; ++k) {
        dy[k] = 2.0 * (static_cast<double>(s.y[k]) - static_cast<double>(target[k])) /
                static_cast<double>(kTargetLen);
    }

    std::vector<double> dh2(kFc2, 0.0);
    for (std::size_t k = 0; k < kTargetLen; ++k) {
        const T* w = m.p[6] + k * kFc2;
        T* gw = g[6] + k * kFc2;
        for (std::size_t i = 0; i < kFc2; ++i) {
            gw[i] += static_cast<T>(dy[k] * static_cast<double>(s.h2[i]));
            dh2[i] += dy[k] * static_cast<double>(w[i]);
        }
        g[7][k] += static_cast<T>(dy[k]);
    }
    for (std::size_t i = 0; i < kFc2; ++i) {
        if (s.h2[i] <= T(0)) dh2[i] = 0.0;  // ReLU passes nothing at exactly zero
    }

    std::vector<double> dh1(kFc1, 0.0);
    for (std::size_t o = 0; o < kFc2; ++o) {
        if (dh2[o] == 0.0) continue;
        const T* w = m.p[4] + o * kFc1;
        T* gw = g[4] + o * kFc1;
        for (std::size_t i = 0; i < kFc1; ++i) {
            gw[i] += static_cast<T>(dh2[o] * static_cast<double>(s.h1[i]));
            dh1[i] += dh2[o] * static_cast<double>(w[i]);
        }
        g[5][o] += static_cast<T>(dh2[o]);
    }
    for (std::size_t i = 0; i < kFc1; ++i) {
        if (s.h1[i] <= T(0)) dh1[i] = 0.0;
    }

    std::vector<double> dflat(flat, 0.0);
    for (std::size_t o = 0; o < kFc1; ++o) {
        if (dh1[o] == 0.0) continue;
        const T* w = m.p[2] + o * flat;
        T* gw = g[2] + o * flat;
        for (std::size_t i = 0; i < flat; ++i) {
            gw[i] += static_cast<T>(dh1[o] * static_cast<double>(s.pooled[i]));
            dflat[i] += dh1[o] * static_cast<double>(w[i]);
        }
        g[3][o] += static_cast<T>(dh1[o]);
    }

    std::vector<double> dconv(s.conv.size(), 0.0);
    for (std::size_t i = 0; i < flat; ++i) dconv[s.pool_src[i]] += dflat[i];
    for (std::size_t i = 0; i < dconv.size(); ++i) {
        if (s.conv[i] <= T(0)) dconv[i] = 0.0;
    }

    std::vector<double> gcw(C * kConvKernel, 0.0);
    std::vector<double> gcb(C, 0.0);
    for (std::size_t r = 0; r < kConvOutRows; ++r) {
        for (std::size_t c = 0; c < kConvOutCols; ++c) {
            for (std::size_t f = 0; f < C; ++f) {
                const double d = dconv[(r * kConvOutCols + c) * C + f];
                if (d == 0.0) continue;
                double* gw = gcw.data() + f * kConvKernel;
                for (std::size_t i = 0; i < kConvRows; ++i) {
                    const float* px = &image.pixels[(r + i) * kImageCols + c];
                    for (std::size_t j = 0; j < kConvCols; ++j) {
                        gw[i * kConvCols + j] += d * static_cast<double>(px[j]);
                    }
                }
                gcb[f] += d;
            }
        }
    }
    for (std::size_t i = 0; i < gcw.size(); ++i) g[0][i] += static_cast<T>(gcw[i]);
    for (std::size_t f = 0; f < C; ++f) g[1][f] += static_cast<T>(gcb[f]);
    return loss;
}

ParamsView<float> view_of(const CnnModel& m) {
    ParamsView<float> v;
    v.C = static_cast<std::size_t>(m.conv_filters);
    v.flat = m.flatten_dim();
    auto arrays = m.arrays();
    for (std::size_t a = 0; a < 8; ++a) v.p[a] = arrays[a]->data();
    return v;
}

}  // namespace

std::size_t CnnModel::param_count() const {
    std::size_t n = 0;
    for (const auto* a : arrays()) n += a->size();
    return n;
}

std::array<std::vector<float>*, 8> CnnModel::arrays() {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b, &out_w, &out_b};
}

std::array<const std::vector<float>*, 8> CnnModel::arrays() const {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b, &out_w, &out_b};
}

std::array<const char*, 8> CnnModel::array_names() {
    return {"conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b", "out_w", "out_b"};
}

Gradients Gradients::zeros_like(const CnnModel& model) {
    Gradients g;
    auto src = model.arrays();
    auto dst = g.arrays();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->assign(src[i]->size(), 0.0f);
    return g;
}

void Gradients::zero() {
    for (auto* a : arrays()) std::fill(a->begin(), a->end(), 0.0f);
}

std::array<std::vector<float>*, 8> Gradients::arrays() {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b, &out_w, &out_b};
}

std::array<const std::vector<float>*, 8> Gradients::arrays() const {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b, &out_w, &out_b};
}

CnnModel init_model(int conv_filters, std::uint64_t seed) {
    if (conv_filters < 1) throw std::invalid_argument("init_model: conv_filters must be >= 1");
    CnnModel m;
    m.conv_filters = conv_filters;
    const auto C = static_cast<std::size_t>(conv_filters);
    const std::size_t flat = m.flatten_dim();
    m.conv_w.resize(C * kConvKernel);
    m.conv_b.assign(C, 0.0f);
    m.fc1_w.resize(kFc1 * flat);
    m.fc1_b.assign(kFc1, 0.0f);
    m.fc2_w.resize(kFc2 * kFc1);
    m.fc2_b.assign(kFc2, 0.0f);
    m.out_w.resize(kTargetLen * kFc2);
    m.out_b.assign(kTargetLen, 0.0f);

    Rng rng(seed);
    auto glorot = [&](std::vector<float>& w, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : w) v = static_cast<float>(rng.uniform(-limit, limit));
    };
    glorot(m.conv_w, kConvKernel, kConvKernel * C);
    glorot(m.fc1_w, flat, kFc1);
    glorot(m.fc2_w, kFc1, kFc2);
    glorot(m.out_w, kFc2, kTargetLen);
    return m;
}

std::array<float, kTargetLen> forward(const CnnModel& model, const SpectrogramImage& image,
                                      Activations& s, std::uint64_t* pattern_hash) {
    check_shapes(model);
    if (pattern_hash != nullptr) {
        Fnv1a hash;
        forward_impl(view_of(model), image, s, &hash);
        *pattern_hash = hash.h;
    } else {
        forward_impl(view_of(model), image, s, nullptr);
    }
    return s.y;
}

double loss_mse(std::span<const float> pred, std::span<const float> target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw std::invalid_argument("loss_mse: size mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double backward(const CnnModel& model, const SpectrogramImage& image,
                const TargetVector& target, Gradients& grads, Activations& scratch) {
    check_shapes(model);
    auto garrays = grads.arrays();
    std::array<float*, 8> g{};
    auto marrays = model.arrays();
    for (std::size_t a = 0; a < 8; ++a) {
        if (garrays[a]->size() != marrays[a]->size()) {
            throw BadShape("gradient buffers do not match the model");
        }
        g[a] = garrays[a]->data();
    }
    return backward_impl(view_of(model), image, target, g, scratch);
}

double backward_f64(const CnnModel& model, const SpectrogramImage& image,
                    const TargetVector& target, DoubleGradients& grads) {
    check_shapes(model);
    auto marrays = model.arrays();
    std::array<std::vector<double>, 8> wide;
    ParamsView<double> view;
    view.C = static_cast<std::size_t>(model.conv_filters);
    view.flat = model.flatten_dim();
    std::array<double*, 8> g{};
    for (std::size_t a = 0; a < 8; ++a) {
        wide[a].assign(marrays[a]->begin(), marrays[a]->end());
        view.p[a] = wide[a].data();
        grads.arrays[a].assign(marrays[a]->size(), 0.0);
        g[a] = grads.arrays[a].data();
    }
    detail::ActivationsT<double> s;
    return backward_impl(view, image, target, g, s);
}

GradCheckResult grad_check(const CnnModel& model, const SpectrogramImage& image,
                           const TargetVector& target, const GradCheckConfig& config) {
    if (config.epsilon <= 0.0) {
        throw std::invalid_argument("grad_check: epsilon must be positive");
    }
    if (config.n_params == 0) throw std::invalid_argument("grad_check: n_params must be > 0");
    check_shapes(model);

    // widen once; the audit runs entirely on the double twin
    auto marrays = model.arrays();
    std::array<std::vector<double>, 8> params;
    ParamsView<double> view;
    view.C = static_cast<std::size_t>(model.conv_filters);
    view.flat = model.flatten_dim();
    std::array<std::vector<double>, 8> analytic;
    std::array<double*, 8> g{};
    for (std::size_t a = 0; a < 8; ++a) {
        params[a].assign(marrays[a]->begin(), marrays[a]->end());
        view.p[a] = params[a].data();
        analytic[a].assign(marrays[a]->size(), 0.0);
        g[a] = analytic[a].data();
    }
    detail::ActivationsT<double> s;
    backward_impl(view, image, target, g, s);
    Fnv1a base;
    forward_impl(view, image, s, &base);
    const std::uint64_t base_hash = base.h;

    std::array<std::size_t, 8> offsets{};
    std::size_t total = 0;
    for (std::size_t a = 0; a < 8; ++a) {
        offsets[a] = total;
        total += params[a].size();
    }

    Rng rng(config.seed);
    std::unordered_set<std::size_t> seen;
    std::vector<std::size_t> picks;
    // one parameter from every array first, then uniform over the rest
    for (std::size_t a = 0; a < 8; ++a) {
        const std::size_t p = offsets[a] + rng.next_below(params[a].size());
        if (seen.insert(p).second) picks.push_back(p);
    }
    std::size_t guard = 0;
    while (picks.size() < config.n_params + 64 && guard++ < 64 * config.n_params) {
        const std::size_t p = rng.next_below(total);
        if (seen.insert(p).second) picks.push_back(p);
    }

    GradCheckResult result;
    for (const std::size_t p : picks) {
        if (result.checked >= config.n_params) break;
        std::size_t a = 0;
        while (a + 1 < 8 && p >= offsets[a + 1]) ++a;
        const std::size_t idx = p - offsets[a];
        const double w0 = params[a][idx];
        const double grad = analytic[a][idx] * config.analytic_scale;

        bool recorded = false;
        double eps = config.epsilon;
        for (int attempt = 0; attempt < 3 && !recorded; ++attempt, eps *= 0.25) {
            Fnv1a h_plus, h_minus;
            params[a][idx] = w0 + eps;
            forward_impl(view, image, s, &h_plus);
            const double loss_plus = loss_of(s.y, target);
            params[a][idx] = w0 - eps;
            forward_impl(view, image, s, &h_minus);
            const double loss_minus = loss_of(s.y, target);
            params[a][idx] = w0;
            if (h_plus.h != base_hash || h_minus.h != base_hash) continue;  // region flip

            const double numeric = (loss_plus - loss_minus) / (2.0 * eps);
            const double rel = std::abs(grad - numeric) /
                               std::max({std::abs(grad), std::abs(numeric), 1e-8});
            result.max_rel_error = std::max(result.max_rel_error, rel);
            ++result.checked;
            recorded = true;
        }
        if (!recorded) ++result.skipped;
    }
    return result;
}

std::array<double, kTargetLen> predict_window(const CnnModel& model,
                                              const SpectrogramImage& image,
                                              double f0_norm_hz) {
    Activations s;
    const auto y = forward(model, image, s);
    std::array<double, kTargetLen> out{};
    for (std::size_t k = 0; k < kTargetLen; ++k) {
        double f = static_cast<double>(y[k]) * f0_norm_hz;
        if (f < kVoicedFloorHz) f = 0.0;
        if (f > f0_norm_hz) f = f0_norm_hz;
        out[k] = f;
    }
    return out;
}

F0Contour predict_f0(const CnnModel& model, const std::vector<SpectrogramImage>& images,
                     double f0_norm_hz) {
    if (images.empty()) throw std::invalid_argument("predict_f0: no image buffers");
    F0Contour contour;
    contour.hop_s = images.front().frame_hop_s * static_cast<double>(kImageCols) /
                    static_cast<double>(kTargetLen);
    contour.f0_hz.reserve(images.size() * kTargetLen);
    for (const auto& image : images) {
        const auto window = predict_window(model, image, f0_norm_hz);
        contour.f0_hz.insert(contour.f0_hz.end(), window.begin(), window.end());
    }
    return contour;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff),
                           static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

std::uint32_t get_u32(std::ifstream& in, const char* what) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw MalformedModelFile(std::string("truncated while reading ") + what);
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void save_model(const CnnModel& model, const std::filesystem::path& path) {
    check_shapes(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write("SPF0", 4);
    put_u32(out, kModelVersion);
    put_u32(out, static_cast<std::uint32_t>(model.conv_filters));
    put_u32(out, kImageRows);
    put_u32(out, kImageCols);
    put_u32(out, kConvRows);
    put_u32(out, kConvCols);
    put_u32(out, kFc1);
    put_u32(out, kFc2);
    put_u32(out, kTargetLen);
    for (const auto* a : model.arrays()) {
        put_u32(out, static_cast<std::uint32_t>(a->size()));
        for (const float v : *a) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

CnnModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SPF0", 4) != 0) {
        throw MalformedModelFile(path.string() + ": bad magic");
    }
    if (get_u32(in, "version") != kModelVersion) {
        throw MalformedModelFile(path.string() + ": unsupported version");
    }
    const std::uint32_t filters = get_u32(in, "conv filter count");
    if (filters < 1 || filters > 1024) {
        throw MalformedModelFile(path.string() + ": implausible conv filter count");
    }
    const std::uint32_t dims[7] = {get_u32(in, "dims"), get_u32(in, "dims"),
                                   get_u32(in, "dims"), get_u32(in, "dims"),
                                   get_u32(in, "dims"), get_u32(in, "dims"),
                                   get_u32(in, "dims")};
    const std::uint32_t expect[7] = {kImageRows, kImageCols, kConvRows, kConvCols,
                                     kFc1,       kFc2,       kTargetLen};
    for (int i = 0; i < 7; ++i) {
        if (dims[i] != expect[i]) {
            throw MalformedModelFile(path.string() + ": layer dims do not match this build");
        }
    }

    CnnModel m;
    m.conv_filters = static_cast<int>(filters);
    const auto C = static_cast<std::size_t>(filters);
    const std::size_t flat = m.flatten_dim();
    const std::size_t expected_sizes[8] = {C * kConvKernel, C,    kFc1 * flat,      kFc1,
                                           kFc2 * kFc1,     kFc2, kTargetLen * kFc2, kTargetLen};
    auto arrays = m.arrays();
    auto names = CnnModel::array_names();
    for (std::size_t a = 0; a < 8; ++a) {
        const std::uint32_t count = get_u32(in, names[a]);
        if (count != expected_sizes[a]) {
            throw MalformedModelFile(path.string() + ": wrong element count for " + names[a]);
        }
        arrays[a]->resize(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            (*arrays[a])[i] = std::bit_cast<float>(get_u32(in, names[a]));
        }
    }
    char extra;
    if (in.read(&extra, 1)) throw MalformedModelFile(path.string() + ": trailing bytes");
    return m;
}

}  // namespace spectropitch
