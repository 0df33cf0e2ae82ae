#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>

#include "spectropitch/frontend.hpp"
#include "spectropitch/parallel.hpp"
#include "spectropitch/ref.hpp"
#include "spectropitch/rng.hpp"
#include "spectropitch/synth.hpp"
#include "spectropitch/trainer.hpp"
#include "spectropitch/yin.hpp"

using namespace spectropitch;

namespace {

double best_of_3_ms(const std::function<void()>& body) {
    double best = 1e300;
    for (int i = 0; i < 3; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool match) {
    std::printf("%-18s serial %9.2f ms   threaded %9.2f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms, match ? "match" : "MISMATCH");
}

AudioClip probe_clip(double duration_s) {
    SynthSpec spec;
    spec.duration_s = duration_s;
    spec.trajectory = Trajectory::vibrato(220.0, 25.0, 5.0);
    spec.voiced_segments = {{0.1, duration_s - 0.1}};
    auto [clean, contour] = synth_harmonic(spec, 11);
    const AudioClip noise =
        gen_noise(NoiseKind::pink, clean.size(), clean.sample_rate_hz, 12);
    return mix_at_snr(clean, noise, 15.0);
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", max_threads());
    const AudioClip clip = probe_clip(2.0);
    const FrontendConfig fc;

    // STFT: threaded radix-2 path vs naive per-frame transform
    {
        MagnitudeGrid fast, slow;
        const double par_ms = best_of_3_ms([&] { fast = stft_magnitude(clip, fc); });
        const double ser_ms = best_of_3_ms([&] { slow = ref::stft_magnitude_serial(clip, fc); });
        double max_diff = 0.0;
        for (std::size_t i = 0; i < fast.data.size(); ++i) {
            max_diff = std::max(
                max_diff, std::abs(static_cast<double>(fast.data[i]) - slow.data[i]));
        }
        report("stft", ser_ms, par_ms, max_diff < 1e-4);
        std::printf("  max |fast - naive| = %.3e\n", max_diff);
    }

    // batch gradients: slot-parallel vs sequential, must agree bit for bit
    {
        const std::vector<SpectrogramImage> images = make_image_windows(clip, fc);
        std::vector<SpectrogramImage> set;
        std::vector<TargetVector> targets;
        Rng rng(99);
        while (set.size() < 32) {
            for (const auto& img : images) {
                set.push_back(img);
                TargetVector t{};
                for (auto& v : t) v = static_cast<float>(rng.uniform(0.0, 1.0));
                targets.push_back(t);
            }
        }
        std::vector<std::size_t> batch(16);
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
        const CnnModel model = init_model(3, 5);

        Gradients par_g = Gradients::zeros_like(model);
        Gradients ser_g = Gradients::zeros_like(model);
        BatchWorkspace ws;
        const double par_ms = best_of_3_ms(
            [&] { accumulate_batch_gradients(model, set, targets, batch, par_g, ws); });
        const double ser_ms = best_of_3_ms(
            [&] { ref::accumulate_batch_gradients_serial(model, set, targets, batch, ser_g); });
        bool same = true;
        auto pa = par_g.arrays();
        auto sa = ser_g.arrays();
        for (std::size_t a = 0; a < pa.size() && same; ++a) {
            same = std::memcmp(pa[a]->data(), sa[a]->data(), pa[a]->size() * sizeof(float)) == 0;
        }
        report("batch gradients", ser_ms, par_ms, same);
    }

    // pitch baseline: frame-parallel vs plain loop, must agree bit for bit
    {
        const YinConfig yc;
        F0Contour par_c, ser_c;
        const double par_ms = best_of_3_ms([&] { par_c = yin_f0(clip, yc); });
        const double ser_ms = best_of_3_ms([&] { ser_c = ref::yin_f0_serial(clip, yc); });
        const bool same = par_c.f0_hz == ser_c.f0_hz;
        report("pitch baseline", ser_ms, par_ms, same);
    }
    return 0;
}
