#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace spectropitch {

// Mono float signal in [-1, 1]. Values are clipped, never wrapped, by every
// generation and mixing step.
struct AudioClip {
    std::vector<float> samples;
    int sample_rate_hz = 16000;

    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

// Reads a RIFF/WAVE file. PCM 16-bit only; stereo is downmixed by per-sample
// mean; int16 maps to float as s / 32768.
AudioClip read_wav(const std::filesystem::path& path);

// Writes mono PCM 16-bit. Conversion saturates at the int16 limits.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

}  // namespace spectropitch
