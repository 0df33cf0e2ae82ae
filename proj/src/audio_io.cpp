#include "spectropitch/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "spectropitch/errors.hpp"

namespace spectropitch {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data());
    const std::size_t n = bytes.size();

    if (n < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
        throw MalformedFile(path.string() + ": not a RIFF/WAVE file");
    }

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const std::uint8_t* pcm = nullptr;
    std::size_t pcm_bytes = 0;

    std::size_t pos = 12;
    while (pos + 8 <= n) {
        const char* id = reinterpret_cast<const char*>(data + pos);
        const std::uint32_t chunk_size = read_u32(data + pos + 4);
        pos += 8;
        if (pos + chunk_size > n) throw MalformedFile(path.string() + ": truncated chunk");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw MalformedFile(path.string() + ": short fmt chunk");
            format = read_u16(data + pos);
            channels = read_u16(data + pos + 2);
            sample_rate = read_u32(data + pos + 4);
            bits = read_u16(data + pos + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            pcm = data + pos;
            pcm_bytes = chunk_size;
        }
        pos += chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }

    if (!have_fmt || pcm == nullptr) throw MalformedFile(path.string() + ": missing fmt or data chunk");
    if (format != 1) throw UnsupportedFormat(path.string() + ": only uncompressed PCM is supported");
    if (bits != 16) {
        throw UnsupportedFormat(path.string() + ": only 16-bit PCM is supported, got " +
                                std::to_string(bits) + "-bit");
    }
    if (channels != 1 && channels != 2) {
        throw UnsupportedFormat(path.string() + ": expected mono or stereo, got " +
                                std::to_string(channels) + " channels");
    }
    if (sample_rate == 0) throw MalformedFile(path.string() + ": zero sample rate");
    if (pcm_bytes % (2u * channels) != 0) throw MalformedFile(path.string() + ": ragged data chunk");

    const std::size_t frames = pcm_bytes / (2u * channels);
    AudioClip clip;
    clip.sample_rate_hz = static_cast<int>(sample_rate);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const auto raw = static_cast<std::int16_t>(read_u16(pcm + 2 * (i * channels + c)));
            acc += raw / 32768.0;
        }
        clip.samples[i] = static_cast<float>(acc / channels);
    }
    return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
    if (clip.samples.empty()) throw std::invalid_argument("write_wav: empty clip");
    if (clip.sample_rate_hz <= 0) throw std::invalid_argument("write_wav: bad sample rate");

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (const float s : clip.samples) {
        long v = std::lround(static_cast<double>(s) * 32768.0);
        if (v > 32767) v = 32767;
        if (v < -32768) v = -32768;
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace spectropitch
