#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace spectropitch {

// Per-frame fundamental frequency track. 0 means the frame is unvoiced.
struct F0Contour {
    double hop_s = 0.005;
    std::vector<double> f0_hz;

    std::size_t size() const { return f0_hz.size(); }
    bool voiced(std::size_t i) const { return f0_hz[i] > 0.0; }
    double time_at(std::size_t i) const { return static_cast<double>(i) * hop_s; }
};

// CSV schema: header "frame_index,time_s,f0_hz", one row per frame.
void write_contour_csv(const F0Contour& contour, const std::filesystem::path& path);
F0Contour read_contour_csv(const std::filesystem::path& path);

}  // namespace spectropitch
