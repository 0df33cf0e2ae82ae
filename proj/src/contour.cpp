#include "spectropitch/contour.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "spectropitch/errors.hpp"

namespace spectropitch {

void write_contour_csv(const F0Contour& contour, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "frame_index,time_s,f0_hz\n";
    char line[96];
    for (std::size_t i = 0; i < contour.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f\n", i, contour.time_at(i),
                      contour.f0_hz[i]);
        out << line;
    }
    if (!out) throw IoError("write failed: " + path.string());
}

F0Contour read_contour_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame_index,time_s,f0_hz", 0) != 0) {
        throw MalformedFile(path.string() + ": bad contour header");
    }
    F0Contour contour;
    contour.hop_s = 0.0;
    double first_time = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* p = line.c_str();
        char* end = nullptr;
        std::strtoull(p, &end, 10);
        if (end == p || *end != ',') throw MalformedFile(path.string() + ": bad row: " + line);
        p = end + 1;
        const double t = std::strtod(p, &end);
        if (end == p || *end != ',') throw MalformedFile(path.string() + ": bad row: " + line);
        p = end + 1;
        const double f0 = std::strtod(p, &end);
        if (end == p) throw MalformedFile(path.string() + ": bad row: " + line);
        if (contour.f0_hz.empty()) {
            first_time = t;
        } else if (contour.f0_hz.size() == 1) {
            contour.hop_s = t - first_time;
        }
        contour.f0_hz.push_back(f0);
    }
    if (contour.f0_hz.empty()) throw MalformedFile(path.string() + ": no frames");
    if (contour.hop_s <= 0.0) contour.hop_s = 0.005;
    return contour;
}

}  // namespace spectropitch
