#include "spectropitch/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "spectropitch/errors.hpp"

namespace spectropitch {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least two frames");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw DegenerateInput("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

RhoBand band_of(double rho) {
    if (rho >= 0.7) return RhoBand::strong;
    if (rho >= 0.5) return RhoBand::moderate;
    return RhoBand::weak;
}

const char* to_string(RhoBand band) {
    switch (band) {
        case RhoBand::strong:
            return "strong";
        case RhoBand::moderate:
            return "moderate";
        case RhoBand::weak:
            return "weak";
        case RhoBand::degenerate:
            return "degenerate";
    }
    return "weak";
}

namespace {
bool frame_correct(double est, double truth, double tolerance) {
    return est > 0.0 && std::abs(est - truth) <= tolerance * truth;
}
}  // namespace

AccuracyResult accuracy_rate(std::span<const double> est, std::span<const double> truth,
                             double tolerance) {
    if (est.size() != truth.size()) throw std::invalid_argument("accuracy_rate: size mismatch");
    if (tolerance <= 0.0) throw std::invalid_argument("accuracy_rate: tolerance must be > 0");
    AccuracyResult r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] <= 0.0) continue;
        ++r.n_voiced;
        if (frame_correct(est[i], truth[i], tolerance)) ++r.n_correct;
    }
    if (r.n_voiced == 0) throw NoVoicedFrames("accuracy_rate: no voiced ground-truth frames");
    return r;
}

namespace {
bool is_transition(std::span<const double> truth, std::size_t i) {
    const bool v = truth[i] > 0.0;
    if (i > 0 && (truth[i - 1] > 0.0) != v) return true;
    if (i + 1 < truth.size() && (truth[i + 1] > 0.0) != v) return true;
    return false;
}
}  // namespace

std::size_t transition_frame_count(std::span<const double> truth) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (is_transition(truth, i)) ++n;
    }
    return n;
}

std::size_t voicing_boundaries(std::span<const double> truth) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < truth.size(); ++i) {
        if ((truth[i] > 0.0) != (truth[i + 1] > 0.0)) ++n;
    }
    return n;
}

std::size_t transition_errors(std::span<const double> est, std::span<const double> truth,
                              double tolerance) {
    if (est.size() != truth.size()) {
        throw std::invalid_argument("transition_errors: size mismatch");
    }
    std::size_t n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!is_transition(truth, i)) continue;
        if (truth[i] > 0.0) {
            if (!frame_correct(est[i], truth[i], tolerance)) ++n;
        } else if (est[i] > 0.0) {
            ++n;
        }
    }
    return n;
}

Summary aggregate(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    Summary s;
    s.n_entries = reports.size();
    std::size_t strong = 0, moderate = 0, weak = 0;
    double ar_sum = 0.0;
    std::map<double, std::pair<double, std::size_t>> by_snr;
    for (const auto& r : reports) {
        switch (r.rho_band) {
            case RhoBand::strong:
                ++strong;
                break;
            case RhoBand::moderate:
                ++moderate;
                break;
            case RhoBand::weak:
                ++weak;
                break;
            case RhoBand::degenerate:
                ++s.n_degenerate;
                break;
        }
        ar_sum += r.ar;
        auto& [sum, count] = by_snr[r.snr_db];
        sum += r.ar;
        ++count;
        s.total_transition_errors += r.transition_errors;
        s.total_boundaries += r.n_boundaries;
    }
    const std::size_t banded = strong + moderate + weak;
    if (banded > 0) {
        s.strong_pct = 100.0 * static_cast<double>(strong) / static_cast<double>(banded);
        s.moderate_pct = 100.0 * static_cast<double>(moderate) / static_cast<double>(banded);
        s.weak_pct = 100.0 * static_cast<double>(weak) / static_cast<double>(banded);
    }
    if (!reports.empty()) s.mean_ar = ar_sum / static_cast<double>(reports.size());
    for (const auto& [snr, acc] : by_snr) {
        s.mean_ar_by_snr[snr] = acc.first / static_cast<double>(acc.second);
    }
    if (s.total_boundaries > 0) {
        s.errors_per_boundary = static_cast<double>(s.total_transition_errors) /
                                static_cast<double>(s.total_boundaries);
    }
    return s;
}

void write_report_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "entry_id,snr_db,rho,rho_band,ar,n_voiced,transition_errors\n";
    char line[256];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%s,%g,%.6f,%s,%.6f,%zu,%zu\n", r.entry_id.c_str(),
                      r.snr_db, r.rho, to_string(r.rho_band), r.ar, r.n_voiced,
                      r.transition_errors);
        out << line;
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_summary_csv(const Summary& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "section,key,value\n";
    char line[256];
    auto row = [&](const char* section, const std::string& key, const char* fmt, auto value) {
        char v[64];
        std::snprintf(v, sizeof(v), fmt, value);
        std::snprintf(line, sizeof(line), "%s,%s,%s\n", section, key.c_str(), v);
        out << line;
    };
    row("counts", "n_entries", "%zu", s.n_entries);
    row("rho", "strong_pct", "%.4f", s.strong_pct);
    row("rho", "moderate_pct", "%.4f", s.moderate_pct);
    row("rho", "weak_pct", "%.4f", s.weak_pct);
    row("rho", "degenerate", "%zu", s.n_degenerate);
    row("accuracy", "mean_ar", "%.6f", s.mean_ar);
    for (const auto& [snr, ar] : s.mean_ar_by_snr) {
        char key[64];
        std::snprintf(key, sizeof(key), "mean_ar_snr_%g", snr);
        row("accuracy", key, "%.6f", ar);
    }
    row("transitions", "total_errors", "%zu", s.total_transition_errors);
    row("transitions", "total_boundaries", "%zu", s.total_boundaries);
    row("transitions", "errors_per_boundary", "%.6f", s.errors_per_boundary);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spectropitch
