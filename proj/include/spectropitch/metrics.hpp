#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spectropitch {

// Population Pearson correlation in double precision. Sizes must match and
// hold at least two frames; a zero-variance side throws DegenerateInput.
double pearson(std::span<const double> x, std::span<const double> y);

enum class RhoBand { strong, moderate, weak, degenerate };

// strong: rho >= 0.7, moderate: 0.5 <= rho < 0.7, weak below.
RhoBand band_of(double rho);
const char* to_string(RhoBand band);

struct AccuracyResult {
    std::size_t n_voiced = 0;    // frames with a voiced ground truth
    std::size_t n_correct = 0;   // voiced, estimated voiced, within tolerance
    double rate() const {
        return n_voiced ? static_cast<double>(n_correct) / static_cast<double>(n_voiced) : 0.0;
    }
};

// A frame counts as correct when the truth is voiced, the estimate is voiced
// and |est - truth| <= tolerance * truth (inclusive). Throws NoVoicedFrames
// when the truth has no voiced frame at all.
AccuracyResult accuracy_rate(std::span<const double> est, std::span<const double> truth,
                             double tolerance = 0.05);

// Frames whose truth voicing differs from an adjacent frame's.
std::size_t transition_frame_count(std::span<const double> truth);

// Adjacent pairs whose voicing differs (segment edges).
std::size_t voicing_boundaries(std::span<const double> truth);

// Erring transition frames: voiced truth missed or out of tolerance,
// unvoiced truth estimated as voiced.
std::size_t transition_errors(std::span<const double> est, std::span<const double> truth,
                              double tolerance = 0.05);

struct EvalReport {
    std::string entry_id;
    double snr_db = 0.0;
    double rho = 0.0;            // 0.0 when the entry is degenerate
    RhoBand rho_band = RhoBand::weak;
    double ar = 0.0;
    std::size_t n_voiced = 0;
    std::size_t transition_errors = 0;
    std::size_t n_boundaries = 0;
};

struct Summary {
    std::size_t n_entries = 0;
    std::size_t n_degenerate = 0;        // excluded from the band percentages
    double strong_pct = 0.0;
    double moderate_pct = 0.0;
    double weak_pct = 0.0;
    double mean_ar = 0.0;
    std::map<double, double> mean_ar_by_snr;
    std::size_t total_transition_errors = 0;
    std::size_t total_boundaries = 0;
    double errors_per_boundary = 0.0;
};

Summary aggregate(const std::vector<EvalReport>& reports);

// entry_id,snr_db,rho,rho_band,ar,n_voiced,transition_errors
void write_report_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path);

// section,key,value rows covering bands, accuracy per SNR and transitions.
void write_summary_csv(const Summary& summary, const std::filesystem::path& path);

}  // namespace spectropitch
