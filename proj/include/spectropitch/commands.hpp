#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "spectropitch/frontend.hpp"
#include "spectropitch/synth.hpp"
#include "spectropitch/trainer.hpp"
#include "spectropitch/yin.hpp"

namespace spectropitch {

// Everything a run needs, with working defaults. Loaded from one JSON file
// holding optional "dataset" / "frontend" / "train" / "yin" sections.
struct RunConfig {
    DatasetConfig dataset;
    FrontendConfig frontend;
    TrainConfig train;
    YinConfig yin;
};

// Strict parse: unknown keys anywhere raise MalformedFile so a typo cannot
// silently fall back to a default.
RunConfig load_run_config(const std::filesystem::path& path);

// Serializes every resolved setting; written next to each command's outputs
// so a run can be reproduced from its artifacts alone.
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

// Subcommand bodies. Each creates out_dir, writes its artifacts plus a
// resolved_config.json, prints a one-line summary and returns the process
// exit code.

// dataset under out_dir: split directories, clips, contours, manifest.json
int cmd_synth_data(const RunConfig& config, const std::filesystem::path& out_dir);

// trains on the manifest's train/val splits; writes model.spf0, loss.csv,
// model_meta.json
int cmd_train(const RunConfig& config, const std::filesystem::path& manifest_path,
              const std::filesystem::path& out_dir);

// runs a saved model over one clip; writes contour.csv and optionally one
// PGM per image buffer
int cmd_predict(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& wav_path, const std::filesystem::path& out_dir,
                bool write_pgms);

// scores a saved model on one split; writes report.csv and summary.csv
int cmd_eval(const RunConfig& config, const std::filesystem::path& model_path,
             const std::filesystem::path& manifest_path, const std::string& split,
             const std::filesystem::path& out_dir);

// model vs pitch-tracker baseline per SNR bin; writes compare.csv plus both
// per-entry reports
int cmd_compare(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& manifest_path, const std::string& split,
                const std::filesystem::path& out_dir);

// analytic-vs-numeric gradient audit on freshly seeded models; exit 1 when
// any trial exceeds the tolerance. inject_scale != 1 corrupts the analytic
// side on purpose so tests can watch the audit fail.
int cmd_gradcheck(int trials, std::uint64_t seed, double epsilon, double tolerance,
                  double inject_scale);

}  // namespace spectropitch
