#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spectropitch/cnn.hpp"
#include "spectropitch/frontend.hpp"
#include "spectropitch/metrics.hpp"
#include "spectropitch/synth.hpp"
#include "spectropitch/yin.hpp"

namespace spectropitch {

struct OptimizerConfig {
    enum class Kind { adam, sgd };
    Kind kind = Kind::adam;
    double lr = 1e-3;
    double momentum = 0.9;                              // sgd only
    double beta1 = 0.9, beta2 = 0.999, eps_hat = 1e-8;  // adam only
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    int conv_filters = 3;
    std::uint64_t seed = 1;
    OptimizerConfig optimizer;
    double diverge_loss = 1e6;  // epoch loss above this (or non-finite) aborts

    void validate() const;
};

// Model inputs and targets for one dataset entry, in buffer order.
struct EntryFeatures {
    std::string id;
    double snr_db = 0.0;
    std::vector<SpectrogramImage> images;
    std::vector<TargetVector> targets;
};

// Renders every entry of one split ("" = all splits) into features.
std::vector<EntryFeatures> featurize_manifest(const DatasetManifest& manifest,
                                              const std::string& split,
                                              const FrontendConfig& config);

struct TrainSet {
    std::vector<SpectrogramImage> images;
    std::vector<TargetVector> targets;
};

TrainSet flatten(const std::vector<EntryFeatures>& entries);

// Reusable buffers for batch gradient work: one slot per batch item.
struct BatchWorkspace {
    std::vector<Gradients> grad_slots;
    std::vector<Activations> act_slots;
    std::vector<double> loss_slots;
};

// Mean gradient over the batch, written into `out` (previous content is
// discarded). Items are processed in independent slots; the reduction runs
// serially in batch order with double accumulators, so the result does not
// depend on the thread count. Returns the mean sample loss.
double accumulate_batch_gradients(const CnnModel& model,
                                  std::span<const SpectrogramImage> images,
                                  std::span<const TargetVector> targets,
                                  std::span<const std::size_t> batch, Gradients& out,
                                  BatchWorkspace& ws);

class SgdOptimizer {
public:
    SgdOptimizer(const CnnModel& model, const OptimizerConfig& config);
    void step(CnnModel& model, const Gradients& grads);

private:
    OptimizerConfig config_;
    std::array<std::vector<double>, 8> velocity_;
};

class AdamOptimizer {
public:
    AdamOptimizer(const CnnModel& model, const OptimizerConfig& config);
    void step(CnnModel& model, const Gradients& grads);

private:
    OptimizerConfig config_;
    long t_ = 0;
    std::array<std::vector<double>, 8> m_, v_;
};

struct EpochLoss {
    int epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
};
using LossHistory = std::vector<EpochLoss>;

// epoch,train_mse,val_mse
void write_loss_csv(const LossHistory& history, const std::filesystem::path& path);

struct TrainResult {
    CnnModel model;  // parameters from the best-validation epoch
    LossHistory history;
    int best_epoch = 0;
    double best_val_mse = 0.0;
};

// Mini-batch training with per-epoch reshuffling from the config seed. An
// empty validation set reuses the train loss as val loss. Throws
// DivergedLoss when an epoch loss goes non-finite or above diverge_loss.
TrainResult train(const TrainSet& train_set, const TrainSet& val_set,
                  const TrainConfig& config);

// Mean MSE of the model over a sample set.
double mean_loss(const CnnModel& model, const TrainSet& set);

// One estimated F0 value per target slot per buffer, on the same grid the
// targets use (images.size() * kTargetLen values).
using EntryPredictor = std::function<std::vector<double>(
    const AudioClip& clip, const std::vector<SpectrogramImage>& images,
    const FrontendConfig& config)>;

EntryPredictor cnn_predictor(const CnnModel& model);
EntryPredictor yin_predictor(const YinConfig& config);

// Scores every entry of one split against its rendered ground truth:
// correlation (voiced frames only), accuracy rate, and transition errors.
// Entries whose voiced truth is constant or near-empty band as degenerate.
std::vector<EvalReport> evaluate_entries(const DatasetManifest& manifest,
                                         const std::string& split,
                                         const FrontendConfig& config,
                                         const EntryPredictor& predict);

}  // namespace spectropitch
