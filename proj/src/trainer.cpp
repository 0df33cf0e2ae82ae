#include "spectropitch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "spectropitch/errors.hpp"
#include "spectropitch/parallel.hpp"
#include "spectropitch/rng.hpp"

namespace spectropitch {

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidSpec("epochs must be >= 1");
    if (batch_size < 1) throw InvalidSpec("batch_size must be >= 1");
    if (conv_filters < 1) throw InvalidSpec("conv_filters must be >= 1");
    // lr == 0 is allowed: a frozen run is a valid diagnostic
    if (optimizer.lr < 0.0) throw InvalidSpec("learning rate must be >= 0");
    if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0) {
        throw InvalidSpec("momentum must be in [0, 1)");
    }
    if (optimizer.beta1 <= 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 <= 0.0 ||
        optimizer.beta2 >= 1.0 || optimizer.eps_hat <= 0.0) {
        throw InvalidSpec("adam parameters out of range");
    }
    if (diverge_loss <= 0.0) throw InvalidSpec("diverge_loss must be positive");
}

std::vector<EntryFeatures> featurize_manifest(const DatasetManifest& manifest,
                                              const std::string& split,
                                              const FrontendConfig& config) {
    config.validate();
    std::vector<const DatasetEntry*> selected;
    for (const auto& e : manifest.entries) {
        if (split.empty() || e.split == split) selected.push_back(&e);
    }
    std::vector<EntryFeatures> features(selected.size());
    std::vector<std::string> errors(selected.size());
    parallel_for(selected.size(), [&](std::size_t i) {
        const DatasetEntry& entry = *selected[i];
        try {
            const AudioClip clip = read_wav(manifest.clip_file(entry));
            const F0Contour contour = read_contour_csv(manifest.contour_file(entry));
            EntryFeatures& f = features[i];
            f.id = entry.id;
            f.snr_db = entry.snr_db;
            f.images = make_image_windows(clip, config);
            f.targets.reserve(f.images.size());
            for (const auto& image : f.images) {
                f.targets.push_back(make_target(contour, image.start_time_s, config));
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) {
            throw IoError("entry " + selected[i]->id + " failed to featurize: " + errors[i]);
        }
    }
    return features;
}

TrainSet flatten(const std::vector<EntryFeatures>& entries) {
    TrainSet set;
    for (const auto& e : entries) {
        set.images.insert(set.images.end(), e.images.begin(), e.images.end());
        set.targets.insert(set.targets.end(), e.targets.begin(), e.targets.end());
    }
    return set;
}

double accumulate_batch_gradients(const CnnModel& model,
                                  std::span<const SpectrogramImage> images,
                                  std::span<const TargetVector> targets,
                                  std::span<const std::size_t> batch, Gradients& out,
                                  BatchWorkspace& ws) {
    if (images.size() != targets.size()) {
        throw std::invalid_argument("accumulate_batch_gradients: image/target mismatch");
    }
    if (batch.empty()) throw std::invalid_argument("accumulate_batch_gradients: empty batch");
    for (const std::size_t idx : batch) {
        if (idx >= images.size()) {
            throw std::invalid_argument("accumulate_batch_gradients: batch index out of range");
        }
    }

    const std::size_t b = batch.size();
    if (ws.grad_slots.size() < b) {
        ws.grad_slots.resize(b, Gradients::zeros_like(model));
        ws.act_slots.resize(b);
        ws.loss_slots.resize(b);
    }
    parallel_for(b, [&](std::size_t i) {
        ws.grad_slots[i].zero();
        ws.loss_slots[i] = backward(model, images[batch[i]], targets[batch[i]],
                                    ws.grad_slots[i], ws.act_slots[i]);
    });

    // serial reduce in batch order keeps the result thread-count independent
    out = Gradients::zeros_like(model);
    auto dst = out.arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
        std::vector<float>& target_arr = *dst[a];
        for (std::size_t j = 0; j < target_arr.size(); ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < b; ++i) acc += (*ws.grad_slots[i].arrays()[a])[j];
            target_arr[j] = static_cast<float>(acc / static_cast<double>(b));
        }
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) loss += ws.loss_slots[i];
    return loss / static_cast<double>(b);
}

SgdOptimizer::SgdOptimizer(const CnnModel& model, const OptimizerConfig& config)
    : config_(config) {
    auto arrays = model.arrays();
    for (std::size_t a = 0; a < arrays.size(); ++a) velocity_[a].assign(arrays[a]->size(), 0.0);
}

void SgdOptimizer::step(CnnModel& model, const Gradients& grads) {
    auto params = model.arrays();
    auto g = grads.arrays();
    for (std::size_t a = 0; a < params.size(); ++a) {
        std::vector<float>& w = *params[a];
        const std::vector<float>& ga = *g[a];
        if (w.size() != ga.size()) throw BadShape("optimizer/model shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            velocity_[a][i] = config_.momentum * velocity_[a][i] - config_.lr * ga[i];
            w[i] = static_cast<float>(w[i] + velocity_[a][i]);
        }
    }
}

AdamOptimizer::AdamOptimizer(const CnnModel& model, const OptimizerConfig& config)
    : config_(config) {
    auto arrays = model.arrays();
    for (std::size_t a = 0; a < arrays.size(); ++a) {
        m_[a].assign(arrays[a]->size(), 0.0);
        v_[a].assign(arrays[a]->size(), 0.0);
    }
}

void AdamOptimizer::step(CnnModel& model, const Gradients& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    auto params = model.arrays();
    auto g = grads.arrays();
    for (std::size_t a = 0; a < params.size(); ++a) {
        std::vector<float>& w = *params[a];
        const std::vector<float>& ga = *g[a];
        if (w.size() != ga.size()) throw BadShape("optimizer/model shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double grad = ga[i];
            m_[a][i] = config_.beta1 * m_[a][i] + (1.0 - config_.beta1) * grad;
            v_[a][i] = config_.beta2 * v_[a][i] + (1.0 - config_.beta2) * grad * grad;
            const double mhat = m_[a][i] / bc1;
            const double vhat = v_[a][i] / bc2;
            w[i] = static_cast<float>(w[i] - config_.lr * mhat /
                                                  (std::sqrt(vhat) + config_.eps_hat));
        }
    }
}

void write_loss_csv(const LossHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "epoch,train_mse,val_mse\n";
    char line[128];
    for (const auto& e : history) {
        std::snprintf(line, sizeof(line), "%d,%.10e,%.10e\n", e.epoch, e.train_mse, e.val_mse);
        out << line;
    }
    if (!out) throw IoError("write failed: " + path.string());
}

double mean_loss(const CnnModel& model, const TrainSet& set) {
    if (set.images.size() != set.targets.size()) {
        throw std::invalid_argument("mean_loss: image/target mismatch");
    }
    if (set.images.empty()) throw std::invalid_argument("mean_loss: empty set");
    std::vector<double> losses(set.images.size());
    parallel_for(set.images.size(), [&](std::size_t i) {
        Activations s;
        forward(model, set.images[i], s);
        losses[i] = loss_mse(s.y, set.targets[i]);
    });
    double acc = 0.0;
    for (const double l : losses) acc += l;
    return acc / static_cast<double>(losses.size());
}

TrainResult train(const TrainSet& train_set, const TrainSet& val_set,
                  const TrainConfig& config) {
    config.validate();
    if (train_set.images.size() != train_set.targets.size()) {
        throw std::invalid_argument("train: image/target mismatch");
    }
    if (train_set.images.empty()) throw std::invalid_argument("train: empty training set");

    CnnModel model = init_model(config.conv_filters, derive_seed(config.seed, 0));
    SgdOptimizer sgd(model, config.optimizer);
    AdamOptimizer adam(model, config.optimizer);
    auto step = [&](CnnModel& m, const Gradients& g) {
        if (config.optimizer.kind == OptimizerConfig::Kind::sgd) {
            sgd.step(m, g);
        } else {
            adam.step(m, g);
        }
    };

    const std::size_t n = train_set.images.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(config.seed, 1));

    Gradients grads = Gradients::zeros_like(model);
    BatchWorkspace ws;
    TrainResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t len =
                std::min(static_cast<std::size_t>(config.batch_size), n - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            const double batch_loss = accumulate_batch_gradients(
                model, train_set.images, train_set.targets, batch, grads, ws);
            step(model, grads);
            loss_sum += batch_loss * static_cast<double>(len);
        }
        const double train_mse = loss_sum / static_cast<double>(n);
        const double val_mse =
            val_set.images.empty() ? train_mse : mean_loss(model, val_set);
        result.history.push_back({epoch, train_mse, val_mse});
        if (!std::isfinite(train_mse) || !std::isfinite(val_mse) ||
            train_mse > config.diverge_loss) {
            char msg[96];
            std::snprintf(msg, sizeof(msg), "training diverged at epoch %d (loss %.3e)", epoch,
                          train_mse);
            throw DivergedLoss(msg);
        }
        if (val_mse < result.best_val_mse) {
            result.best_val_mse = val_mse;
            result.best_epoch = epoch;
            result.model = model;
        }
    }
    return result;
}

EntryPredictor cnn_predictor(const CnnModel& model) {
    return [&model](const AudioClip&, const std::vector<SpectrogramImage>& images,
                    const FrontendConfig& config) {
        return predict_f0(model, images, config.f0_norm_hz).f0_hz;
    };
}

EntryPredictor yin_predictor(const YinConfig& config) {
    return [config](const AudioClip& clip, const std::vector<SpectrogramImage>& images,
                    const FrontendConfig& fc) {
        std::vector<double> est;
        est.reserve(images.size() * kTargetLen);
        const double hop = fc.target_hop_s();
        for (const auto& image : images) {
            for (std::size_t k = 0; k < kTargetLen; ++k) {
                const double center =
                    image.start_time_s + (static_cast<double>(k) + 0.5) * hop;
                est.push_back(yin_pitch_at(clip, center, config));
            }
        }
        return est;
    };
}

std::vector<EvalReport> evaluate_entries(const DatasetManifest& manifest,
                                         const std::string& split,
                                         const FrontendConfig& config,
                                         const EntryPredictor& predict) {
    config.validate();
    std::vector<const DatasetEntry*> selected;
    for (const auto& e : manifest.entries) {
        if (split.empty() || e.split == split) selected.push_back(&e);
    }
    std::vector<EvalReport> reports(selected.size());
    std::vector<std::string> errors(selected.size());
    parallel_for(selected.size(), [&](std::size_t i) {
        const DatasetEntry& entry = *selected[i];
        try {
            const AudioClip clip = read_wav(manifest.clip_file(entry));
            const F0Contour contour = read_contour_csv(manifest.contour_file(entry));
            const std::vector<SpectrogramImage> images = make_image_windows(clip, config);

            std::vector<double> truth(images.size() * kTargetLen, 0.0);
            for (std::size_t w = 0; w < images.size(); ++w) {
                const TargetVector t = make_target(contour, images[w].start_time_s, config);
                for (std::size_t k = 0; k < kTargetLen; ++k) {
                    truth[w * kTargetLen + k] = static_cast<double>(t[k]) * config.f0_norm_hz;
                }
            }
            const std::vector<double> est = predict(clip, images, config);
            if (est.size() != truth.size()) {
                throw BadShape("predictor returned a grid of the wrong length");
            }

            EvalReport& r = reports[i];
            r.entry_id = entry.id;
            r.snr_db = entry.snr_db;

            std::vector<double> truth_v, est_v;
            for (std::size_t j = 0; j < truth.size(); ++j) {
                if (truth[j] > 0.0) {
                    truth_v.push_back(truth[j]);
                    est_v.push_back(est[j]);
                }
            }
            try {
                r.rho = pearson(est_v, truth_v);
                r.rho_band = band_of(r.rho);
            } catch (const DegenerateInput&) {
                r.rho = 0.0;
                r.rho_band = RhoBand::degenerate;
            } catch (const std::invalid_argument&) {
                r.rho = 0.0;
                r.rho_band = RhoBand::degenerate;
            }
            try {
                const AccuracyResult acc = accuracy_rate(est, truth);
                r.ar = acc.rate();
                r.n_voiced = acc.n_voiced;
            } catch (const NoVoicedFrames&) {
                r.ar = 0.0;
                r.n_voiced = 0;
            }
            r.transition_errors = spectropitch::transition_errors(est, truth);
            r.n_boundaries = voicing_boundaries(truth);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) {
            throw IoError("entry " + selected[i]->id + " failed to evaluate: " + errors[i]);
        }
    }
    return reports;
}

}  // namespace spectropitch
