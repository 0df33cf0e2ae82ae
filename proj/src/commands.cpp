#include "spectropitch/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "spectropitch/cnn.hpp"
#include "spectropitch/errors.hpp"
#include "spectropitch/metrics.hpp"
#include "spectropitch/rng.hpp"

namespace spectropitch {

namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
    if (!j.is_object()) throw MalformedFile(std::string(where) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known) {
            throw MalformedFile(std::string(where) + ": unknown key \"" + it.key() + "\"");
        }
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void parse_dataset(const json& j, DatasetConfig& c) {
    require_keys(j,
                 {"train_count", "val_count", "test_count", "snr_db", "noise_kinds",
                  "duration_s", "f_min_hz", "f_max_hz", "voiced_fraction", "constant_weight",
                  "glide_weight", "vibrato_weight", "n_harmonics", "rolloff_db_per_harmonic",
                  "contour_hop_s", "sample_rate_hz", "seed"},
                 "dataset");
    read_if(j, "train_count", c.train_count);
    read_if(j, "val_count", c.val_count);
    read_if(j, "test_count", c.test_count);
    read_if(j, "snr_db", c.snr_db);
    if (j.contains("noise_kinds")) {
        c.noise_kinds.clear();
        for (const auto& name : j.at("noise_kinds")) {
            c.noise_kinds.push_back(noise_kind_from_string(name.get<std::string>()));
        }
        if (c.noise_kinds.empty()) throw MalformedFile("dataset: noise_kinds is empty");
    }
    read_if(j, "duration_s", c.duration_s);
    read_if(j, "f_min_hz", c.f_min_hz);
    read_if(j, "f_max_hz", c.f_max_hz);
    read_if(j, "voiced_fraction", c.voiced_fraction);
    read_if(j, "constant_weight", c.constant_weight);
    read_if(j, "glide_weight", c.glide_weight);
    read_if(j, "vibrato_weight", c.vibrato_weight);
    read_if(j, "n_harmonics", c.n_harmonics);
    read_if(j, "rolloff_db_per_harmonic", c.rolloff_db_per_harmonic);
    read_if(j, "contour_hop_s", c.contour_hop_s);
    read_if(j, "sample_rate_hz", c.sample_rate_hz);
    read_if(j, "seed", c.seed);
}

void parse_frontend(const json& j, FrontendConfig& c) {
    require_keys(j,
                 {"sample_rate_hz", "window_s", "hop_samples", "fft_size", "crop_hz",
                  "percentile", "tau", "f0_norm_hz"},
                 "frontend");
    read_if(j, "sample_rate_hz", c.sample_rate_hz);
    read_if(j, "window_s", c.window_s);
    read_if(j, "hop_samples", c.hop_samples);
    read_if(j, "fft_size", c.fft_size);
    read_if(j, "crop_hz", c.crop_hz);
    read_if(j, "percentile", c.percentile);
    read_if(j, "tau", c.tau);
    read_if(j, "f0_norm_hz", c.f0_norm_hz);
}

void parse_train(const json& j, TrainConfig& c) {
    require_keys(j, {"epochs", "batch_size", "conv_filters", "seed", "diverge_loss", "optimizer"},
                 "train");
    read_if(j, "epochs", c.epochs);
    read_if(j, "batch_size", c.batch_size);
    read_if(j, "conv_filters", c.conv_filters);
    read_if(j, "seed", c.seed);
    read_if(j, "diverge_loss", c.diverge_loss);
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        require_keys(o, {"kind", "lr", "momentum", "beta1", "beta2", "eps_hat"},
                     "train.optimizer");
        if (o.contains("kind")) {
            const auto kind = o.at("kind").get<std::string>();
            if (kind == "adam") {
                c.optimizer.kind = OptimizerConfig::Kind::adam;
            } else if (kind == "sgd") {
                c.optimizer.kind = OptimizerConfig::Kind::sgd;
            } else {
                throw MalformedFile("train.optimizer: unknown kind \"" + kind + "\"");
            }
        }
        read_if(o, "lr", c.optimizer.lr);
        read_if(o, "momentum", c.optimizer.momentum);
        read_if(o, "beta1", c.optimizer.beta1);
        read_if(o, "beta2", c.optimizer.beta2);
        read_if(o, "eps_hat", c.optimizer.eps_hat);
    }
}

void parse_yin(const json& j, YinConfig& c) {
    require_keys(j, {"hop_s", "f_min_hz", "f_max_hz", "threshold", "unvoiced_cmndf", "rms_floor"},
                 "yin");
    read_if(j, "hop_s", c.hop_s);
    read_if(j, "f_min_hz", c.f_min_hz);
    read_if(j, "f_max_hz", c.f_max_hz);
    read_if(j, "threshold", c.threshold);
    read_if(j, "unvoiced_cmndf", c.unvoiced_cmndf);
    read_if(j, "rms_floor", c.rms_floor);
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
    RunConfig cfg;
    try {
        require_keys(doc, {"dataset", "frontend", "train", "yin"}, "config");
        if (doc.contains("dataset")) parse_dataset(doc.at("dataset"), cfg.dataset);
        if (doc.contains("frontend")) parse_frontend(doc.at("frontend"), cfg.frontend);
        if (doc.contains("train")) parse_train(doc.at("train"), cfg.train);
        if (doc.contains("yin")) parse_yin(doc.at("yin"), cfg.yin);
    } catch (const json::exception& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
    return cfg;
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
    json noise = json::array();
    for (const NoiseKind k : config.dataset.noise_kinds) noise.push_back(to_string(k));
    const json doc{
        {"dataset",
         {{"train_count", config.dataset.train_count},
          {"val_count", config.dataset.val_count},
          {"test_count", config.dataset.test_count},
          {"snr_db", config.dataset.snr_db},
          {"noise_kinds", noise},
          {"duration_s", config.dataset.duration_s},
          {"f_min_hz", config.dataset.f_min_hz},
          {"f_max_hz", config.dataset.f_max_hz},
          {"voiced_fraction", config.dataset.voiced_fraction},
          {"constant_weight", config.dataset.constant_weight},
          {"glide_weight", config.dataset.glide_weight},
          {"vibrato_weight", config.dataset.vibrato_weight},
          {"n_harmonics", config.dataset.n_harmonics},
          {"rolloff_db_per_harmonic", config.dataset.rolloff_db_per_harmonic},
          {"contour_hop_s", config.dataset.contour_hop_s},
          {"sample_rate_hz", config.dataset.sample_rate_hz},
          {"seed", config.dataset.seed}}},
        {"frontend",
         {{"sample_rate_hz", config.frontend.sample_rate_hz},
          {"window_s", config.frontend.window_s},
          {"hop_samples", config.frontend.hop_samples},
          {"fft_size", config.frontend.fft_size},
          {"crop_hz", config.frontend.crop_hz},
          {"percentile", config.frontend.percentile},
          {"tau", config.frontend.tau},
          {"f0_norm_hz", config.frontend.f0_norm_hz}}},
        {"train",
         {{"epochs", config.train.epochs},
          {"batch_size", config.train.batch_size},
          {"conv_filters", config.train.conv_filters},
          {"seed", config.train.seed},
          {"diverge_loss", config.train.diverge_loss},
          {"optimizer",
           {{"kind", config.train.optimizer.kind == OptimizerConfig::Kind::adam ? "adam" : "sgd"},
            {"lr", config.train.optimizer.lr},
            {"momentum", config.train.optimizer.momentum},
            {"beta1", config.train.optimizer.beta1},
            {"beta2", config.train.optimizer.beta2},
            {"eps_hat", config.train.optimizer.eps_hat}}}}},
        {"yin",
         {{"hop_s", config.yin.hop_s},
          {"f_min_hz", config.yin.f_min_hz},
          {"f_max_hz", config.yin.f_max_hz},
          {"threshold", config.yin.threshold},
          {"unvoiced_cmndf", config.yin.unvoiced_cmndf},
          {"rms_floor", config.yin.rms_floor}}}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

int cmd_synth_data(const RunConfig& config, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    const DatasetManifest manifest = build_dataset(config.dataset, out_dir);
    write_run_config(config, out_dir / "resolved_config.json");
    std::printf("synth-data: %zu entries under %s\n", manifest.entries.size(),
                out_dir.string().c_str());
    return 0;
}

int cmd_train(const RunConfig& config, const std::filesystem::path& manifest_path,
              const std::filesystem::path& out_dir) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const TrainSet train_set = flatten(featurize_manifest(manifest, "train", config.frontend));
    const TrainSet val_set = flatten(featurize_manifest(manifest, "val", config.frontend));
    const TrainResult result = train(train_set, val_set, config.train);

    ensure_dir(out_dir);
    save_model(result.model, out_dir / "model.spf0");
    write_loss_csv(result.history, out_dir / "loss.csv");
    const json meta{{"best_epoch", result.best_epoch},
                    {"best_val_mse", result.best_val_mse},
                    {"epochs_run", result.history.size()},
                    {"train_samples", train_set.images.size()},
                    {"val_samples", val_set.images.size()},
                    {"conv_filters", result.model.conv_filters},
                    {"final_train_mse", result.history.back().train_mse},
                    {"final_val_mse", result.history.back().val_mse}};
    std::ofstream meta_out(out_dir / "model_meta.json", std::ios::trunc);
    if (!meta_out) throw IoError("cannot write model_meta.json");
    meta_out << meta.dump(2) << '\n';
    write_run_config(config, out_dir / "resolved_config.json");
    std::printf("train: %zu samples, best val mse %.6e at epoch %d\n", train_set.images.size(),
                result.best_val_mse, result.best_epoch);
    return 0;
}

int cmd_predict(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& wav_path, const std::filesystem::path& out_dir,
                bool write_pgms) {
    const CnnModel model = load_model(model_path);
    const AudioClip clip = read_wav(wav_path);
    const std::vector<SpectrogramImage> images = make_image_windows(clip, config.frontend);
    const F0Contour contour = predict_f0(model, images, config.frontend.f0_norm_hz);

    ensure_dir(out_dir);
    write_contour_csv(contour, out_dir / "contour.csv");
    if (write_pgms) {
        char name[64];
        for (std::size_t i = 0; i < images.size(); ++i) {
            std::snprintf(name, sizeof(name), "window_%03zu_t%.3fs.pgm", i,
                          images[i].start_time_s);
            write_pgm(images[i], out_dir / name);
        }
    }
    write_run_config(config, out_dir / "resolved_config.json");
    std::printf("predict: %zu buffers, %zu frames -> %s\n", images.size(), contour.size(),
                (out_dir / "contour.csv").string().c_str());
    return 0;
}

int cmd_eval(const RunConfig& config, const std::filesystem::path& model_path,
             const std::filesystem::path& manifest_path, const std::string& split,
             const std::filesystem::path& out_dir) {
    const CnnModel model = load_model(model_path);
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::vector<EvalReport> reports =
        evaluate_entries(manifest, split, config.frontend, cnn_predictor(model));
    if (reports.empty()) {
        throw std::invalid_argument("eval: no entries in split \"" + split + "\"");
    }
    const Summary summary = aggregate(reports);

    ensure_dir(out_dir);
    write_report_csv(reports, out_dir / "report.csv");
    write_summary_csv(summary, out_dir / "summary.csv");
    write_run_config(config, out_dir / "resolved_config.json");
    std::printf("eval: n=%zu strong=%.1f%% strong+moderate=%.1f%% mean_ar=%.3f\n",
                summary.n_entries, summary.strong_pct,
                summary.strong_pct + summary.moderate_pct, summary.mean_ar);
    return 0;
}

int cmd_compare(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& manifest_path, const std::string& split,
                const std::filesystem::path& out_dir) {
    const CnnModel model = load_model(model_path);
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::vector<EvalReport> cnn =
        evaluate_entries(manifest, split, config.frontend, cnn_predictor(model));
    const std::vector<EvalReport> yin =
        evaluate_entries(manifest, split, config.frontend, yin_predictor(config.yin));
    if (cnn.empty()) {
        throw std::invalid_argument("compare: no entries in split \"" + split + "\"");
    }

    struct Bin {
        double cnn_sum = 0.0, yin_sum = 0.0;
        std::size_t n = 0;
    };
    std::map<double, Bin> bins;
    for (std::size_t i = 0; i < cnn.size(); ++i) {
        Bin& b = bins[cnn[i].snr_db];
        b.cnn_sum += cnn[i].ar;
        b.yin_sum += yin[i].ar;
        ++b.n;
    }

    ensure_dir(out_dir);
    std::ofstream out(out_dir / "compare.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write compare.csv");
    out << "snr_db,ar_cnn,ar_yin,n_entries\n";
    char line[128];
    for (const auto& [snr, b] : bins) {
        const double n = static_cast<double>(b.n);
        std::snprintf(line, sizeof(line), "%g,%.6f,%.6f,%zu\n", snr, b.cnn_sum / n,
                      b.yin_sum / n, b.n);
        out << line;
        std::printf("compare: snr=%g dB ar_cnn=%.3f ar_yin=%.3f n=%zu\n", snr, b.cnn_sum / n,
                    b.yin_sum / n, b.n);
    }
    if (!out) throw IoError("write failed: compare.csv");
    write_report_csv(cnn, out_dir / "report_cnn.csv");
    write_report_csv(yin, out_dir / "report_yin.csv");
    write_run_config(config, out_dir / "resolved_config.json");
    return 0;
}

int cmd_gradcheck(int trials, std::uint64_t seed, double epsilon, double tolerance,
                  double inject_scale) {
    if (trials < 1) throw std::invalid_argument("gradcheck: trials must be >= 1");

    // one realistic probe: a glide with a voicing gap, lightly noised
    SynthSpec spec;
    spec.duration_s = 1.1;
    spec.trajectory = Trajectory::glide(120.0, 340.0);
    spec.voiced_segments = {{0.0, 0.45}, {0.55, 1.1}};
    auto [clean, contour] = synth_harmonic(spec, derive_seed(seed, 100));
    const AudioClip noise =
        gen_noise(NoiseKind::white, clean.size(), clean.sample_rate_hz, derive_seed(seed, 101));
    const AudioClip clip = mix_at_snr(clean, noise, 20.0);

    FrontendConfig fc;
    const std::vector<SpectrogramImage> images = make_image_windows(clip, fc);
    const TargetVector target = make_target(contour, images[0].start_time_s, fc);

    bool all_ok = true;
    for (int t = 0; t < trials; ++t) {
        const CnnModel model = init_model(3, derive_seed(seed, static_cast<std::uint64_t>(t)));
        GradCheckConfig gc;
        gc.epsilon = epsilon;
        gc.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(t));
        gc.analytic_scale = inject_scale;
        const GradCheckResult res = grad_check(model, images[0], target, gc);
        const bool ok = res.max_rel_error < tolerance && res.checked >= gc.n_params;
        all_ok = all_ok && ok;
        std::printf("trial %d: max_rel_err=%.3e checked=%zu skipped=%zu %s\n", t,
                    res.max_rel_error, res.checked, res.skipped, ok ? "ok" : "FAIL");
    }
    std::printf("gradcheck: %s (tolerance %.1e)\n", all_ok ? "PASS" : "FAIL", tolerance);
    return all_ok ? 0 : 1;
}

}  // namespace spectropitch
