// End-to-end acceptance gate. Runs the pipeline the way a user would (dataset
// synthesis, training, evaluation, comparison) plus the numerical audits, and
// prints one PASS/FAIL line per criterion. Exit code is the failure count.
//
// The desk-scale training runs make this binary slow (tens of minutes); it is
// registered as its own ctest entry with a generous timeout.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "spectropitch/audio.hpp"
#include "spectropitch/cnn.hpp"
#include "spectropitch/commands.hpp"
#include "spectropitch/contour.hpp"
#include "spectropitch/errors.hpp"
#include "spectropitch/frontend.hpp"
#include "spectropitch/metrics.hpp"
#include "spectropitch/parallel.hpp"
#include "spectropitch/rng.hpp"
#include "spectropitch/synth.hpp"
#include "spectropitch/trainer.hpp"
#include "spectropitch/yin.hpp"

namespace fs = std::filesystem;
using namespace spectropitch;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string strfmt(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

// summary.csv rows keyed as "section,key" -> value.
std::map<std::string, std::string> read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto last = line.rfind(',');
        if (last == std::string::npos) continue;
        out[line.substr(0, last)] = line.substr(last + 1);
    }
    return out;
}

// Generic CSV reader: one map per row keyed by header column name.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw MalformedFile(path.string() + ": empty");
    std::vector<std::string> cols;
    std::stringstream hs(line);
    for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < cols.size(); ++i) {
            std::string cell;
            if (!std::getline(ls, cell, ',')) cell.clear();
            row[cols[i]] = cell;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;
unsigned g_selected = ~0u;  // bitmask of criteria to run; default all

bool selected(int index) { return g_selected & (1u << index); }

int g_run = 0;

void report(int index, const char* name, const Outcome& o) {
    std::printf("criterion %2d  %-26s %s  %s\n", index, name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    ++g_run;
    if (!o.pass) ++g_failures;
}

template <typename Fn>
void run_criterion(int index, const char* name, Fn&& fn) {
    if (!selected(index)) return;
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, strfmt("exception: %s", e.what())};
    }
    report(index, name, o);
}

// Artifacts shared between criteria: the desk-scale run feeds the loss-curve,
// transition and reproducibility checks; the sweep run feeds reproducibility.
struct SharedRuns {
    fs::path work;
    RunConfig desk;
    fs::path desk_data, desk_run, desk_eval;
    bool desk_ready = false;
    RunConfig sweep;
    fs::path sweep_data, sweep_run, sweep_cmp;
    bool sweep_ready = false;
};

// --- criterion 1: analytic gradients match finite differences ---------------

Outcome check_gradient_audit() {
    const auto t0 = Clock::now();
    const int rc = cmd_gradcheck(5, 20260818, 1e-3, 1e-3, 1.0);
    const double secs = seconds_since(t0);
    return {rc == 0 && secs < 60.0,
            strfmt("5 seeded trials, exit=%d, %.1f s (budget 60 s)", rc, secs)};
}

// --- criterion 2: metric implementations match direct-formula oracles -------

Outcome check_metric_oracles() {
    Rng rng(424242);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 16 + rng.next_below(240);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = rng.uniform(-3.0, 3.0);
        for (std::size_t i = 0; i < n; ++i) y[i] = 0.4 * x[i] + rng.uniform(-2.0, 2.0);

        // textbook form: covariance over the product of standard deviations
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        const double direct = sxy / std::sqrt(sxx * syy);
        worst = std::max(worst, std::abs(pearson(x, y) - direct));
    }

    int ar_mismatches = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 20 + rng.next_below(120);
        std::vector<double> truth(n), est(n);
        for (auto& v : truth) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform(50.0, 500.0);
        truth[0] = 200.0;  // at least one voiced frame
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform() < 0.15) {
                est[i] = 0.0;
            } else if (truth[i] > 0.0) {
                est[i] = truth[i] * (1.0 + rng.uniform(-0.12, 0.12));
            } else {
                est[i] = rng.uniform(0.0, 500.0);
            }
        }
        const AccuracyResult got = accuracy_rate(est, truth, 0.05);
        std::size_t nv = 0, nc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (truth[i] <= 0.0) continue;
            ++nv;
            if (est[i] > 0.0 && std::abs(est[i] - truth[i]) <= 0.05 * truth[i]) ++nc;
        }
        if (got.n_voiced != nv || got.n_correct != nc) ++ar_mismatches;
    }

    return {worst < 1e-9 && ar_mismatches == 0,
            strfmt("pearson worst |diff|=%.2e (tol 1e-9), ar recount mismatches=%d",
                   worst, ar_mismatches)};
}

// --- criterion 3: desk-scale training reaches the correlation floors --------

Outcome check_desk_training(SharedRuns& s) {
    const auto t0 = Clock::now();
    cmd_synth_data(s.desk, s.desk_data);
    cmd_train(s.desk, s.desk_data / "manifest.json", s.desk_run);
    cmd_eval(s.desk, s.desk_run / "model.spf0", s.desk_data / "manifest.json", "test",
             s.desk_eval);
    const double secs = seconds_since(t0);
    s.desk_ready = true;

    const auto sum = read_summary(s.desk_eval / "summary.csv");
    const double strong = std::stod(sum.at("rho,strong_pct"));
    const double strong_moderate = strong + std::stod(sum.at("rho,moderate_pct"));
    const bool pass = strong >= 65.0 && strong_moderate >= 80.0 && secs < 1800.0;
    return {pass, strfmt("strong=%.1f%% (floor 65), strong+moderate=%.1f%% (floor 80), "
                         "%.0f s (budget 1800 s)",
                         strong, strong_moderate, secs)};
}

// --- criterion 4: training loss declines; a single pair is memorized --------

Outcome check_loss_curve(const SharedRuns& s) {
    if (!s.desk_ready) return {false, "desk-scale run unavailable"};
    const auto rows = read_csv(s.desk_run / "loss.csv");
    if (rows.size() < 2) return {false, "loss.csv has fewer than 2 epochs"};
    const double first = std::stod(rows.front().at("train_mse"));
    const double last = std::stod(rows.back().at("train_mse"));
    const bool declined = last < 0.25 * first;

    SynthSpec spec;
    spec.duration_s = 2.0;
    spec.trajectory = Trajectory::constant(220.0);
    spec.voiced_segments = {{0.0, 2.0}};
    spec.n_harmonics = 12;
    spec.rolloff_db_per_harmonic = 2.0;
    const auto [clip, contour] = synth_harmonic(spec, 99);
    const FrontendConfig fc;
    const auto images = make_image_windows(clip, fc);

    TrainSet one;
    one.images = {images[0]};
    one.targets = {make_target(contour, images[0].start_time_s, fc)};
    TrainConfig tc;
    tc.epochs = 300;
    tc.batch_size = 1;
    tc.conv_filters = 3;
    tc.seed = 7;
    tc.optimizer.lr = 3e-3;
    const TrainResult r = train(one, {}, tc);
    const double memorized = r.history.back().train_mse;

    return {declined && memorized < 1e-3,
            strfmt("final/first train mse=%.3f (floor 0.25), single-pair mse=%.2e "
                   "(floor 1e-3)",
                   last / first, memorized)};
}

// --- criterion 5: accuracy degrades monotonically with SNR, strong at 20 dB -

Outcome check_snr_sweep(SharedRuns& s) {
    cmd_synth_data(s.sweep, s.sweep_data);
    cmd_train(s.sweep, s.sweep_data / "manifest.json", s.sweep_run);
    cmd_compare(s.sweep, s.sweep_run / "model.spf0", s.sweep_data / "manifest.json", "test",
                s.sweep_cmp);
    s.sweep_ready = true;

    const auto rows = read_csv(s.sweep_cmp / "compare.csv");  // ascending snr
    if (rows.size() != 4) return {false, strfmt("expected 4 snr bins, got %zu", rows.size())};
    std::vector<double> cnn, yin;
    for (const auto& row : rows) {
        cnn.push_back(std::stod(row.at("ar_cnn")));
        yin.push_back(std::stod(row.at("ar_yin")));
    }
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        if (cnn[i] > cnn[i + 1] + 0.02) monotone = false;  // lower snr must not win
        if (yin[i] > yin[i + 1] + 0.02) monotone = false;
    }
    const double at20 = cnn.back();
    return {monotone && at20 >= 0.80,
            strfmt("cnn ar by snr asc = %.3f/%.3f/%.3f/%.3f, at 20 dB floor 0.80, "
                   "monotone(2pp slack)=%s",
                   cnn[0], cnn[1], cnn[2], cnn[3], monotone ? "yes" : "no")};
}

// --- criterion 6: the pitch-tracker baseline nails noisy pure tones ---------

Outcome check_baseline_tones() {
    std::size_t n_voiced = 0, n_correct = 0;
    for (int f = 100; f <= 400; f += 50) {
        SynthSpec spec;
        spec.duration_s = 2.0;
        spec.trajectory = Trajectory::constant(static_cast<double>(f));
        spec.voiced_segments = {{0.0, 2.0}};
        spec.n_harmonics = 1;
        spec.rolloff_db_per_harmonic = 0.0;
        const auto [tone, contour] = synth_harmonic(spec, 1000 + f);
        const AudioClip noise = gen_noise(NoiseKind::white, tone.size(), 16000, 2000 + f);
        const AudioClip mixed = mix_at_snr(tone, noise, 20.0);

        const YinConfig yc;
        const F0Contour est = yin_f0(mixed, yc);
        const std::vector<double> truth(est.size(), static_cast<double>(f));
        const AccuracyResult acc = accuracy_rate(est.f0_hz, truth, 0.05);
        n_voiced += acc.n_voiced;
        n_correct += acc.n_correct;
    }
    const double ar = static_cast<double>(n_correct) / static_cast<double>(n_voiced);
    return {ar >= 0.95, strfmt("tones 100..400 Hz at 20 dB: ar=%.4f (floor 0.95)", ar)};
}

// --- criterion 7: a 1 kHz tone peaks in the right spectrogram band ----------

Outcome check_tone_band() {
    AudioClip clip;
    clip.samples.resize(32768);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        clip.samples[i] = 0.5f * static_cast<float>(
            std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0));
    }
    const FrontendConfig fc;
    const auto images = make_image_windows(clip, fc);
    // 1000 Hz falls in band floor(1000 / (2000/27)) = 13; allow one band of slack.
    // The final window's zero-padded tail columns carry no signal and are skipped.
    std::size_t bad = 0, total = 0;
    for (const auto& img : images) {
        for (std::size_t c = 0; c < kImageCols; ++c) {
            std::size_t best = 0;
            for (std::size_t r = 1; r < kImageRows; ++r) {
                if (img.at(r, c) > img.at(best, c)) best = r;
            }
            if (img.at(best, c) <= 0.0f) continue;
            ++total;
            if (best < 12 || best > 14) ++bad;
        }
    }
    return {bad == 0 && total >= 120,
            strfmt("argmax outside band 13±1 in %zu of %zu signal columns", bad, total)};
}

// --- criterion 8: model files round-trip exactly and reject corruption ------

Outcome check_serialization(const SharedRuns& s) {
    const CnnModel model = init_model(5, 31337);
    SpectrogramImage img;
    Rng rng(4040);
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());

    Activations a0, a1;
    forward(model, img, a0);
    const fs::path path = s.work / "roundtrip.spf0";
    save_model(model, path);
    const CnnModel loaded = load_model(path);
    forward(loaded, img, a1);
    const bool identical =
        std::memcmp(a0.y.data(), a1.y.data(), a0.y.size() * sizeof(float)) == 0;

    std::string bytes = slurp(path);
    bool rejects_magic = false, rejects_truncation = false;
    {
        std::string bad = bytes;
        bad[0] = static_cast<char>(bad[0] ^ 0xFF);
        const fs::path p2 = s.work / "bad_magic.spf0";
        std::ofstream(p2, std::ios::binary) << bad;
        try {
            load_model(p2);
        } catch (const MalformedModelFile&) {
            rejects_magic = true;
        }
    }
    {
        const fs::path p3 = s.work / "truncated.spf0";
        std::ofstream(p3, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
        try {
            load_model(p3);
        } catch (const MalformedModelFile&) {
            rejects_truncation = true;
        }
    }
    return {identical && rejects_magic && rejects_truncation,
            strfmt("round-trip bit-identical=%s, rejects bad magic=%s, truncation=%s",
                   identical ? "yes" : "no", rejects_magic ? "yes" : "no",
                   rejects_truncation ? "yes" : "no")};
}

// --- criterion 9: prediction runs faster than real time ---------------------

Outcome check_realtime(const SharedRuns& s) {
    if (!s.desk_ready) return {false, "desk-scale run unavailable"};
    SynthSpec spec;
    spec.duration_s = 60.0;
    spec.trajectory = Trajectory::vibrato(200.0, 15.0, 4.0);
    spec.voiced_segments = {{0.0, 60.0}};
    spec.n_harmonics = 24;
    spec.rolloff_db_per_harmonic = 1.5;
    const auto [clip, contour] = synth_harmonic(spec, 606);
    const AudioClip noise = gen_noise(NoiseKind::pink, clip.size(), 16000, 607);
    const AudioClip mixed = mix_at_snr(clip, noise, 20.0);
    const fs::path wav = s.work / "minute.wav";
    write_wav(mixed, wav);

    const fs::path out = s.work / "minute_out";
    const auto t0 = Clock::now();
    const int rc = cmd_predict(s.desk, s.desk_run / "model.spf0", wav, out, false);
    const double secs = seconds_since(t0);
    const bool wrote = fs::exists(out / "contour.csv");
    return {rc == 0 && wrote && secs < 60.0,
            strfmt("60 s clip predicted in %.1f s (budget 60 s)", secs)};
}

// --- criterion 10: transition errors are reported and sit at boundaries -----

Outcome check_transitions(const SharedRuns& s) {
    if (!s.desk_ready) return {false, "desk-scale run unavailable"};
    const auto rows = read_csv(s.desk_eval / "report.csv");
    bool column_present = !rows.empty();
    for (const auto& row : rows) {
        if (!row.count("transition_errors") || row.at("transition_errors").empty()) {
            column_present = false;
            break;
        }
    }
    const auto sum = read_summary(s.desk_eval / "summary.csv");
    const bool summary_present = sum.count("transitions,errors_per_boundary") > 0;

    // Plausibility: per-frame error rate at voicing boundaries must exceed the
    // rate inside steady voiced/unvoiced runs.
    const CnnModel model = load_model(s.desk_run / "model.spf0");
    const DatasetManifest manifest = read_manifest(s.desk_data / "manifest.json");
    const EntryPredictor predictor = cnn_predictor(model);
    const FrontendConfig& fc = s.desk.frontend;
    std::size_t boundary_frames = 0, boundary_errors = 0;
    std::size_t interior_frames = 0, interior_errors = 0;
    for (const auto& entry : manifest.entries) {
        if (entry.split != "test") continue;
        const AudioClip clip = read_wav(manifest.clip_file(entry));
        const F0Contour contour = read_contour_csv(manifest.contour_file(entry));
        const auto images = make_image_windows(clip, fc);
        std::vector<double> truth(images.size() * kTargetLen, 0.0);
        for (std::size_t w = 0; w < images.size(); ++w) {
            const TargetVector t = make_target(contour, images[w].start_time_s, fc);
            for (std::size_t k = 0; k < kTargetLen; ++k) {
                truth[w * kTargetLen + k] = static_cast<double>(t[k]) * fc.f0_norm_hz;
            }
        }
        const std::vector<double> est = predictor(clip, images, fc);
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const bool v = truth[j] > 0.0;
            bool transition = false;
            if (j > 0 && (truth[j - 1] > 0.0) != v) transition = true;
            if (j + 1 < truth.size() && (truth[j + 1] > 0.0) != v) transition = true;
            const bool wrong = v ? !(est[j] > 0.0 && std::abs(est[j] - truth[j]) <= 0.05 * truth[j])
                                 : est[j] > 0.0;
            if (transition) {
                ++boundary_frames;
                boundary_errors += wrong;
            } else {
                ++interior_frames;
                interior_errors += wrong;
            }
        }
    }
    const double boundary_rate =
        boundary_frames ? static_cast<double>(boundary_errors) / boundary_frames : 0.0;
    const double interior_rate =
        interior_frames ? static_cast<double>(interior_errors) / interior_frames : 0.0;
    const bool concentrated = boundary_frames > 0 && boundary_rate > interior_rate;

    return {column_present && summary_present && concentrated,
            strfmt("per-entry column=%s, summary=%s, error rate at boundaries=%.3f vs "
                   "interior=%.3f",
                   column_present ? "yes" : "no", summary_present ? "yes" : "no",
                   boundary_rate, interior_rate)};
}

// --- criterion 11: repeating both training runs is bit-identical ------------

Outcome check_reproducibility(const SharedRuns& s) {
    if (!s.desk_ready || !s.sweep_ready) return {false, "prior runs unavailable"};

    const fs::path d2 = s.work / "repeat_desk_data";
    const fs::path r2 = s.work / "repeat_desk_run";
    const fs::path e2 = s.work / "repeat_desk_eval";
    cmd_synth_data(s.desk, d2);
    cmd_train(s.desk, d2 / "manifest.json", r2);
    cmd_eval(s.desk, r2 / "model.spf0", d2 / "manifest.json", "test", e2);

    bool equal = true;
    std::string first_diff;
    auto compare = [&](const fs::path& a, const fs::path& b) {
        if (!same_bytes(a, b)) {
            equal = false;
            if (first_diff.empty()) first_diff = a.filename().string();
        }
    };
    compare(s.desk_data / "manifest.json", d2 / "manifest.json");
    compare(s.desk_run / "model.spf0", r2 / "model.spf0");
    compare(s.desk_run / "loss.csv", r2 / "loss.csv");
    compare(s.desk_eval / "report.csv", e2 / "report.csv");
    compare(s.desk_eval / "summary.csv", e2 / "summary.csv");
    fs::remove_all(d2);  // repeated datasets are bulky and already compared

    const fs::path sd2 = s.work / "repeat_sweep_data";
    const fs::path sr2 = s.work / "repeat_sweep_run";
    const fs::path sc2 = s.work / "repeat_sweep_cmp";
    cmd_synth_data(s.sweep, sd2);
    cmd_train(s.sweep, sd2 / "manifest.json", sr2);
    cmd_compare(s.sweep, sr2 / "model.spf0", sd2 / "manifest.json", "test", sc2);
    compare(s.sweep_data / "manifest.json", sd2 / "manifest.json");
    compare(s.sweep_run / "model.spf0", sr2 / "model.spf0");
    compare(s.sweep_cmp / "compare.csv", sc2 / "compare.csv");
    compare(s.sweep_cmp / "report_cnn.csv", sc2 / "report_cnn.csv");
    compare(s.sweep_cmp / "report_yin.csv", sc2 / "report_yin.csv");
    fs::remove_all(sd2);

    return {equal, equal ? "both pipelines repeated bit-identically"
                         : strfmt("first differing artifact: %s", first_diff.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    set_max_threads(1);  // every timed budget below assumes a single core

    if (argc > 1) {  // optional criterion numbers: run only those
        g_selected = 0;
        for (int i = 1; i < argc; ++i) g_selected |= 1u << std::atoi(argv[i]);
    }

    SharedRuns s;
    s.work = fs::current_path() / "acceptance_work";
    fs::remove_all(s.work);
    fs::create_directories(s.work);

    s.desk.train.conv_filters = 8;
    s.desk.train.seed = 1;
    s.desk_data = s.work / "desk_data";
    s.desk_run = s.work / "desk_run";
    s.desk_eval = s.work / "desk_eval";

    s.sweep = s.desk;
    s.sweep.dataset.snr_db = {0.0, 6.0, 12.0, 20.0};
    // the sweep has no runtime budget; larger splits give each SNR bin
    // 225 training and 50 test entries so bin means are stable
    s.sweep.dataset.train_count = 900;
    s.sweep.dataset.test_count = 200;
    s.sweep_data = s.work / "sweep_data";
    s.sweep_run = s.work / "sweep_run";
    s.sweep_cmp = s.work / "sweep_cmp";

    run_criterion(1, "gradient audit", [] { return check_gradient_audit(); });
    run_criterion(2, "metric oracles", [] { return check_metric_oracles(); });
    run_criterion(3, "desk-scale training", [&] { return check_desk_training(s); });
    run_criterion(4, "loss decline", [&] { return check_loss_curve(s); });
    run_criterion(5, "snr sweep", [&] { return check_snr_sweep(s); });
    run_criterion(6, "baseline pure tones", [] { return check_baseline_tones(); });
    run_criterion(7, "tone band placement", [] { return check_tone_band(); });
    run_criterion(8, "model serialization", [&] { return check_serialization(s); });
    run_criterion(9, "real-time prediction", [&] { return check_realtime(s); });
    run_criterion(10, "transition reporting", [&] { return check_transitions(s); });
    run_criterion(11, "bit reproducibility", [&] { return check_reproducibility(s); });

    std::printf("%d of %d criteria passed\n", g_run - g_failures, g_run);
    return g_failures;
}
