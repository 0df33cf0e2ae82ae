#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "spectropitch/commands.hpp"
#include "spectropitch/errors.hpp"

using namespace spectropitch;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const char* leaf) {
    const fs::path dir = fs::temp_directory_path() / "spectropitch_cli" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    return path;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

// Small corpus reused across command tests.
RunConfig tiny_config() {
    RunConfig config;
    config.dataset.train_count = 6;
    config.dataset.val_count = 2;
    config.dataset.test_count = 3;
    config.dataset.duration_s = 1.2;
    config.dataset.seed = 5;
    config.train.epochs = 3;
    config.train.seed = 5;
    return config;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config files round-trip through the resolver") {
    const fs::path dir = scratch_dir("config");
    RunConfig config = tiny_config();
    config.train.optimizer.lr = 0.0042;
    config.yin.threshold = 0.2;
    config.frontend.tau = 0.1;
    write_run_config(config, dir / "config.json");

    const RunConfig back = load_run_config(dir / "config.json");
    CHECK(back.dataset.train_count == 6);
    CHECK(back.dataset.duration_s == 1.2);
    CHECK(back.train.epochs == 3);
    CHECK(back.train.optimizer.lr == 0.0042);
    CHECK(back.yin.threshold == 0.2);
    CHECK(back.frontend.tau == 0.1);
}

TEST_CASE("partial configs keep the documented defaults") {
    const fs::path dir = scratch_dir("partial");
    const fs::path path = write_text(dir / "c.json",
                                     R"({"train": {"epochs": 7}})");
    const RunConfig config = load_run_config(path);
    CHECK(config.train.epochs == 7);
    CHECK(config.train.batch_size == 16);
    CHECK(config.dataset.train_count == 600);
    CHECK(config.frontend.fft_size == 512);
}

TEST_CASE("unknown keys and broken json are rejected") {
    const fs::path dir = scratch_dir("badcfg");
    CHECK_THROWS_AS(load_run_config(write_text(dir / "a.json",
                                               R"({"train": {"epochz": 7}})")),
                    MalformedFile);
    CHECK_THROWS_AS(load_run_config(write_text(dir / "b.json",
                                               R"({"training": {}})")),
                    MalformedFile);
    CHECK_THROWS_AS(load_run_config(write_text(dir / "c.json", "{not json")),
                    MalformedFile);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), IoError);
}

TEST_CASE("synth command writes a reproducible dataset tree") {
    const RunConfig config = tiny_config();
    const fs::path a = scratch_dir("ds_a");
    const fs::path b = scratch_dir("ds_b");
    REQUIRE(cmd_synth_data(config, a) == 0);
    REQUIRE(cmd_synth_data(config, b) == 0);

    CHECK(fs::exists(a / "manifest.json"));
    CHECK(fs::exists(a / "resolved_config.json"));
    CHECK(fs::is_directory(a / "train"));
    CHECK(fs::is_directory(a / "val"));
    CHECK(fs::is_directory(a / "test"));
    CHECK(file_bytes(a / "manifest.json") == file_bytes(b / "manifest.json"));

    const DatasetManifest manifest = read_manifest(a / "manifest.json");
    CHECK(manifest.entries.size() == 11);
    CHECK(file_bytes(manifest.clip_file(manifest.entries[0])) ==
          file_bytes(b / manifest.entries[0].clip_path));
}

TEST_CASE("train, predict, eval and compare cover the whole loop") {
    const RunConfig config = tiny_config();
    const fs::path ds = scratch_dir("loop_ds");
    REQUIRE(cmd_synth_data(config, ds) == 0);

    const fs::path run = scratch_dir("loop_run");
    REQUIRE(cmd_train(config, ds / "manifest.json", run) == 0);
    CHECK(fs::exists(run / "model.spf0"));
    CHECK(fs::exists(run / "model_meta.json"));
    CHECK(line_count(run / "loss.csv") == 4);  // header + 3 epochs

    // 2 s of audio -> 2 buffers -> 88 contour rows
    AudioClip clip;
    clip.samples.resize(32000);
    for (std::size_t i = 0; i < clip.size(); ++i)
        clip.samples[i] = 0.5f * static_cast<float>(
            std::sin(2.0 * 3.14159265358979 * 220.0 * static_cast<double>(i) / 16000.0));
    const fs::path wav = ds / "probe.wav";
    write_wav(clip, wav);

    const fs::path pred = scratch_dir("loop_pred");
    REQUIRE(cmd_predict(config, run / "model.spf0", wav, pred, true) == 0);
    CHECK(line_count(pred / "contour.csv") == 89);
    CHECK(fs::exists(pred / "window_000_t0.000s.pgm"));
    CHECK(fs::exists(pred / "window_001_t1.024s.pgm"));

    const fs::path eval_dir = scratch_dir("loop_eval");
    REQUIRE(cmd_eval(config, run / "model.spf0", ds / "manifest.json", "test",
                     eval_dir) == 0);
    CHECK(line_count(eval_dir / "report.csv") == 4);  // header + 3 test entries

    // band percentages in the summary add up to ~100 unless all degenerate
    std::ifstream summary(eval_dir / "summary.csv");
    std::string line;
    double pct_sum = 0.0;
    while (std::getline(summary, line)) {
        if (line.rfind("rho,", 0) == 0 && line.find("_pct,") != std::string::npos)
            pct_sum += std::stod(line.substr(line.rfind(',') + 1));
    }
    CHECK(pct_sum == doctest::Approx(100.0).epsilon(0.002));

    const fs::path cmp_dir = scratch_dir("loop_cmp");
    REQUIRE(cmd_compare(config, run / "model.spf0", ds / "manifest.json", "test",
                        cmp_dir) == 0);
    const std::string table = file_bytes(cmp_dir / "compare.csv");
    CHECK(table.rfind("snr_db,ar_cnn,ar_yin,n_entries\n", 0) == 0);
    CHECK(line_count(cmp_dir / "compare.csv") == 2);  // single 20 dB bin
    CHECK(fs::exists(cmp_dir / "report_cnn.csv"));
    CHECK(fs::exists(cmp_dir / "report_yin.csv"));

    // reruns are byte-identical
    const fs::path cmp2 = scratch_dir("loop_cmp2");
    REQUIRE(cmd_compare(config, run / "model.spf0", ds / "manifest.json", "test",
                        cmp2) == 0);
    CHECK(file_bytes(cmp2 / "compare.csv") == table);
}

TEST_CASE("missing inputs exit nonzero through the cli wrapper") {
    const RunConfig config = tiny_config();
    const fs::path dir = scratch_dir("missing");
    CHECK_THROWS_AS(cmd_train(config, dir / "nope.json", dir / "out"), IoError);
    CHECK_THROWS_AS(cmd_predict(config, dir / "nope.spf0", dir / "nope.wav",
                                dir / "out", false),
                    IoError);
}

TEST_CASE("gradient audit passes clean and fails when poisoned") {
    CHECK(cmd_gradcheck(2, 7, 1e-3, 1e-3, 1.0) == 0);
    CHECK(cmd_gradcheck(1, 7, 1e-3, 1e-3, 2.0) == 1);
}

}  // TEST_SUITE
