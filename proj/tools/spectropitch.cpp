#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "spectropitch/commands.hpp"

using namespace spectropitch;

namespace {

RunConfig load_or_default(const std::string& config_path) {
    return config_path.empty() ? RunConfig{} : load_run_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectrogram-based F0 regression: synthesize, train, predict, evaluate"};
    app.require_subcommand(1);
    int rc = 0;

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "render a synthetic labeled dataset");
    std::string synth_config, synth_out;
    std::uint64_t synth_seed = 0;
    synth->add_option("--config", synth_config, "JSON settings file")->check(CLI::ExistingFile);
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "dataset seed override");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->callback([&] {
        RunConfig cfg = load_or_default(synth_config);
        if (synth_seed_opt->count() > 0) cfg.dataset.seed = synth_seed;
        rc = cmd_synth_data(cfg, synth_out);
    });

    // train
    auto* train = app.add_subcommand("train", "train the regression net on a dataset");
    std::string train_config, train_manifest, train_out;
    std::uint64_t train_seed = 0;
    train->add_option("--config", train_config, "JSON settings file")->check(CLI::ExistingFile);
    auto* train_seed_opt = train->add_option("--seed", train_seed, "training seed override");
    train->add_option("--manifest", train_manifest, "dataset manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", train_out, "output directory")->required();
    train->callback([&] {
        RunConfig cfg = load_or_default(train_config);
        if (train_seed_opt->count() > 0) cfg.train.seed = train_seed;
        rc = cmd_train(cfg, train_manifest, train_out);
    });

    // predict
    auto* predict = app.add_subcommand("predict", "run a saved model over one WAV file");
    std::string predict_config, predict_model, predict_wav, predict_out;
    bool predict_pgm = false;
    predict->add_option("--config", predict_config, "JSON settings file")
        ->check(CLI::ExistingFile);
    predict->add_option("--model", predict_model, "model file")->required()->check(
        CLI::ExistingFile);
    predict->add_option("--wav", predict_wav, "input clip")->required()->check(
        CLI::ExistingFile);
    predict->add_option("--out", predict_out, "output directory")->required();
    predict->add_flag("--pgm", predict_pgm, "also dump one PGM per image buffer");
    predict->callback([&] {
        rc = cmd_predict(load_or_default(predict_config), predict_model, predict_wav,
                         predict_out, predict_pgm);
    });

    // eval
    auto* eval = app.add_subcommand("eval", "score a saved model on one dataset split");
    std::string eval_config, eval_model, eval_manifest, eval_split = "test", eval_out;
    eval->add_option("--config", eval_config, "JSON settings file")->check(CLI::ExistingFile);
    eval->add_option("--model", eval_model, "model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", eval_manifest, "dataset manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--split", eval_split, "dataset split (default test)");
    eval->add_option("--out", eval_out, "output directory")->required();
    eval->callback([&] {
        rc = cmd_eval(load_or_default(eval_config), eval_model, eval_manifest, eval_split,
                      eval_out);
    });

    // compare
    auto* compare =
        app.add_subcommand("compare", "model vs pitch-tracker baseline per SNR bin");
    std::string cmp_config, cmp_model, cmp_manifest, cmp_split = "test", cmp_out;
    compare->add_option("--config", cmp_config, "JSON settings file")->check(CLI::ExistingFile);
    compare->add_option("--model", cmp_model, "model file")->required()->check(
        CLI::ExistingFile);
    compare->add_option("--manifest", cmp_manifest, "dataset manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    compare->add_option("--split", cmp_split, "dataset split (default test)");
    compare->add_option("--out", cmp_out, "output directory")->required();
    compare->callback([&] {
        rc = cmd_compare(load_or_default(cmp_config), cmp_model, cmp_manifest, cmp_split,
                         cmp_out);
    });

    // gradcheck
    auto* gradcheck =
        app.add_subcommand("gradcheck", "audit the analytic gradients numerically");
    int gc_trials = 5;
    std::uint64_t gc_seed = 7;
    double gc_epsilon = 1e-3, gc_tolerance = 1e-3, gc_inject = 1.0;
    gradcheck->add_option("--trials", gc_trials, "independently seeded models to audit");
    gradcheck->add_option("--seed", gc_seed, "base seed");
    gradcheck->add_option("--epsilon", gc_epsilon, "finite-difference step");
    gradcheck->add_option("--tolerance", gc_tolerance, "max relative error accepted");
    gradcheck->add_option("--inject-scale", gc_inject,
                          "scale the analytic side (not 1.0 = deliberate fault)");
    gradcheck->callback(
        [&] { rc = cmd_gradcheck(gc_trials, gc_seed, gc_epsilon, gc_tolerance, gc_inject); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return rc;
}
