// flowae command line: synth, train, compress, decompress, evaluate, classify, compare.

#include "flowae/error.hpp"
#include "flowae/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace flowae;
using namespace flowae::pipeline;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    bool force = false;
    std::vector<std::string> inputs;
    std::string fit_on;
    std::optional<int> max_epochs;

    std::optional<std::size_t> n_per_class;
    std::optional<std::size_t> n_classes;
    std::string synth_spec;
    std::string synth_out;

    std::string input;
    std::string model;
    std::string preprocessor;
    std::string latent;
    std::string out;
    std::string original;
    std::string reconstructed;
    std::string features = "original";
    bool quiet = false;
};

PipelineConfig resolve(const Options& o) {
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    c.force = o.force;
    if (!o.inputs.empty()) c.inputs.assign(o.inputs.begin(), o.inputs.end());
    if (o.fit_on == "all") c.fit_preprocessor_on = FitOn::All;
    else if (o.fit_on == "train") c.fit_preprocessor_on = FitOn::Train;
    if (o.max_epochs) c.train.max_epochs = *o.max_epochs;
    if (o.n_per_class) c.synth.n_per_class = *o.n_per_class;
    if (o.n_classes) c.synth.n_classes = *o.n_classes;
    if (!o.synth_spec.empty()) c.synth.spec = o.synth_spec;
    if (!o.synth_out.empty()) c.synth.output_name = o.synth_out;
    c.validate();
    return c;
}

std::filesystem::path or_default(const std::string& value, const PipelineConfig& c, const char* name) {
    return value.empty() ? c.out(name) : std::filesystem::path(value);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowae: autoencoder compression of IP flow records"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "Pipeline config (JSON)");
    app.add_option("--seed", o.seed, "Seed for every random draw in the pipeline");
    app.add_option("--output-dir", o.output_dir, "Directory for all artifacts");
    app.add_flag("--force", o.force, "Proceed when model and preprocessor fingerprints differ");
    app.add_flag("-q,--quiet", o.quiet, "No per-epoch progress");

    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic flow CSV");
    synth->add_option("--n-per-class", o.n_per_class, "Records per class");
    synth->add_option("--classes", o.n_classes, "Number of classes for the built-in spec");
    synth->add_option("--spec", o.synth_spec, "Per-class log-normal parameters (JSON)");
    synth->add_option("--out", o.synth_out, "File name inside the output directory");

    auto* train = app.add_subcommand("train", "Fit preprocessor and autoencoder");
    train->add_option("--input", o.inputs, "Input CSV (repeatable)");
    train->add_option("--fit-preprocessor-on", o.fit_on, "train | all")->check(CLI::IsMember({"train", "all"}));
    train->add_option("--max-epochs", o.max_epochs, "Epoch cap");

    auto* compress = app.add_subcommand("compress", "Encode a flow CSV into a latent file");
    compress->add_option("--input", o.input, "Flow CSV")->required();
    compress->add_option("--model", o.model, "Model file");
    compress->add_option("--preprocessor", o.preprocessor, "Preprocessor JSON");
    compress->add_option("--out", o.out, "Latent output file");

    auto* decompress = app.add_subcommand("decompress", "Decode a latent file back into a flow CSV");
    decompress->add_option("--latent", o.latent, "Latent file");
    decompress->add_option("--model", o.model, "Model file");
    decompress->add_option("--preprocessor", o.preprocessor, "Preprocessor JSON");
    decompress->add_option("--out", o.out, "Reconstructed CSV");

    auto* evaluate = app.add_subcommand("evaluate", "Reconstruction metrics");
    evaluate->add_option("--original", o.original, "Original flow CSV")->required();
    evaluate->add_option("--reconstructed", o.reconstructed, "Reconstructed CSV; omit to reconstruct with the model");
    evaluate->add_option("--model", o.model, "Model file");
    evaluate->add_option("--preprocessor", o.preprocessor, "Preprocessor JSON");

    auto* classify = app.add_subcommand("classify", "Random Forest on one feature set");
    classify->add_option("--input", o.inputs, "Input CSV (repeatable)");
    classify->add_option("--features", o.features, "original | compressed")->check(CLI::IsMember({"original", "compressed"}));

    auto* cmp = app.add_subcommand("compare", "Original vs compressed classification");
    cmp->add_option("--input", o.inputs, "Input CSV (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        const PipelineConfig c = resolve(o);
        if (synth->parsed()) {
            std::cout << cmd_synth(c).string() << "\n";
        } else if (train->parsed()) {
            EpochCallback progress;
            if (!o.quiet) {
                progress = [](const EpochRecord& e) {
                    std::fprintf(stderr, "epoch %3d  train %.6g  test %.6g  lr %.3g\n", e.epoch, e.train_loss, e.test_loss,
                                 e.learning_rate);
                };
            }
            const auto r = cmd_train(c, progress);
            std::cout << "epochs: " << r.history.epochs.size() << "  best epoch: " << r.history.best_epoch
                      << "  best test loss: " << r.history.best_test_loss << "\n"
                      << r.model.string() << "\n" << r.preprocessor.string() << "\n" << r.history_csv.string() << "\n";
        } else if (compress->parsed()) {
            const auto path = cmd_compress(c, o.input, or_default(o.model, c, artifact::kModel),
                                           or_default(o.preprocessor, c, artifact::kPreprocessor),
                                           or_default(o.out, c, artifact::kLatent));
            std::cout << path.string() << "\n";
        } else if (decompress->parsed()) {
            const auto path = cmd_decompress(c, or_default(o.latent, c, artifact::kLatent),
                                             or_default(o.model, c, artifact::kModel),
                                             or_default(o.preprocessor, c, artifact::kPreprocessor),
                                             or_default(o.out, c, artifact::kReconstructed));
            std::cout << path.string() << "\n";
        } else if (evaluate->parsed()) {
            std::optional<std::filesystem::path> recon;
            if (!o.reconstructed.empty()) recon = o.reconstructed;
            const auto r = cmd_evaluate(c, o.original, recon, or_default(o.model, c, artifact::kModel),
                                        or_default(o.preprocessor, c, artifact::kPreprocessor));
            std::cout << "MSE " << r.errors.mse << "  RMSE " << r.errors.rmse << "  MAPE " << r.errors.mape_percent
                      << "% (" << r.errors.mape_excluded_zeros << " zero originals excluded)  ratio "
                      << r.compression_ratio << "\n";
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        } else if (classify->parsed()) {
            const auto src = o.features == "compressed" ? FeatureSource::Compressed : FeatureSource::Original;
            std::cout << classification_text(cmd_classify(c, src));
        } else if (cmp->parsed()) {
            std::cout << comparison_text(cmd_compare(c));
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
