// End-to-end tests through the flowae_cli executable.
#include "flowae/flow_data.hpp"
#include "flowae/io_util.hpp"
#include "flowae/pipeline.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sys/wait.h>

using namespace flowae;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

RunResult run_cli(const fs::path& dir, const std::string& args) {
    const char* cli = std::getenv("FLOWAE_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "FLOWAE_CLI must point at the flowae_cli binary");
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = quote(cli) + " -q --output-dir " + quote(dir.string()) + " " + args + " >" +
                            quote(out.string()) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = io::read_file(out);
    r.err = io::read_file(err);
    return r;
}

/// Small and fast: 3 classes x 60 flows, few epochs, 10 trees.
fs::path write_config(const fs::path& dir) {
    const auto path = dir / "config.json";
    io::write_file_atomic(path, R"({
  "synth": {"n_per_class": 60, "n_classes": 3},
  "train": {"max_epochs": 3, "batch_size": 32},
  "forest": {"n_trees": 10}
})");
    return path;
}

std::string cfg(const fs::path& dir) { return "--config " + quote(write_config(dir).string()) + " "; }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("synth writes a schema-ordered, deterministic CSV") {
    const auto dir = testing::scratch_dir("cli_synth");
    auto r = run_cli(dir, cfg(dir) + "synth");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string a = io::read_file(dir / "synthetic.csv");
    const auto schema = default_schema();
    std::string header;
    for (const auto& c : schema.identity_columns) header += c + ",";
    for (const auto& c : schema.compressible_columns) header += c + ",";
    header += *schema.label_column;
    CHECK(first_line(a) == header);
    CHECK(parse_csv(a, schema).size() == 180);

    r = run_cli(dir, cfg(dir) + "synth");
    CHECK(io::read_file(dir / "synthetic.csv") == a);
    r = run_cli(dir, cfg(dir) + "--seed 7 synth --out other.csv");
    CHECK(io::read_file(dir / "other.csv") != a);

    fs::remove(dir / "bad.csv");
    r = run_cli(dir, "synth --n-per-class 0 --out bad.csv");
    CHECK(r.code == 1);
    CHECK_FALSE(fs::exists(dir / "bad.csv"));
}

TEST_CASE("usage errors") {
    const auto dir = testing::scratch_dir("cli_usage");
    CHECK(run_cli(dir, "").code == 1);
    CHECK(run_cli(dir, "frobnicate").code == 1);
    CHECK(run_cli(dir, "--config " + quote((dir / "nope.json").string()) + " synth").code != 0);
}

TEST_CASE("train, compress, decompress, evaluate") {
    const auto dir = testing::scratch_dir("cli_train");
    const std::string c = cfg(dir);
    REQUIRE(run_cli(dir, c + "synth").code == 0);
    const std::string data = (dir / "synthetic.csv").string();

    auto r = run_cli(dir, c + "train --input " + quote((dir / "missing.csv").string()));
    CHECK(r.code != 0);
    CHECK(r.err.find("missing.csv") != std::string::npos);

    r = run_cli(dir, c + "train --input " + quote(data));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const char* name : {"model.bin", "preprocessor.json", "history.csv"}) CHECK(fs::exists(dir / name));
    const std::string model = io::read_file(dir / "model.bin");
    const std::string history = io::read_file(dir / "history.csv");
    CHECK(std::count(history.begin(), history.end(), '\n') == 4);
    CHECK(first_line(history) == "epoch,train_loss,test_loss,lr");

    r = run_cli(dir, c + "train --input " + quote(data));
    CHECK(io::read_file(dir / "model.bin") == model);

    r = run_cli(dir, c + "compress --input " + quote(data));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto latent = pipeline::load_latent(dir / "latent.bin");
    CHECK(latent.latent.rows() == 180);
    CHECK(latent.latent.cols() == 16);
    CHECK(latent.width_bytes == 4);

    r = run_cli(dir, c + "decompress");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto schema = default_schema();
    const auto original = load_csv(data, schema);
    const auto recon = load_csv(dir / "reconstructed.csv", schema);
    REQUIRE(recon.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        CHECK(recon.records()[i].identity == original.records()[i].identity);
        CHECK(recon.records()[i].label == original.records()[i].label);
    }

    r = run_cli(dir, c + "evaluate --original " + quote(data) + " --reconstructed " +
                         quote((dir / "reconstructed.csv").string()));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto rep = nlohmann::json::parse(io::read_file(dir / "reconstruction_report.json"));
    CHECK(rep["compression_ratio"] == 2.625);
    CHECK(rep["features"][0].contains("excluded_zeros"));
    CHECK(rep.contains("mape_excluded_zeros"));
    for (const char* name : {"feature_reconstruction.csv", "correlation_difference.csv", "row_relative_errors.csv"}) {
        CHECK(fs::exists(dir / name));
    }

    r = run_cli(dir, c + "evaluate --original " + quote(data) + " --reconstructed " + quote(data));
    REQUIRE(r.code == 0);
    rep = nlohmann::json::parse(io::read_file(dir / "reconstruction_report.json"));
    CHECK(rep["mse"] == 0.0);
    CHECK(rep["mape_percent"] == 0.0);
    for (const auto& f : rep["features"]) CHECK(f["kl_divergence"] == 0.0);
    for (const auto& row : rep["correlation_difference"]) {
        for (const auto& v : row) CHECK((v.is_null() || v == 0.0));
    }

    // In-memory evaluation with the trained model.
    r = run_cli(dir, c + "evaluate --original " + quote(data));
    CHECK(r.code == 0);
}

TEST_CASE("fingerprint mismatch is refused unless forced") {
    const auto dir = testing::scratch_dir("cli_force");
    const std::string c = cfg(dir);
    REQUIRE(run_cli(dir, c + "synth").code == 0);
    const std::string data = (dir / "synthetic.csv").string();
    REQUIRE(run_cli(dir, c + "train --input " + quote(data)).code == 0);
    REQUIRE(run_cli(dir, c + "train --fit-preprocessor-on all --input " + quote(data)).code == 0);
    fs::copy_file(dir / "preprocessor.json", dir / "other_pre.json");
    REQUIRE(run_cli(dir, c + "train --input " + quote(data)).code == 0);
    const std::string other = quote((dir / "other_pre.json").string());

    auto r = run_cli(dir, c + "compress --input " + quote(data) + " --preprocessor " + other);
    CHECK(r.code == 1);
    CHECK(r.err.find("fingerprint") != std::string::npos);

    r = run_cli(dir, c + "--force compress --input " + quote(data) + " --preprocessor " + other);
    CHECK(r.code == 0);
    r = run_cli(dir, c + "--force evaluate --original " + quote(data) + " --preprocessor " + other);
    CHECK(r.code == 0);
    const auto rep = nlohmann::json::parse(io::read_file(dir / "reconstruction_report.json"));
    bool stamped = false;
    for (const auto& w : rep["warnings"]) stamped |= w.get<std::string>().find("fingerprint") != std::string::npos;
    CHECK(stamped);
}

TEST_CASE("classify and compare are reproducible") {
    const auto dir = testing::scratch_dir("cli_classify");
    const std::string c = cfg(dir);
    REQUIRE(run_cli(dir, c + "synth").code == 0);
    const std::string input = "--input " + quote((dir / "synthetic.csv").string());
    REQUIRE(run_cli(dir, c + "train " + input).code == 0);

    auto r = run_cli(dir, c + "classify " + input);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string report = io::read_file(dir / "classification_original.json");
    REQUIRE(run_cli(dir, c + "classify " + input).code == 0);
    CHECK(io::read_file(dir / "classification_original.json") == report);
    CHECK(fs::exists(dir / "confusion_original.csv"));

    r = run_cli(dir, c + "classify --features compressed " + input);
    REQUIRE_MESSAGE(r.code == 0, r.err);

    r = run_cli(dir, c + "compare " + input);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const std::string cmp = io::read_file(dir / "comparison.json");
    const auto j = nlohmann::json::parse(cmp);
    CHECK(j["original"]["n"] == 36);
    CHECK(j["difference"]["accuracy"] == j["compressed"]["accuracy"].get<double>() - j["original"]["accuracy"].get<double>());
    CHECK(r.out.find("Accuracy") != std::string::npos);
    REQUIRE(run_cli(dir, c + "compare " + input).code == 0);
    CHECK(io::read_file(dir / "comparison.json") == cmp);

    // Unlabeled input cannot be classified.
    auto data = load_csv(dir / "synthetic.csv", default_schema());
    std::vector<FlowRecord> unlabeled = data.records();
    for (auto& rec : unlabeled) rec.label.reset();
    write_csv(Dataset(default_schema(), unlabeled), dir / "unlabeled.csv");
    r = run_cli(dir, c + "classify --input " + quote((dir / "unlabeled.csv").string()));
    CHECK(r.code == 2);
}
