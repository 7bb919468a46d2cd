#include "flowae/pipeline.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <iostream>

namespace flowae::pipeline {
namespace {

constexpr char kLatentMagic[8] = {'F', 'L', 'O', 'W', 'A', 'E', 'L', '\0'};
constexpr std::uint32_t kLatentVersion = 1;

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

void ensure_output_dir(const PipelineConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw DataError("cannot create output directory " + config.output_dir.string() + ": " + ec.message());
}

SplitIndices split_for(const Dataset& data, const PipelineConfig& config) {
    if (data.labeled()) return stratified_split(data, config.test_fraction, config.seed);
    return random_split(data.size(), config.test_fraction, config.seed);
}

void require_labels(const Dataset& data) {
    if (!data.labeled()) throw DataError("classification needs a labeled dataset (schema label column)");
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test_fraction must be in (0, 1)");
    train.validate();
    if (forest.n_trees < 1) throw UsageError("forest.n_trees must be >= 1");
    if (forest.tree.min_samples_split < 2) throw UsageError("forest.min_samples_split must be >= 2");
    if (metrics.kl_bins < 1) throw UsageError("metrics.kl_bins must be >= 1");
    if (metrics.latent_width_bytes != 4 && metrics.latent_width_bytes != 8) {
        throw UsageError("metrics.latent_width_bytes must be 4 or 8");
    }
    if (metrics.original_width_bytes < 1) throw UsageError("metrics.original_width_bytes must be >= 1");
    if (metrics.latent_dim != kLatentDim) throw UsageError("metrics.latent_dim must match the bottleneck width 16");
    if (synth.n_per_class < 1) throw UsageError("synth.n_per_class must be >= 1");
    if (synth.n_classes < 2 && !synth.spec) throw UsageError("synth.n_classes must be >= 2");
}

FeatureSchema PipelineConfig::resolved_schema() const {
    if (!schema) return default_schema();
    if (!std::filesystem::exists(*schema)) throw UsageError("schema file not found: " + schema->string());
    return load_schema(*schema);
}

TrainConfig PipelineConfig::train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
}

PipelineConfig config_from_json(const std::string& text) {
    PipelineConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.contains("schema") && !j["schema"].is_null()) c.schema = j["schema"].get<std::string>();
        if (j.contains("inputs")) {
            for (const auto& p : j["inputs"]) c.inputs.emplace_back(p.get<std::string>());
        }
        read_if(j, "seed", c.seed);
        read_if(j, "test_fraction", c.test_fraction);
        if (j.contains("fit_preprocessor_on")) {
            const auto v = j["fit_preprocessor_on"].get<std::string>();
            if (v == "train") c.fit_preprocessor_on = FitOn::Train;
            else if (v == "all") c.fit_preprocessor_on = FitOn::All;
            else throw UsageError("fit_preprocessor_on must be 'train' or 'all'");
        }
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("train")) {
            const auto& t = j["train"];
            read_if(t, "learning_rate", c.train.learning_rate);
            read_if(t, "weight_decay", c.train.weight_decay);
            read_if(t, "decoupled_weight_decay", c.train.decoupled_weight_decay);
            read_if(t, "adam_beta1", c.train.adam_beta1);
            read_if(t, "adam_beta2", c.train.adam_beta2);
            read_if(t, "adam_epsilon", c.train.adam_epsilon);
            read_if(t, "huber_delta", c.train.huber_delta);
            read_if(t, "clip_max_norm", c.train.clip_max_norm);
            read_if(t, "batch_size", c.train.batch_size);
            read_if(t, "max_epochs", c.train.max_epochs);
            read_if(t, "plateau_factor", c.train.plateau_factor);
            read_if(t, "plateau_patience", c.train.plateau_patience);
            read_if(t, "early_stop_patience", c.train.early_stop_patience);
            read_if(t, "improvement_threshold", c.train.improvement_threshold);
            read_if(t, "min_lr", c.train.min_lr);
            read_if(t, "slope", c.train.slope);
        }
        if (j.contains("forest")) {
            const auto& f = j["forest"];
            read_if(f, "n_trees", c.forest.n_trees);
            read_if(f, "max_depth", c.forest.tree.max_depth);
            read_if(f, "min_samples_split", c.forest.tree.min_samples_split);
            if (f.contains("max_features")) {
                const auto& mf = f["max_features"];
                if (mf.is_number_integer()) {
                    c.forest.tree.max_features = MaxFeatures::Fixed;
                    c.forest.tree.fixed_features = mf.get<std::size_t>();
                } else if (mf == "sqrt") {
                    c.forest.tree.max_features = MaxFeatures::Sqrt;
                } else if (mf == "all") {
                    c.forest.tree.max_features = MaxFeatures::All;
                } else {
                    throw UsageError("forest.max_features must be 'sqrt', 'all' or an integer");
                }
            }
        }
        if (j.contains("metrics")) {
            const auto& m = j["metrics"];
            read_if(m, "kl_bins", c.metrics.kl_bins);
            read_if(m, "original_width_bytes", c.metrics.original_width_bytes);
            read_if(m, "latent_width_bytes", c.metrics.latent_width_bytes);
        }
        if (j.contains("synth")) {
            const auto& s = j["synth"];
            read_if(s, "n_per_class", c.synth.n_per_class);
            read_if(s, "n_classes", c.synth.n_classes);
            read_if(s, "output", c.synth.output_name);
            if (s.contains("spec") && !s["spec"].is_null()) c.synth.spec = s["spec"].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
    return config_from_json(io::read_file(path));
}

std::string latent_to_bytes(const LatentFile& f) {
    io::ByteWriter w;
    w.raw(kLatentMagic, sizeof kLatentMagic);
    w.u32(kLatentVersion);
    w.u32(f.latent_dim);
    w.u32(f.width_bytes);
    w.u64(f.preprocessor_fingerprint);
    w.u32(static_cast<std::uint32_t>(f.identity_columns.size()));
    for (const auto& c : f.identity_columns) w.str(c);
    w.u8(f.label_column ? 1 : 0);
    if (f.label_column) w.str(*f.label_column);
    w.u64(f.latent.rows());
    for (std::size_t r = 0; r < f.latent.rows(); ++r) {
        for (const auto& cell : f.identity[r]) w.str(cell);
        for (double v : f.latent.row(r)) {
            if (f.width_bytes == 4) w.f32(static_cast<float>(v));
            else w.f64(v);
        }
        if (f.label_column) w.str(f.labels[r]);
    }
    return w.bytes();
}

LatentFile latent_from_bytes(std::string_view bytes) {
    io::ByteReader r(bytes);
    char magic[sizeof kLatentMagic];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kLatentMagic, sizeof magic) != 0) throw FormatError("not a latent file");
    if (const auto v = r.u32(); v != kLatentVersion) throw FormatError("unsupported latent file version " + std::to_string(v));
    LatentFile f;
    f.latent_dim = r.u32();
    f.width_bytes = r.u32();
    if (f.latent_dim != kLatentDim) throw FormatError("latent width does not match the model bottleneck");
    if (f.width_bytes != 4 && f.width_bytes != 8) throw FormatError("latent value width must be 4 or 8 bytes");
    f.preprocessor_fingerprint = r.u64();
    const auto n_id = r.u32();
    for (std::uint32_t i = 0; i < n_id; ++i) f.identity_columns.push_back(r.str());
    if (r.u8()) f.label_column = r.str();
    const auto rows = r.u64();
    f.latent = Matrix(rows, f.latent_dim);
    f.identity.resize(rows);
    for (std::uint64_t row = 0; row < rows; ++row) {
        for (std::uint32_t i = 0; i < n_id; ++i) f.identity[row].push_back(r.str());
        for (double& v : f.latent.row(row)) v = f.width_bytes == 4 ? static_cast<double>(r.f32()) : r.f64();
        if (f.label_column) f.labels.push_back(r.str());
    }
    if (!r.at_end()) throw FormatError("trailing bytes after latent payload");
    return f;
}

void save_latent(const LatentFile& file, const std::filesystem::path& path) {
    io::write_file_atomic(path, latent_to_bytes(file));
}

LatentFile load_latent(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("latent file not found: " + path.string());
    return latent_from_bytes(io::read_file(path));
}

void quantize(Matrix& m, std::size_t width_bytes) {
    if (width_bytes == 8) return;
    for (double& v : m.data()) v = static_cast<double>(static_cast<float>(v));
}

Matrix compress_features(const AutoencoderModel& model, const PreprocessorState& state, const Matrix& features,
                         std::size_t width_bytes) {
    Matrix latent = encode(model, transform(features, state));
    quantize(latent, width_bytes);
    return latent;
}

Matrix decompress_features(const AutoencoderModel& model, const PreprocessorState& state, const Matrix& latent) {
    Matrix out = inverse_transform(decode(model, latent), state);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            const bool duration = i == feature::kBiDuration || i == feature::kSrcDuration || i == feature::kDstDuration;
            if (!duration && out(r, i) < 0.0) out(r, i) = 0.0;
        }
    }
    return out;
}

Dataset load_inputs(const PipelineConfig& config) {
    if (config.inputs.empty()) throw UsageError("no input CSV configured (use --input or the config 'inputs' list)");
    const auto schema = config.resolved_schema();
    std::vector<FlowRecord> records;
    for (const auto& path : config.inputs) {
        auto part = load_csv(path, schema);
        records.insert(records.end(), part.records().begin(), part.records().end());
    }
    return Dataset(schema, std::move(records));
}

std::filesystem::path cmd_synth(const PipelineConfig& config) {
    config.validate();
    const auto specs = config.synth.spec ? load_synthetic_spec(*config.synth.spec)
                                         : default_synthetic_spec(config.synth.n_classes);
    const auto data = generate_synthetic(config.synth.n_per_class, specs, config.seed);
    ensure_output_dir(config);
    const auto path = config.out(config.synth.output_name);
    write_csv(data, path);
    return path;
}

TrainOutcome cmd_train(const PipelineConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    const Dataset data = load_inputs(config);
    const SplitIndices split = split_for(data, config);
    const Matrix features = data.feature_matrix();
    const Matrix train_raw = features.select_rows(split.train);
    const Matrix test_raw = features.select_rows(split.test);
    const auto& names = data.schema().compressible_columns;
    const PreprocessorState state =
        fit_preprocessor(config.fit_preprocessor_on == FitOn::All ? features : train_raw, names);

    TrainOutcome outcome;
    outcome.model = config.out(artifact::kModel);
    outcome.preprocessor = config.out(artifact::kPreprocessor);
    outcome.history_csv = config.out(artifact::kHistory);
    ensure_output_dir(config);

    TrainResult result;
    try {
        result = train_autoencoder(transform(train_raw, state), transform(test_raw, state), config.train_config(), names,
                                   state.fingerprint(), on_epoch);
    } catch (const DivergenceError&) {
        for (const auto& p : {outcome.model, outcome.preprocessor, outcome.history_csv}) std::filesystem::remove(p);
        throw;
    }
    save_preprocessor(state, outcome.preprocessor);
    save_model(result.model, outcome.model);
    io::write_file_atomic(outcome.history_csv, history_to_csv(result.history));
    outcome.history = std::move(result.history);
    return outcome;
}

LoadedModel load_model_pair(const std::filesystem::path& model_path, const std::filesystem::path& preprocessor_path,
                            bool force) {
    if (!std::filesystem::exists(preprocessor_path)) throw DataError("preprocessor file not found: " + preprocessor_path.string());
    LoadedModel out{load_model(model_path), load_preprocessor(preprocessor_path), {}};
    if (auto warning = fingerprint_warning(out.model, out.state)) {
        if (!force) throw UsageError(*warning + " (use --force to proceed)");
        out.warnings.push_back(*warning);
    }
    return out;
}

std::filesystem::path cmd_compress(const PipelineConfig& config, const std::filesystem::path& input,
                                   const std::filesystem::path& model_path,
                                   const std::filesystem::path& preprocessor_path,
                                   const std::filesystem::path& output) {
    config.validate();
    const auto loaded = load_model_pair(model_path, preprocessor_path, config.force);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    const Dataset data = load_csv(input, config.resolved_schema());

    LatentFile file;
    file.width_bytes = static_cast<std::uint32_t>(config.metrics.latent_width_bytes);
    file.preprocessor_fingerprint = loaded.state.fingerprint();
    file.identity_columns = data.schema().identity_columns;
    if (data.labeled()) file.label_column = data.schema().label_column;
    file.latent = compress_features(loaded.model, loaded.state, data.feature_matrix(), file.width_bytes);
    for (const auto& rec : data.records()) {
        std::vector<std::string> cells;
        for (const auto& c : file.identity_columns) cells.push_back(rec.identity.at(c));
        file.identity.push_back(std::move(cells));
        if (file.label_column) file.labels.push_back(*rec.label);
    }
    if (!output.parent_path().empty()) std::filesystem::create_directories(output.parent_path());
    save_latent(file, output);
    return output;
}

std::filesystem::path cmd_decompress(const PipelineConfig& config, const std::filesystem::path& latent_path,
                                     const std::filesystem::path& model_path,
                                     const std::filesystem::path& preprocessor_path,
                                     const std::filesystem::path& output) {
    config.validate();
    const auto loaded = load_model_pair(model_path, preprocessor_path, config.force);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    const LatentFile file = load_latent(latent_path);
    if (file.preprocessor_fingerprint != loaded.state.fingerprint() && !config.force) {
        throw UsageError("latent file was produced with a different preprocessor (use --force to proceed)");
    }
    const Matrix features = decompress_features(loaded.model, loaded.state, file.latent);

    FeatureSchema schema;
    schema.identity_columns = file.identity_columns;
    schema.compressible_columns = loaded.model.feature_names;
    schema.label_column = file.label_column;
    std::vector<FlowRecord> records(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t c = 0; c < file.identity_columns.size(); ++c) records[r].identity[file.identity_columns[c]] = file.identity[r][c];
        std::copy(features.row(r).begin(), features.row(r).end(), records[r].features.begin());
        if (file.label_column) records[r].label = file.labels[r];
    }
    if (!output.parent_path().empty()) std::filesystem::create_directories(output.parent_path());
    write_csv(Dataset(schema, std::move(records)), output);
    return output;
}

ReconstructionReport cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& original,
                                  const std::optional<std::filesystem::path>& reconstructed,
                                  const std::filesystem::path& model_path,
                                  const std::filesystem::path& preprocessor_path) {
    config.validate();
    const auto schema = config.resolved_schema();
    const Dataset orig = load_csv(original, schema);
    const Matrix y = orig.feature_matrix();
    Matrix yhat;
    std::vector<std::string> warnings;
    if (reconstructed) {
        FeatureSchema recon_schema = schema;
        const Dataset recon = load_csv(*reconstructed, recon_schema);
        if (recon.size() != orig.size()) {
            throw DataError("reconstructed file has " + std::to_string(recon.size()) + " rows, original has " +
                            std::to_string(orig.size()));
        }
        yhat = recon.feature_matrix();
    } else {
        const auto loaded = load_model_pair(model_path, preprocessor_path, config.force);
        warnings = loaded.warnings;
        yhat = decompress_features(loaded.model, loaded.state,
                                   compress_features(loaded.model, loaded.state, y, config.metrics.latent_width_bytes));
    }
    auto report = build_reconstruction_report(y, yhat, schema.compressible_columns, config.metrics);
    report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());

    ensure_output_dir(config);
    io::write_file_atomic(config.out(artifact::kReconstructionReport), report_to_json(report));
    io::write_file_atomic(config.out(artifact::kFeatureTable), feature_table_csv(report));
    io::write_file_atomic(config.out(artifact::kCorrelationDifference), correlation_difference_csv(report));
    io::write_file_atomic(config.out(artifact::kRowErrors), row_relative_errors_csv(y, yhat, schema.compressible_columns));
    return report;
}

namespace {

struct ArmData {
    Matrix train, test;
};

ArmData arm_features(const PipelineConfig& config, const Dataset& data, const SplitIndices& split, FeatureSource source,
                     std::vector<std::string>& warnings) {
    Matrix features = data.feature_matrix();
    if (source == FeatureSource::Compressed) {
        const auto model_path = config.out(artifact::kModel);
        const auto prep_path = config.out(artifact::kPreprocessor);
        if (!std::filesystem::exists(model_path)) throw DataError("compressed arm needs a trained model: " + model_path.string());
        const auto loaded = load_model_pair(model_path, prep_path, config.force);
        warnings = loaded.warnings;
        features = compress_features(loaded.model, loaded.state, features, config.metrics.latent_width_bytes);
    }
    return {features.select_rows(split.train), features.select_rows(split.test)};
}

std::vector<int> pick(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels[i]);
    return out;
}

ClassificationReport run_arm(const PipelineConfig& config, const Dataset& data, const SplitIndices& split,
                             FeatureSource source) {
    std::vector<std::string> warnings;
    const ArmData arm = arm_features(config, data, split, source, warnings);
    const auto y_train = pick(data.labels(), split.train);
    const auto y_test = pick(data.labels(), split.test);
    const ForestModel forest = fit_forest(arm.train, y_train, data.class_names(), config.forest, config.seed);
    auto report = score(y_test, predict(forest, arm.test), data.class_names());
    report.notes.insert(report.notes.end(), warnings.begin(), warnings.end());

    const std::string tag = source == FeatureSource::Original ? "original" : "compressed";
    ensure_output_dir(config);
    save_forest(forest, config.out("forest_" + tag + ".json"));
    io::write_file_atomic(config.out("classification_" + tag + ".json"), classification_to_json(report));
    io::write_file_atomic(config.out("classification_" + tag + ".txt"), classification_text(report));
    io::write_file_atomic(config.out("confusion_" + tag + ".csv"), confusion_csv(report, false));
    io::write_file_atomic(config.out("confusion_" + tag + "_normalized.csv"), confusion_csv(report, true));
    return report;
}

}  // namespace

ClassificationReport cmd_classify(const PipelineConfig& config, FeatureSource source) {
    config.validate();
    const Dataset data = load_inputs(config);
    require_labels(data);
    return run_arm(config, data, stratified_split(data, config.test_fraction, config.seed), source);
}

ComparisonReport cmd_compare(const PipelineConfig& config) {
    config.validate();
    const Dataset data = load_inputs(config);
    require_labels(data);
    const SplitIndices split = stratified_split(data, config.test_fraction, config.seed);
    const auto original = run_arm(config, data, split, FeatureSource::Original);
    const auto compressed = run_arm(config, data, split, FeatureSource::Compressed);
    auto comparison = compare(original, compressed);
    io::write_file_atomic(config.out(artifact::kComparison), comparison_to_json(comparison));
    io::write_file_atomic(config.out(artifact::kComparisonText), comparison_text(comparison));
    return comparison;
}

}  // namespace flowae::pipeline
