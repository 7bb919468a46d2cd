#include "flowae/autoencoder.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"
#include "flowae/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace flowae {
namespace {

constexpr char kModelMagic[8] = {'F', 'L', 'O', 'W', 'A', 'E', 'M', '\0'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kEvalChunk = 4096;

double chunked_loss(const AutoencoderModel& model, const Matrix& rows, double delta) {
    double total = 0.0;
    for (std::size_t start = 0; start < rows.rows(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, rows.rows() - start);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix chunk = rows.select_rows(idx);
        const Matrix out = forward(model.layers, model.slope, chunk);
        total += huber_loss(chunk, out, delta) * static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(rows.size());
}

void check_width(const Matrix& m, std::size_t width, const char* what) {
    if (m.cols() != width) {
        throw DataError(std::string(what) + " expects width " + std::to_string(width) + ", got " + std::to_string(m.cols()));
    }
}

}  // namespace

AutoencoderModel make_autoencoder(std::uint64_t seed, double slope) {
    AutoencoderModel model;
    model.slope = slope;
    model.layers = init_layers(kAutoencoderDims, slope, seed,
                               std::vector<bool>(kAutoencoderActivations.begin(), kAutoencoderActivations.end()));
    model.feature_names = default_schema().compressible_columns;
    return model;
}

PlateauScheduler::PlateauScheduler(double initial_lr, double factor, int patience, double threshold, double min_lr)
    : lr_(initial_lr), factor_(factor), patience_(patience), threshold_(threshold), min_lr_(min_lr),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::step(double loss) {
    if (loss < best_ - threshold_) {
        best_ = loss;
        bad_epochs_ = 0;
        return false;
    }
    if (++bad_epochs_ < patience_) return false;
    bad_epochs_ = 0;
    const double next = std::max(lr_ * factor_, min_lr_);
    if (next >= lr_) return false;
    lr_ = next;
    ++reductions_;
    return true;
}

EarlyStopping::EarlyStopping(int patience, double threshold)
    : patience_(patience), threshold_(threshold), best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::step(int epoch, double loss) {
    if (loss < best_ - threshold_) {
        best_ = loss;
        best_epoch_ = epoch;
        return false;
    }
    return epoch - best_epoch_ >= patience_;
}

TrainResult train_autoencoder(const Matrix& train, const Matrix& test, const TrainConfig& config,
                              std::vector<std::string> feature_names, std::uint64_t preprocessor_fingerprint,
                              const EpochCallback& on_epoch) {
    config.validate();
    if (train.rows() == 0 || test.rows() == 0) throw DataError("training needs non-empty train and test matrices");
    check_width(train, kNumFeatures, "train matrix");
    check_width(test, kNumFeatures, "test matrix");
    for (const auto* m : {&train, &test}) {
        for (double v : m->data()) {
            if (!std::isfinite(v)) throw DataError("training input contains non-finite values");
        }
    }

    AutoencoderModel model = make_autoencoder(config.seed, config.slope);
    if (!feature_names.empty()) model.feature_names = std::move(feature_names);
    model.preprocessor_fingerprint = preprocessor_fingerprint;

    TrainResult result;
    result.model = model;
    auto& history = result.history;
    history.best_test_loss = std::numeric_limits<double>::infinity();

    PlateauScheduler scheduler(config.learning_rate, config.plateau_factor, config.plateau_patience,
                               config.improvement_threshold, config.min_lr);
    EarlyStopping stopper(config.early_stop_patience, config.improvement_threshold);
    Rng shuffle_rng(mix_seed(config.seed, 1));
    std::vector<std::size_t> order(train.rows());
    std::iota(order.begin(), order.end(), 0);
    std::int64_t step = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const double lr = scheduler.learning_rate();
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            const Matrix batch = train.select_rows(std::span(order).subspan(start, n));
            const ForwardCache cache = forward_cached(model.layers, model.slope, batch);
            loss_sum += huber_loss(batch, cache.output, config.huber_delta) * static_cast<double>(batch.size());
            Gradients grads = backward(model.layers, model.slope, cache,
                                       huber_gradient(batch, cache.output, config.huber_delta));
            clip_global_norm(grads, config.clip_max_norm);
            adam_step(model.layers, grads, config, ++step, lr);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.test_loss = chunked_loss(model, test, config.huber_delta);
        rec.learning_rate = lr;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.test_loss)) throw DivergenceError(epoch);
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.test_loss < history.best_test_loss) {
            history.best_test_loss = rec.test_loss;
            history.best_epoch = epoch;
            result.model = model;
        }
        scheduler.step(rec.test_loss);
        if (stopper.step(epoch, rec.test_loss)) {
            history.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    return result;
}

double reconstruction_loss(const AutoencoderModel& model, const Matrix& rows, double delta) {
    check_width(rows, kNumFeatures, "reconstruction input");
    if (rows.rows() == 0) return 0.0;
    return chunked_loss(model, rows, delta);
}

Matrix encode(const AutoencoderModel& model, const Matrix& rows) {
    check_width(rows, kNumFeatures, "encode");
    return forward(model.encoder(), model.slope, rows);
}

Matrix decode(const AutoencoderModel& model, const Matrix& latent) {
    check_width(latent, kLatentDim, "decode");
    return forward(model.decoder(), model.slope, latent);
}

std::string model_to_bytes(const AutoencoderModel& model) {
    io::ByteWriter w;
    w.raw(kModelMagic, sizeof kModelMagic);
    w.u32(kModelVersion);
    w.f64(model.slope);
    w.u64(model.preprocessor_fingerprint);
    w.u32(static_cast<std::uint32_t>(model.feature_names.size()));
    for (const auto& name : model.feature_names) w.str(name);
    w.u32(static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        w.u32(static_cast<std::uint32_t>(layer.in_dim()));
        w.u32(static_cast<std::uint32_t>(layer.out_dim()));
        w.u8(layer.activated ? 1 : 0);
    }
    for (const auto& layer : model.layers) {
        for (double v : layer.weights.data()) w.f64(v);
        for (double v : layer.bias) w.f64(v);
    }
    return w.bytes();
}

AutoencoderModel model_from_bytes(std::string_view bytes) {
    io::ByteReader r(bytes);
    char magic[sizeof kModelMagic];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kModelMagic, sizeof magic) != 0) throw FormatError("not an autoencoder model file");
    const auto version = r.u32();
    if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));

    AutoencoderModel model;
    model.slope = r.f64();
    model.preprocessor_fingerprint = r.u64();
    const auto n_names = r.u32();
    if (n_names != kNumFeatures) throw FormatError("model must name 21 input features");
    for (std::uint32_t i = 0; i < n_names; ++i) model.feature_names.push_back(r.str());
    const auto n_layers = r.u32();
    if (n_layers != kAutoencoderActivations.size()) throw FormatError("model layer count does not match the architecture");
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto in = r.u32();
        const auto out = r.u32();
        const bool act = r.u8() != 0;
        if (in != kAutoencoderDims[l] || out != kAutoencoderDims[l + 1] || act != kAutoencoderActivations[l]) {
            throw FormatError("layer " + std::to_string(l) + " dimensions do not match the architecture");
        }
        DenseLayer layer;
        layer.weights = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        layer.activated = act;
        model.layers.push_back(std::move(layer));
    }
    for (auto& layer : model.layers) {
        for (double& v : layer.weights.data()) v = r.f64();
        for (double& v : layer.bias) v = r.f64();
    }
    if (!r.at_end()) throw FormatError("trailing bytes after model payload");
    return model;
}

void save_model(const AutoencoderModel& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, model_to_bytes(model));
}

AutoencoderModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("model file not found: " + path.string());
    return model_from_bytes(io::read_file(path));
}

std::optional<std::string> fingerprint_warning(const AutoencoderModel& model, const PreprocessorState& state) {
    if (model.preprocessor_fingerprint == state.fingerprint()) return std::nullopt;
    return "preprocessor fingerprint mismatch: model was trained with " +
           std::to_string(model.preprocessor_fingerprint) + ", supplied state has " + std::to_string(state.fingerprint());
}

std::string history_to_csv(const TrainingHistory& history) {
    std::string out = "epoch,train_loss,test_loss,lr\n";
    for (const auto& e : history.epochs) {
        out += std::to_string(e.epoch) + "," + io::format_double(e.train_loss) + "," + io::format_double(e.test_loss) +
               "," + io::format_double(e.learning_rate) + "\n";
    }
    return out;
}

}  // namespace flowae
