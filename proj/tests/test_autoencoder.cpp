#include "flowae/autoencoder.hpp"
#include "flowae/error.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace flowae;

namespace {

Matrix small_standardized(std::size_t rows, std::uint64_t seed) {
    const Matrix raw = testing::low_rank_matrix(rows, seed);
    const auto state = fit_preprocessor(raw);
    return transform(raw, state);
}

TrainConfig quick_config(int epochs) {
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.batch_size = 32;
    return cfg;
}

}  // namespace

TEST_CASE("plateau scheduler halves after patience flat epochs") {
    PlateauScheduler s(0.001, 0.5, 5, 1e-6, 1e-6);
    std::vector<double> lrs;
    CHECK_FALSE(s.step(1.0));
    for (int e = 0; e < 12; ++e) {
        s.step(1.0);
        lrs.push_back(s.learning_rate());
    }
    // Reductions after the 5th and 10th non-improving epochs.
    CHECK(lrs[3] == 0.001);
    CHECK(lrs[4] == 0.0005);
    CHECK(lrs[8] == 0.0005);
    CHECK(lrs[9] == 0.00025);
    CHECK(s.reductions() == 2);
}

TEST_CASE("plateau scheduler treats sub-threshold gains as flat and respects min_lr") {
    PlateauScheduler s(0.001, 0.5, 2, 1e-6, 0.0004);
    double loss = 1.0;
    s.step(loss);
    for (int e = 0; e < 2; ++e) s.step(loss -= 1e-7);
    CHECK(s.learning_rate() == 0.0005);
    for (int e = 0; e < 2; ++e) s.step(loss);
    CHECK(s.learning_rate() == 0.0004);
    for (int e = 0; e < 4; ++e) s.step(loss);
    CHECK(s.learning_rate() == 0.0004);
    // A real improvement resets the counter.
    s.step(0.5);
    CHECK(s.learning_rate() == 0.0004);
}

TEST_CASE("early stopping fires at best_epoch + patience") {
    EarlyStopping stop(20, 1e-6);
    int fired = -1;
    for (int epoch = 1; epoch <= 100; ++epoch) {
        const double loss = epoch <= 7 ? 1.0 / epoch : 0.5;
        if (stop.step(epoch, loss)) {
            fired = epoch;
            break;
        }
    }
    CHECK(stop.best_epoch() == 7);
    CHECK(fired == 27);
}

TEST_CASE("make_autoencoder architecture") {
    const auto m = make_autoencoder(42);
    REQUIRE(m.layers.size() == 6);
    for (std::size_t l = 0; l < 6; ++l) {
        CHECK(m.layers[l].in_dim() == kAutoencoderDims[l]);
        CHECK(m.layers[l].out_dim() == kAutoencoderDims[l + 1]);
        CHECK(m.layers[l].activated == kAutoencoderActivations[l]);
    }
    CHECK(m.feature_names.size() == kNumFeatures);
}

TEST_CASE("encode and decode shapes, composition and width errors") {
    const auto m = make_autoencoder(3);
    const Matrix x = testing::random_matrix(7, 21, 4);
    const Matrix z = encode(m, x);
    CHECK(z.rows() == 7);
    CHECK(z.cols() == 16);
    const Matrix y = decode(m, z);
    CHECK(y.cols() == 21);
    CHECK(y == forward(m.layers, m.slope, x));
    CHECK(encode(m, x) == z);  // pure

    // Latent goes through LeakyReLU: negative entries are slope-scaled pre-activations.
    const Matrix pre = forward(std::span(m.layers).first(3).first(2), m.slope, x);
    Matrix manual(7, 16);
    const auto& l = m.layers[2];
    for (std::size_t r = 0; r < 7; ++r) {
        for (std::size_t o = 0; o < 16; ++o) {
            double s = l.bias[o];
            for (std::size_t k = 0; k < 64; ++k) s += l.weights(o, k) * pre(r, k);
            manual(r, o) = s > 0 ? s : 0.2 * s;
        }
    }
    for (std::size_t i = 0; i < manual.size(); ++i) CHECK(std::abs(manual.data()[i] - z.data()[i]) < 1e-12);

    const Matrix zero_out = decode(m, Matrix(3, 16));
    for (std::size_t r = 1; r < 3; ++r) {
        for (std::size_t c = 0; c < 21; ++c) CHECK(zero_out(r, c) == zero_out(0, c));
    }
    CHECK_THROWS_AS(encode(m, Matrix(2, 20)), DataError);
    CHECK_THROWS_AS(decode(m, Matrix(2, 21)), DataError);
}

TEST_CASE("training is deterministic and records a full history") {
    const Matrix train = small_standardized(300, 1);
    const Matrix test = small_standardized(80, 2);
    const auto cfg = quick_config(4);
    std::vector<int> seen;
    const auto a = train_autoencoder(train, test, cfg, {}, 99, [&](const EpochRecord& r) { seen.push_back(r.epoch); });
    const auto b = train_autoencoder(train, test, cfg, {}, 99);
    CHECK(model_to_bytes(a.model) == model_to_bytes(b.model));
    CHECK(seen == std::vector<int>{1, 2, 3, 4});
    REQUIRE(a.history.epochs.size() == 4);
    CHECK(a.history.epochs[0].learning_rate == 0.001);
    CHECK(a.history.epochs.back().test_loss < a.history.epochs.front().test_loss);
    CHECK(a.model.preprocessor_fingerprint == 99);
    CHECK(reconstruction_loss(a.model, test, 1.0) == a.history.best_test_loss);

    auto other = cfg;
    other.seed = 7;
    CHECK(model_to_bytes(train_autoencoder(train, test, other).model) != model_to_bytes(a.model));
}

TEST_CASE("training honours the early-stopping bound and restores the best snapshot") {
    const Matrix train = small_standardized(200, 3);
    const Matrix test = small_standardized(50, 4);
    auto cfg = quick_config(60);
    cfg.learning_rate = 0.05;  // noisy so that the test loss stalls
    cfg.early_stop_patience = 3;
    cfg.plateau_patience = 2;
    const auto r = train_autoencoder(train, test, cfg);
    const auto& h = r.history;
    CHECK(static_cast<int>(h.epochs.size()) <= h.best_epoch + cfg.early_stop_patience + 1);
    double best = INFINITY;
    for (const auto& e : h.epochs) best = std::min(best, e.test_loss);
    CHECK(h.best_test_loss == best);
    CHECK(reconstruction_loss(r.model, test, 1.0) == best);
}

TEST_CASE("training errors") {
    const Matrix ok = small_standardized(20, 5);
    CHECK_THROWS_AS(train_autoencoder(Matrix(0, 21), ok, quick_config(1)), DataError);
    CHECK_THROWS_AS(train_autoencoder(ok, Matrix(3, 20), quick_config(1)), DataError);
    Matrix bad = ok;
    bad(0, 0) = NAN;
    CHECK_THROWS_AS(train_autoencoder(bad, ok, quick_config(1)), DataError);

    auto wild = quick_config(5);
    wild.learning_rate = 1e200;
    Matrix big = ok;
    for (double& v : big.data()) v *= 1e3;
    try {
        train_autoencoder(big, big, wild);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() >= 1);
    }
}

TEST_CASE("model save/load is bit-exact and validated") {
    auto m = make_autoencoder(11);
    m.preprocessor_fingerprint = 0xABCDEF;
    const auto dir = testing::scratch_dir("ae_model");
    save_model(m, dir / "model.bin");
    const auto back = load_model(dir / "model.bin");
    CHECK(model_to_bytes(back) == model_to_bytes(m));
    CHECK(back.preprocessor_fingerprint == 0xABCDEF);
    const Matrix x = testing::random_matrix(5, 21, 12);
    CHECK(forward(back.layers, back.slope, x) == forward(m.layers, m.slope, x));

    const std::string bytes = model_to_bytes(m);
    CHECK_THROWS_AS(model_from_bytes(bytes.substr(0, bytes.size() - 3)), FormatError);
    CHECK_THROWS_AS(model_from_bytes(bytes + "x"), FormatError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(model_from_bytes(bad_magic), FormatError);
    std::string bad_version = bytes;
    bad_version[8] = 9;
    CHECK_THROWS_AS(model_from_bytes(bad_version), FormatError);
    CHECK_THROWS(load_model(dir / "missing.bin"));
}

TEST_CASE("fingerprint warning") {
    const Matrix raw = testing::low_rank_matrix(50, 13);
    const auto state = fit_preprocessor(raw);
    auto m = make_autoencoder(1);
    m.preprocessor_fingerprint = state.fingerprint();
    CHECK_FALSE(fingerprint_warning(m, state).has_value());
    m.preprocessor_fingerprint ^= 1;
    CHECK(fingerprint_warning(m, state).has_value());
}

TEST_CASE("history csv") {
    TrainingHistory h;
    h.epochs.push_back({1, 0.5, 0.25, 0.001, 0.0});
    CHECK(history_to_csv(h) == "epoch,train_loss,test_loss,lr\n1,0.5,0.25,0.001\n");
}
