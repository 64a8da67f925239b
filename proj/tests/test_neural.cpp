#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "trafficbench/neural.hpp"

using namespace tb;

namespace {

Dataset separable_dataset(std::size_t per_class, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n_per_class = per_class;
    spec.n_classes = 2;
    spec.n_informative = 3;
    spec.n_noise = 1;
    spec.class_separation = 6.0;
    spec.seed = seed;
    return generate_synthetic(spec);
}

// central finite difference of logit c w.r.t. input j
double fd_logit(const NeuralModel& m, std::vector<double> x, std::size_t c, std::size_t j,
                double h = 1e-5) {
    x[j] += h;
    const double up = m.logits(x)[c];
    x[j] -= 2 * h;
    const double down = m.logits(x)[c];
    return (up - down) / (2 * h);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double max_grad_rel_err(const NeuralModel& m, Rng& rng, std::size_t probes) {
    double worst = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        std::vector<double> x(m.input_dim);
        for (auto& v : x) v = rng.gaussian();
        const Matrix jac = m.grad_logits(x);
        for (std::size_t c = 0; c < m.out_classes; ++c)
            for (std::size_t j = 0; j < m.input_dim; ++j)
                worst = std::max(worst, rel_err(jac(c, j), fd_logit(m, x, c, j)));
    }
    return worst;
}

double train_accuracy(const NeuralModel& m, const Dataset& ds) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        hits += argmax_class(m.predict_proba(ds.features.row(i))) == ds.labels[i];
    return static_cast<double>(hits) / static_cast<double>(ds.n_rows());
}

bool params_bit_equal(const NeuralModel& a, const NeuralModel& b) {
    if (a.dense.size() != b.dense.size() || a.conv.size() != b.conv.size() ||
        a.rec.size() != b.rec.size())
        return false;
    for (std::size_t i = 0; i < a.dense.size(); ++i)
        if (!bit_equal(a.dense[i].w, b.dense[i].w) || !bit_equal(a.dense[i].b, b.dense[i].b))
            return false;
    for (std::size_t i = 0; i < a.conv.size(); ++i)
        if (!bit_equal(a.conv[i].w, b.conv[i].w) || !bit_equal(a.conv[i].b, b.conv[i].b))
            return false;
    for (std::size_t i = 0; i < a.rec.size(); ++i)
        if (!bit_equal(a.rec[i].wx, b.rec[i].wx) || !bit_equal(a.rec[i].wh, b.rec[i].wh) ||
            !bit_equal(a.rec[i].b, b.rec[i].b))
            return false;
    return bit_equal(a.head.w, b.head.w) && bit_equal(a.head.b, b.head.b);
}

}  // namespace

TEST_CASE("bare linear fixture: the Jacobian is exactly the weight matrix") {
    NeuralModel m;
    m.kind = NeuralKind::mlp;
    m.input_dim = 3;
    m.out_classes = 2;
    m.head.w = Matrix(2, 3);
    const double w[2][3] = {{0.5, -1.25, 2.0}, {3.0, 0.0, -0.75}};
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) m.head.w(r, c) = w[r][c];
    m.head.b = {0.1, -0.2};

    const std::vector<double> x{0.3, -0.7, 1.1};
    const Matrix jac = m.grad_logits(x);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(jac(r, c) == w[r][c]);
}

TEST_CASE("grad_logits matches central finite differences for every kind") {
    struct Case {
        NeuralKind kind;
        std::size_t dim;
    };
    for (auto [kind, dim] : {Case{NeuralKind::mlp, 7}, Case{NeuralKind::cnn1d, 6},
                             Case{NeuralKind::rnn, 5}}) {
        NeuralModel m = init_neural(kind, dim, 3, 1234);
        Rng rng(555);
        CHECK(max_grad_rel_err(m, rng, 20) < 1e-4);
    }
}

TEST_CASE("grad_loss equals the chain-rule combination within 1e-10") {
    NeuralModel m = init_neural(NeuralKind::mlp, 5, 3, 9);
    Rng rng(10);
    for (int probe = 0; probe < 10; ++probe) {
        std::vector<double> x(5);
        for (auto& v : x) v = rng.gaussian();
        const int label = static_cast<int>(rng.index(3));

        const std::vector<double> direct = m.grad_loss(x, label);
        const std::vector<double> p = m.predict_proba(x);
        const Matrix jac = m.grad_logits(x);
        for (std::size_t j = 0; j < 5; ++j) {
            double composed = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double coeff = p[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
                composed += coeff * jac(c, j);
            }
            CHECK(std::abs(direct[j] - composed) < 1e-10);
        }
    }
}

TEST_CASE("grad_loss of a saturated correct prediction is numerically zero") {
    NeuralModel m;
    m.kind = NeuralKind::mlp;
    m.input_dim = 2;
    m.out_classes = 2;
    m.head.w = Matrix(2, 2);
    m.head.w(0, 0) = 50.0;  // huge margin in favor of class 0 at x=(1,0)
    m.head.w(1, 0) = -50.0;
    m.head.b = {0.0, 0.0};
    const std::vector<double> x{1.0, 0.0};
    REQUIRE(argmax_class(m.predict_proba(x)) == 0);
    const std::vector<double> g = m.grad_loss(x, 0);
    double norm = 0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("grad_loss agrees with finite differences of the cross-entropy") {
    for (NeuralKind kind : {NeuralKind::mlp, NeuralKind::cnn1d, NeuralKind::rnn}) {
        NeuralModel m = init_neural(kind, 5, 2, 77);
        Rng rng(78);
        for (int probe = 0; probe < 5; ++probe) {
            std::vector<double> x(5);
            for (auto& v : x) v = rng.gaussian();
            const int label = static_cast<int>(rng.index(2));
            const std::vector<double> g = m.grad_loss(x, label);
            for (std::size_t j = 0; j < 5; ++j) {
                auto loss_at = [&](double delta) {
                    std::vector<double> probe_x = x;
                    probe_x[j] += delta;
                    const auto p = m.predict_proba(probe_x);
                    return -std::log(p[static_cast<std::size_t>(label)]);
                };
                const double fd = (loss_at(1e-5) - loss_at(-1e-5)) / 2e-5;
                CHECK(rel_err(g[j], fd) < 1e-4);
            }
        }
    }
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    Dataset ds = separable_dataset(60, 42);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 2024;
    for (NeuralKind kind : {NeuralKind::mlp, NeuralKind::cnn1d, NeuralKind::rnn}) {
        NeuralModel a = train_neural(ds, kind, cfg);
        NeuralModel b = train_neural(ds, kind, cfg);
        CHECK(params_bit_equal(a, b));
        std::vector<double> x{0.1, 0.2, 0.3, 0.4};
        CHECK(bit_equal(a.predict_proba(x), b.predict_proba(x)));
        CHECK(bit_equal(a.grad_loss(x, 0), b.grad_loss(x, 0)));
    }
}

TEST_CASE("zero-epoch training returns the initialization") {
    Dataset ds = separable_dataset(40, 5);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 31;
    NeuralModel trained = train_neural(ds, NeuralKind::mlp, cfg);
    NeuralModel fresh = init_neural(NeuralKind::mlp, ds.n_features(), ds.n_classes(), cfg.seed);
    CHECK(params_bit_equal(trained, fresh));
}

TEST_CASE("mlp reaches 99% training accuracy on threshold-separable data") {
    Dataset ds = separable_dataset(150, 88);

    // separability oracle first: the best single-feature threshold already
    // classifies nearly perfectly at separation 6
    std::vector<std::pair<double, int>> v(ds.n_rows());
    for (std::size_t i = 0; i < ds.n_rows(); ++i) v[i] = {ds.features(i, 0), ds.labels[i]};
    std::sort(v.begin(), v.end());
    std::size_t ones_left = 0, total_ones = 0;
    for (auto& p : v) total_ones += static_cast<std::size_t>(p.second);
    double best = 0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        ones_left += static_cast<std::size_t>(v[i].second);
        const double acc =
            static_cast<double>((i + 1 - ones_left) + (total_ones - ones_left)) /
            static_cast<double>(v.size());
        best = std::max({best, acc, 1.0 - acc});
    }
    REQUIRE(best >= 0.99);

    TrainConfig cfg;  // stock: batch 64, lr 0.01, 20 epochs
    cfg.seed = 7;
    NeuralModel m = train_neural(ds, NeuralKind::mlp, cfg);
    CHECK(train_accuracy(m, ds) >= 0.99);
}

TEST_CASE("training loss is non-increasing over smoothed 3-epoch windows") {
    Dataset ds = separable_dataset(100, 3);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.seed = 15;
    for (NeuralKind kind : {NeuralKind::mlp, NeuralKind::cnn1d, NeuralKind::rnn}) {
        TrainTrace trace;
        train_neural(ds, kind, cfg, &trace);
        REQUIRE(trace.epoch_loss.size() == 12);
        auto window = [&](std::size_t start) {
            return (trace.epoch_loss[start] + trace.epoch_loss[start + 1] +
                    trace.epoch_loss[start + 2]) /
                   3.0;
        };
        for (std::size_t s = 0; s + 5 < trace.epoch_loss.size(); s += 3)
            CHECK(window(s + 3) <= window(s) + 1e-9);
    }
}

TEST_CASE("predict_proba is a probability vector for every kind") {
    Dataset ds = separable_dataset(30, 21);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 5;
    Rng rng(61);
    for (NeuralKind kind : {NeuralKind::mlp, NeuralKind::cnn1d, NeuralKind::rnn}) {
        NeuralModel m = train_neural(ds, kind, cfg);
        for (int probe = 0; probe < 25; ++probe) {
            std::vector<double> x(ds.n_features());
            for (auto& v : x) v = 3.0 * rng.gaussian();
            const auto p = m.predict_proba(x);
            double sum = 0;
            for (double pv : p) {
                CHECK(pv >= 0.0);
                sum += pv;
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("cnn1d rejects inputs narrower than the kernel") {
    CHECK_THROWS_AS(init_neural(NeuralKind::cnn1d, 2, 2, 0), tb_error);
}

TEST_CASE("rnn over a length-5 sequence matches finite differences") {
    NeuralModel m = init_neural(NeuralKind::rnn, 5, 4, 2025);
    Rng rng(30);
    CHECK(max_grad_rel_err(m, rng, 25) < 1e-4);
}

TEST_CASE("non-finite loss reports the epoch and batch") {
    Dataset ds = separable_dataset(40, 11);
    for (auto& v : ds.features.data) v *= 1e154;  // overflow the first matvec
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 1;
    CHECK_THROWS_WITH_AS(train_neural(ds, NeuralKind::mlp, cfg), doctest::Contains("epoch"),
                         tb_error);
}
