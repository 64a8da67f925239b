#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "trafficbench/preprocess.hpp"

using namespace tb;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                     std::size_t n_classes) {
    Dataset ds;
    ds.features = Matrix(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), ds.features.row(i).begin());
    ds.labels = labels;
    for (std::size_t j = 0; j < rows[0].size(); ++j) {
        ds.schema.feature_names.push_back("f" + std::to_string(j));
        ds.schema.feature_kinds.push_back(FeatureKind::count);
    }
    for (std::size_t c = 0; c < n_classes; ++c)
        ds.schema.class_names.push_back("c" + std::to_string(c));
    return ds;
}

}  // namespace

TEST_CASE("fit_scaler: hand-computed mean and population std") {
    Dataset ds = make_dataset({{1}, {2}, {3}}, {0, 0, 1}, 2);
    ScalerParams p = fit_scaler(ds);
    CHECK(p.mean[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(p.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    CHECK(p.constant_mask[0] == 0);
}

TEST_CASE("fit_scaler: constant column is masked") {
    Dataset ds = make_dataset({{5, 1}, {5, 2}, {5, 3}}, {0, 0, 1}, 2);
    ScalerParams p = fit_scaler(ds);
    CHECK(p.constant_mask[0] == 1);
    CHECK(p.constant_mask[1] == 0);
    Dataset scaled = apply_scaler(ds, p);
    for (std::size_t i = 0; i < 3; ++i) CHECK(scaled.features(i, 0) == 0.0);
}

TEST_CASE("apply_scaler: fitting set maps to mean 0, variance 1") {
    SyntheticSpec spec;
    spec.n_per_class = 200;
    spec.n_classes = 2;
    spec.n_informative = 4;
    spec.class_separation = 2.0;
    spec.seed = 6;
    Dataset ds = generate_synthetic(spec);
    Dataset scaled = apply_scaler(ds, fit_scaler(ds));
    for (std::size_t j = 0; j < scaled.n_features(); ++j) {
        double mean = 0, var = 0;
        for (std::size_t i = 0; i < scaled.n_rows(); ++i) mean += scaled.features(i, j);
        mean /= static_cast<double>(scaled.n_rows());
        for (std::size_t i = 0; i < scaled.n_rows(); ++i) {
            const double d = scaled.features(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(scaled.n_rows());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-9);
    }
}

TEST_CASE("apply_scaler: no leakage - test columns keep nonzero mean") {
    SyntheticSpec spec;
    spec.n_per_class = 100;
    spec.n_classes = 2;
    spec.n_informative = 1;
    spec.class_separation = 3.0;
    spec.seed = 9;
    Dataset ds = generate_synthetic(spec);
    auto [train, test] = split(ds, SplitSpec{0.8, 3, true});
    Dataset test_scaled = apply_scaler(test, fit_scaler(train));
    double mean = 0;
    for (std::size_t i = 0; i < test_scaled.n_rows(); ++i) mean += test_scaled.features(i, 0);
    mean /= static_cast<double>(test_scaled.n_rows());
    CHECK(mean != 0.0);  // generally off the training mean
}

TEST_CASE("apply_scaler: identity params and mean-row edge cases") {
    Dataset ds = make_dataset({{3, -1}, {7, 2}}, {0, 1}, 2);
    ScalerParams identity{{0, 0}, {1, 1}, {0, 0}};
    Dataset same = apply_scaler(ds, identity);
    CHECK(bit_equal(ds.features, same.features));

    ScalerParams p = fit_scaler(ds);
    Dataset mean_row = make_dataset({{5, 0.5}}, {0}, 2);
    Dataset zeroed = apply_scaler(mean_row, p);
    CHECK(zeroed.features(0, 0) == doctest::Approx(0.0));
    CHECK(zeroed.features(0, 1) == doctest::Approx(0.0));

    ScalerParams wrong{{0}, {1}, {0}};
    CHECK_THROWS_AS(apply_scaler(ds, wrong), tb_error);
}

TEST_CASE("mutual_information: independent feature stays below 0.05 nats") {
    Rng rng(123);
    const std::size_t n = 10000;
    std::vector<double> col(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        col[i] = rng.gaussian();
        labels[i] = static_cast<int>(rng.index(2));
    }
    CHECK(mutual_information(col, labels, 10) < 0.05);
}

TEST_CASE("mutual_information: label = sign(feature) approaches ln 2") {
    Rng rng(321);
    const std::size_t n = 10000;
    std::vector<double> col(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        col[i] = rng.gaussian();
        labels[i] = col[i] > 0 ? 1 : 0;
    }
    CHECK(mutual_information(col, labels, 10) ==
          doctest::Approx(std::log(2.0)).epsilon(0.03));  // within 0.02 nats
    CHECK(std::abs(mutual_information(col, labels, 10) - std::log(2.0)) < 0.02);
}

TEST_CASE("mutual_information: constant column carries no information") {
    std::vector<double> col(100, 4.2);
    std::vector<int> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<int>(i % 2);
    CHECK(mutual_information(col, labels, 10) == 0.0);
}

TEST_CASE("mutual_information: preconditions") {
    std::vector<double> col{1, 2, 3};
    std::vector<int> labels{0, 1, 0};
    CHECK_THROWS_AS(mutual_information(col, labels, 1), tb_error);
    CHECK_THROWS_AS(mutual_information(col, labels, 4), tb_error);
}

TEST_CASE("mutual_information: invariant under class relabeling") {
    Rng rng(55);
    const std::size_t n = 2000;
    std::vector<double> col(n);
    std::vector<int> labels(n), permuted(n);
    const int perm[3] = {2, 0, 1};
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng.index(3));
        col[i] = rng.gaussian() + y;
        labels[i] = y;
        permuted[i] = perm[y];
    }
    CHECK(mutual_information(col, labels, 10) ==
          doctest::Approx(mutual_information(col, permuted, 10)).epsilon(1e-12));
}

TEST_CASE("mutual_information: column against its own binning equals label entropy") {
    Rng rng(77);
    const std::size_t n = 5000, classes = 4;
    std::vector<double> col(n);
    for (auto& v : col) v = rng.gaussian();
    const std::vector<int> labels = equal_frequency_bins(col, classes);

    double h = 0.0;
    std::vector<std::size_t> counts(classes, 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    for (std::size_t c = 0; c < classes; ++c)
        if (counts[c]) {
            const double p = static_cast<double>(counts[c]) / static_cast<double>(n);
            h -= p * std::log(p);
        }
    CHECK(mutual_information(col, labels, classes) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("rank_features: planted informative feature ranks first") {
    SyntheticSpec spec;
    spec.n_per_class = 400;
    spec.n_classes = 2;
    spec.n_informative = 1;
    spec.n_noise = 3;
    spec.class_separation = 5.0;
    spec.seed = 101;
    Dataset ds = generate_synthetic(spec);
    FeatureRanking r = rank_features(ds, 10);
    CHECK(r.entries[0].feature_index == 0);
    CHECK(r.entries[0].mi_nats > 0.5);
    for (std::size_t i = 1; i < r.entries.size(); ++i)
        CHECK(r.entries[i].mi_nats <= r.entries[i - 1].mi_nats);
}

TEST_CASE("rank_features: all-noise dataset scores below 0.05 nats everywhere") {
    Rng rng(4242);
    Dataset ds = make_dataset({{0, 0}}, {0}, 2);
    const std::size_t n = 10000;
    ds.features = Matrix(n, 2);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.features(i, 0) = rng.gaussian();
        ds.features(i, 1) = rng.gaussian();
        ds.labels[i] = static_cast<int>(rng.index(2));
    }
    FeatureRanking r = rank_features(ds, 10);
    for (const auto& e : r.entries) CHECK(e.mi_nats < 0.05);
}

TEST_CASE("rank_features: parallel matches serial bit for bit") {
    SyntheticSpec spec;
    spec.n_per_class = 500;
    spec.n_classes = 3;
    spec.n_informative = 8;
    spec.n_noise = 8;
    spec.class_separation = 1.0;
    spec.seed = 3;
    Dataset ds = generate_synthetic(spec);
    FeatureRanking a = rank_features(ds, 10);
    FeatureRanking b = rank_features_serial(ds, 10);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].feature_index == b.entries[i].feature_index);
        CHECK(a.entries[i].mi_nats == b.entries[i].mi_nats);
    }
}

TEST_CASE("rank_features: invariant to strictly monotone feature transforms") {
    SyntheticSpec spec;
    spec.n_per_class = 300;
    spec.n_classes = 2;
    spec.n_informative = 2;
    spec.n_noise = 2;
    spec.class_separation = 1.5;
    spec.seed = 21;
    Dataset ds = generate_synthetic(spec);
    Dataset warped = ds;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t j = 0; j < ds.n_features(); ++j) {
            const double v = ds.features(i, j);
            warped.features(i, j) = v * v * v + 2.0 * v;  // strictly increasing
        }
    FeatureRanking a = rank_features(ds, 10);
    FeatureRanking b = rank_features(warped, 10);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].feature_index == b.entries[i].feature_index);
        CHECK(a.entries[i].mi_nats == doctest::Approx(b.entries[i].mi_nats).epsilon(1e-12));
    }
}

TEST_CASE("select_top_k: k = D is a column permutation, k = 1 the top column") {
    SyntheticSpec spec;
    spec.n_per_class = 50;
    spec.n_classes = 2;
    spec.n_informative = 1;
    spec.n_noise = 2;
    spec.class_separation = 4.0;
    spec.seed = 14;
    Dataset ds = generate_synthetic(spec);
    FeatureRanking r = rank_features(ds, 10);

    Dataset all = select_top_k(ds, r, ds.n_features());
    CHECK(all.n_features() == ds.n_features());
    for (std::size_t out_col = 0; out_col < all.n_features(); ++out_col) {
        const std::size_t src = r.entries[out_col].feature_index;
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
            CHECK(all.features(i, out_col) == ds.features(i, src));
    }

    Dataset one = select_top_k(ds, r, 1);
    CHECK(one.n_features() == 1);
    CHECK(one.schema.feature_names[0] == ds.schema.feature_names[r.entries[0].feature_index]);

    CHECK_THROWS_AS(select_top_k(ds, r, 0), tb_error);
    CHECK_THROWS_AS(select_top_k(ds, r, ds.n_features() + 1), tb_error);
}

TEST_CASE("write_ranking_csv emits the documented schema in rank order") {
    SyntheticSpec spec;
    spec.n_per_class = 60;
    spec.n_classes = 2;
    spec.n_informative = 1;
    spec.n_noise = 1;
    spec.class_separation = 6.0;
    spec.seed = 15;
    Dataset ds = generate_synthetic(spec);
    FeatureRanking r = rank_features(ds, 10);
    std::ostringstream out;
    write_ranking_csv(r, ds.schema, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "feature_index,feature_name,mi_nats");
    std::getline(in, line);
    CHECK(line.rfind("0,inf0,", 0) == 0);
}
