#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "trafficbench/knn.hpp"

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

TEST_CASE("knn k=1: a stored point is its own nearest neighbor") {
    SyntheticSpec spec;
    spec.n_per_class = 30;
    spec.n_classes = 3;
    spec.n_informative = 2;
    spec.seed = 7;
    Dataset ds = generate_synthetic(spec);
    KnnModel m = train_knn(ds, 1);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        auto p = m.predict_proba(ds.features.row(i));
        CHECK(p[static_cast<std::size_t>(ds.labels[i])] == doctest::Approx(1.0));
    }
}

TEST_CASE("knn k=N on balanced labels returns the uniform vector") {
    Dataset ds = make_dataset({{0, 0}, {1, 1}, {10, 10}, {11, 11}}, {0, 0, 1, 1}, 2);
    KnnModel m = train_knn(ds, 4);
    auto p = m.predict_proba(std::vector<double>{5.0, 5.0});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("knn k=3 matches an exhaustive distance sort on hand-placed points") {
    const std::vector<std::vector<double>> pts = {{0, 0},  {1, 0},   {0, 1},  {5, 5},
                                                  {5, 6},  {6, 5},   {-3, 0}, {0, -3},
                                                  {2, 2},  {4, 4.5}};
    const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 0, 0, 1, 1};
    Dataset ds = make_dataset(pts, labels, 2);
    KnnModel m = train_knn(ds, 3);

    const std::vector<std::vector<double>> queries = {{0.2, 0.1}, {5, 5.2}, {3, 3}, {-1, -1}};
    for (const auto& q : queries) {
        // oracle: full sort by (distance^2, index)
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double d2 = 0;
            for (std::size_t j = 0; j < 2; ++j) d2 += (q[j] - pts[i][j]) * (q[j] - pts[i][j]);
            d.push_back({d2, i});
        }
        std::sort(d.begin(), d.end());
        double votes[2] = {0, 0};
        for (int n = 0; n < 3; ++n) votes[static_cast<std::size_t>(labels[d[n].second])] += 1.0 / 3.0;

        auto p = m.predict_proba(q);
        CHECK(p[0] == doctest::Approx(votes[0]));
        CHECK(p[1] == doctest::Approx(votes[1]));
    }
}

TEST_CASE("knn vote ties resolve to the smallest class index downstream") {
    Dataset ds = make_dataset({{0, 0}, {2, 0}}, {1, 0}, 2);
    KnnModel m = train_knn(ds, 2);
    auto p = m.predict_proba(std::vector<double>{1.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(argmax_class(p) == 0);
}

TEST_CASE("train_knn validates k") {
    Dataset ds = make_dataset({{0}, {1}}, {0, 1}, 2);
    CHECK_THROWS_AS(train_knn(ds, 0), tb_error);
    CHECK_THROWS_AS(train_knn(ds, 3), tb_error);
    CHECK_NOTHROW(train_knn(ds, 2));
}

TEST_CASE("knn k=1 is perfect on its own training set when rows are distinct") {
    SyntheticSpec spec;
    spec.n_per_class = 100;
    spec.n_classes = 2;
    spec.n_informative = 3;
    spec.seed = 19;
    Dataset ds = generate_synthetic(spec);
    KnnModel m = train_knn(ds, 1);
    std::vector<int> pred = predict_labels(m, ds.features);
    CHECK(pred == ds.labels);
}
