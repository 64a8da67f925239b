#include "trafficbench/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tb {

std::vector<double> KnnModel::predict_proba(std::span<const double> x) const {
    if (x.size() != train_x.cols) throw tb_error("knn: feature dimension mismatch");
    const std::size_t n = train_x.rows;
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = train_x.row(i);
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - row[j];
            d2 += diff * diff;
        }
        dist[i] = {d2, i};
    }
    const std::size_t kk = std::min(k, n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::vector<double> proba(n_classes_, 0.0);
    const double w = 1.0 / static_cast<double>(kk);
    for (std::size_t i = 0; i < kk; ++i)
        proba[static_cast<std::size_t>(train_y[dist[i].second])] += w;
    return proba;
}

KnnModel train_knn(const Dataset& train, std::size_t k) {
    if (train.n_rows() == 0) throw tb_error("train_knn: empty dataset");
    if (k < 1 || k > train.n_rows()) throw tb_error("train_knn: k out of range");
    KnnModel m;
    m.train_x = train.features;
    m.train_y = train.labels;
    m.k = k;
    m.n_classes_ = train.n_classes();
    return m;
}

}  // namespace tb
