#ifndef TRAFFICBENCH_KNN_HPP
#define TRAFFICBENCH_KNN_HPP

#include <vector>

#include "trafficbench/classifier.hpp"

namespace tb {

/// Lazy k-nearest-neighbor classifier, Euclidean distance, majority vote.
/// Distance ties are broken by the lower training-row index so queries are
/// fully deterministic.
class KnnModel final : public Classifier {
public:
    Matrix train_x;
    std::vector<int> train_y;
    std::size_t k = 5;

    std::size_t n_features() const override { return train_x.cols; }
    std::size_t n_classes() const override { return n_classes_; }
    std::vector<double> predict_proba(std::span<const double> x) const override;

    std::size_t n_classes_ = 0;
};

KnnModel train_knn(const Dataset& train, std::size_t k = 5);

}  // namespace tb

#endif
