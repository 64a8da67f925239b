#ifndef TRAFFICBENCH_TREE_HPP
#define TRAFFICBENCH_TREE_HPP

#include <vector>

#include "trafficbench/classifier.hpp"

namespace tb {

/// C4.5-style binary decision tree for continuous features: gain-ratio
/// splits at midpoints of adjacent observed values, Laplace-smoothed leaf
/// distributions, no pruning.
class TreeModel final : public Classifier {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;   // x[feature] <= threshold
        int right = -1;  // x[feature] >  threshold
        std::vector<double> proba;  // leaf class distribution, sums to 1
    };

    std::vector<Node> nodes;  // nodes[0] is the root
    std::size_t min_leaf = 2;

    std::size_t n_features() const override { return n_features_; }
    std::size_t n_classes() const override { return n_classes_; }
    std::vector<double> predict_proba(std::span<const double> x) const override;

    std::size_t depth() const;
    std::size_t leaf_count() const;

    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
};

TreeModel train_tree(const Dataset& train, std::size_t min_leaf = 2);

}  // namespace tb

#endif
