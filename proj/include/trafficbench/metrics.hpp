#ifndef TRAFFICBENCH_METRICS_HPP
#define TRAFFICBENCH_METRICS_HPP

#include <vector>

#include "trafficbench/classifier.hpp"

namespace tb {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::uint64_t> counts;  // n_classes x n_classes, row-major

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t c) : n_classes(c), counts(c * c, 0) {}

    std::uint64_t& at(std::size_t true_c, std::size_t pred_c) {
        return counts[true_c * n_classes + pred_c];
    }
    std::uint64_t at(std::size_t true_c, std::size_t pred_c) const {
        return counts[true_c * n_classes + pred_c];
    }
    std::uint64_t total() const;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Per class: P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R), each 0 when its
/// denominator is 0. Macro values are unweighted class means.
struct EvalReport {
    ConfusionMatrix confusion;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
};

ConfusionMatrix confusion(const Classifier& model, const Dataset& data);
ConfusionMatrix confusion_serial(const Classifier& model, const Dataset& data);

EvalReport metrics(const ConfusionMatrix& cm);

}  // namespace tb

#endif
