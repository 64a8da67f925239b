#include "trafficbench/metrics.hpp"

#include <numeric>

namespace tb {

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

namespace {

ConfusionMatrix confusion_impl(const Classifier& model, const Dataset& data, bool parallel) {
    if (data.n_rows() == 0) throw tb_error("confusion: empty dataset");
    if (data.n_features() != model.n_features()) throw tb_error("confusion: dimension mismatch");
    std::vector<int> pred(data.n_rows(), 0);
    parallel_for(data.n_rows(), parallel, [&](std::size_t i) {
        pred[i] = argmax_class(model.predict_proba(data.features.row(i)));
    });
    ConfusionMatrix cm(std::max(data.n_classes(), model.n_classes()));
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        ++cm.at(static_cast<std::size_t>(data.labels[i]), static_cast<std::size_t>(pred[i]));
    return cm;
}

}  // namespace

ConfusionMatrix confusion(const Classifier& model, const Dataset& data) {
    return confusion_impl(model, data, true);
}

ConfusionMatrix confusion_serial(const Classifier& model, const Dataset& data) {
    return confusion_impl(model, data, false);
}

EvalReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw tb_error("metrics: empty confusion matrix");
    EvalReport r;
    r.confusion = cm;
    r.per_class.resize(cm.n_classes);
    std::uint64_t correct = 0;
    for (std::size_t c = 0; c < cm.n_classes; ++c) {
        const auto tp = cm.at(c, c);
        std::uint64_t row_sum = 0, col_sum = 0;
        for (std::size_t k = 0; k < cm.n_classes; ++k) {
            row_sum += cm.at(c, k);
            col_sum += cm.at(k, c);
        }
        const auto fp = col_sum - tp;
        const auto fn = row_sum - tp;
        ClassMetrics& m = r.per_class[c];
        m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        correct += tp;
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
    }
    const auto c = static_cast<double>(cm.n_classes);
    r.macro_precision /= c;
    r.macro_recall /= c;
    r.macro_f1 /= c;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(cm.total());
    return r;
}

}  // namespace tb
