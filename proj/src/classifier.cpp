#include "trafficbench/classifier.hpp"

namespace tb {

Matrix Classifier::grad_logits(std::span<const double>) const {
    throw not_differentiable("model kind does not expose input gradients");
}

std::vector<double> Classifier::grad_loss(std::span<const double>, int) const {
    throw not_differentiable("model kind does not expose input gradients");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::c45: return "c45";
        case ModelKind::knn: return "knn";
        case ModelKind::mlp: return "mlp";
        case ModelKind::cnn1d: return "cnn1d";
        case ModelKind::rnn: return "rnn";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "c45") return ModelKind::c45;
    if (name == "knn") return ModelKind::knn;
    if (name == "mlp") return ModelKind::mlp;
    if (name == "cnn1d") return ModelKind::cnn1d;
    if (name == "rnn") return ModelKind::rnn;
    throw tb_error("unknown model kind '" + name + "'");
}

int argmax_class(std::span<const double> proba) {
    int best = 0;
    for (std::size_t c = 1; c < proba.size(); ++c)
        if (proba[c] > proba[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

namespace {

std::vector<int> predict_labels_impl(const Classifier& model, const Matrix& rows, bool parallel) {
    std::vector<int> out(rows.rows, 0);
    parallel_for(rows.rows, parallel,
                 [&](std::size_t i) { out[i] = argmax_class(model.predict_proba(rows.row(i))); });
    return out;
}

}  // namespace

std::vector<int> predict_labels(const Classifier& model, const Matrix& rows) {
    return predict_labels_impl(model, rows, true);
}

std::vector<int> predict_labels_serial(const Classifier& model, const Matrix& rows) {
    return predict_labels_impl(model, rows, false);
}

}  // namespace tb
