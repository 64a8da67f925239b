#ifndef TRAFFICBENCH_CLASSIFIER_HPP
#define TRAFFICBENCH_CLASSIFIER_HPP

#include <memory>
#include <span>
#include <vector>

#include "trafficbench/core.hpp"
#include "trafficbench/dataset.hpp"

namespace tb {

struct not_differentiable : tb_error {
    using tb_error::tb_error;
};

/// Uniform query surface shared by every trained model. predict_proba is the
/// only capability black-box attacks may use; gradient queries are available
/// where has_gradients() is true. Trained models are immutable, so all
/// queries are const and safe to issue concurrently.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::size_t n_features() const = 0;
    virtual std::size_t n_classes() const = 0;

    /// Length-C vector, entries >= 0, sum 1 within 1e-9.
    virtual std::vector<double> predict_proba(std::span<const double> x) const = 0;

    virtual bool has_gradients() const { return false; }

    /// Jacobian of pre-softmax logits w.r.t. the input, C x D.
    virtual Matrix grad_logits(std::span<const double> x) const;

    /// Gradient of categorical cross-entropy at (x, label) w.r.t. x.
    virtual std::vector<double> grad_loss(std::span<const double> x, int label) const;
};

/// The five classifier families under study.
enum class ModelKind { c45, knn, mlp, cnn1d, rnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// argmax with ties broken by the smallest class index.
int argmax_class(std::span<const double> proba);

/// One predicted label per row. OpenMP kernel; the serial variant is the
/// reference the tests compare against.
std::vector<int> predict_labels(const Classifier& model, const Matrix& rows);
std::vector<int> predict_labels_serial(const Classifier& model, const Matrix& rows);

}  // namespace tb

#endif
