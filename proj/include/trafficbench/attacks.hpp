#ifndef TRAFFICBENCH_ATTACKS_HPP
#define TRAFFICBENCH_ATTACKS_HPP

#include <optional>
#include <vector>

#include "trafficbench/classifier.hpp"
#include "trafficbench/neural.hpp"

namespace tb {

/// Optional per-feature clamp applied to attack iterates. Off by default:
/// z-scored flow features have no universal valid range.
struct FeatureBounds {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct PgdConfig {
    double epsilon = 0.3;  // L-inf budget in scaled-feature units
    double alpha = 0.05;   // step size, <= epsilon (irrelevant when epsilon == 0)
    std::size_t iterations = 40;
    bool random_start = true;
    std::uint64_t seed = 0;
    std::optional<FeatureBounds> clamp;
};

struct DeepFoolConfig {
    std::size_t max_iterations = 50;
    double overshoot = 0.02;
    std::optional<FeatureBounds> clamp;
};

struct ZooConfig {
    double h = 1e-4;          // central-difference step
    double step_size = 0.01;  // coordinate-descent step
    std::size_t iterations = 200;
    std::size_t coords_per_iter = 1;
    double confidence_kappa = 0.0;
    std::uint64_t seed = 0;
    std::optional<FeatureBounds> clamp;
};

/// Per-sample outcome of an attack run. success means the model's predicted
/// label changed relative to the clean input. queries counts model
/// evaluations for ZOO (2 per coordinate estimate + 1 per iteration check);
/// it is 0 for the gradient attacks.
struct AttackResult {
    Matrix adversarial;  // N x D
    std::vector<std::uint8_t> success;
    std::vector<double> linf_norms;
    std::vector<double> l2_norms;
    std::vector<std::uint64_t> queries;
};

/// Untargeted PGD: iterated loss-gradient sign steps projected back into the
/// L-inf epsilon ball around each clean input. Requires gradient support.
AttackResult attack_pgd(const Classifier& model, const Dataset& data, const PgdConfig& cfg);
AttackResult attack_pgd_serial(const Classifier& model, const Dataset& data, const PgdConfig& cfg);

/// DeepFool: walks toward the nearest linearized decision boundary until the
/// prediction flips, then overshoots the accumulated step. Requires gradients.
AttackResult attack_deepfool(const Classifier& model, const Dataset& data,
                             const DeepFoolConfig& cfg);
AttackResult attack_deepfool_serial(const Classifier& model, const Dataset& data,
                                    const DeepFoolConfig& cfg);

/// ZOO: black-box coordinate descent on the log-probability margin, gradients
/// estimated from paired predict_proba queries. Never touches the gradient
/// interface.
AttackResult attack_zoo(const Classifier& model, const Dataset& data, const ZooConfig& cfg);
AttackResult attack_zoo_serial(const Classifier& model, const Dataset& data, const ZooConfig& cfg);

/// Central difference (f(x+h) - f(x-h)) / 2h; the estimator at the core of ZOO.
template <class F>
double central_difference(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Label-distillation surrogate: an mlp trained to reproduce the target's
/// predicted labels, giving PGD/DeepFool a gradient pathway against
/// non-differentiable targets. Crafted samples are then scored against the
/// original target (transfer attack).
struct SurrogateModel {
    NeuralModel model;
    double agreement = 0.0;       // label agreement with the target on the training rows
    bool low_agreement = false;   // true when agreement < 0.6
};

SurrogateModel train_surrogate(const Classifier& target, const Dataset& train,
                               const TrainConfig& cfg);

/// Recomputes success flags of a crafted result against a (possibly
/// different) target model. Norms and queries are left untouched.
void rescore_success(AttackResult& result, const Classifier& target, const Matrix& clean);

/// Directory serialization: adversarial.csv + meta.jsonl (one JSON object per
/// sample: index, success, linf, l2, queries).
void write_attack_result(const AttackResult& result, const Dataset& clean,
                         const std::filesystem::path& dir);

}  // namespace tb

#endif
