#ifndef TRAFFICBENCH_NEURAL_HPP
#define TRAFFICBENCH_NEURAL_HPP

#include <string>
#include <vector>

#include "trafficbench/classifier.hpp"

namespace tb {

enum class NeuralKind { mlp, cnn1d, rnn };

std::string to_string(NeuralKind kind);

struct TrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
};

struct DenseLayer {
    Matrix w;  // out x in
    std::vector<double> b;
};

struct ConvLayer {
    std::size_t out_ch = 0, in_ch = 0, kernel = 3;
    std::vector<double> w;  // [out_ch][in_ch][kernel]
    std::vector<double> b;
    double at(std::size_t f, std::size_t c, std::size_t k) const {
        return w[(f * in_ch + c) * kernel + k];
    }
};

struct RecurrentLayer {
    Matrix wx;  // hidden x in
    Matrix wh;  // hidden x hidden
    std::vector<double> b;
};

/// Feed-forward nets trained by mini-batch SGD on categorical cross-entropy.
///   mlp   : dense 180 relu -> dense 160 relu -> dense C softmax
///   cnn1d : conv(84, k=3, same) relu -> conv(64, k=3, same) relu -> flatten -> dense C
///   rnn   : simple recurrent 84 tanh -> recurrent 64 tanh -> last state -> dense C
/// cnn1d and rnn read the D features as a length-D sequence of width 1.
/// All arithmetic is 64-bit; training is single-threaded and seed-determined.
class NeuralModel final : public Classifier {
public:
    NeuralKind kind = NeuralKind::mlp;
    std::size_t input_dim = 0;
    std::size_t out_classes = 0;

    std::vector<DenseLayer> dense;     // mlp hidden stack
    std::vector<ConvLayer> conv;       // cnn1d stack
    std::vector<RecurrentLayer> rec;   // rnn stack
    DenseLayer head;

    std::size_t n_features() const override { return input_dim; }
    std::size_t n_classes() const override { return out_classes; }
    std::vector<double> predict_proba(std::span<const double> x) const override;
    bool has_gradients() const override { return true; }
    Matrix grad_logits(std::span<const double> x) const override;
    std::vector<double> grad_loss(std::span<const double> x, int label) const override;

    std::vector<double> logits(std::span<const double> x) const;
};

/// Glorot-uniform initialized model with the stock layer sizes for `kind`.
NeuralModel init_neural(NeuralKind kind, std::size_t input_dim, std::size_t n_classes,
                        std::uint64_t seed);

struct TrainTrace {
    std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

NeuralModel train_neural(const Dataset& train, NeuralKind kind, const TrainConfig& cfg,
                         TrainTrace* trace = nullptr);

/// Continues SGD on an existing model (used for distillation fixtures).
void train_neural_inplace(NeuralModel& model, const Matrix& x, const std::vector<int>& y,
                          const TrainConfig& cfg, TrainTrace* trace = nullptr);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace tb

#endif
