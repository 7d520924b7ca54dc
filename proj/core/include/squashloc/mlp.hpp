#pragma once

#include "squashloc/error.hpp"
#include "squashloc/features.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace squashloc {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Fully connected binary classifier: hidden layers use `hidden`, the single
/// output unit is squashed by the logistic function into a confidence.
struct MlpModel {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., 1
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::relu;
  Normalization normalization = Normalization::none;

  /// All-zero weights (output is exactly 0.5 everywhere).
  static MlpModel zeros(std::vector<std::size_t> layer_sizes);
  /// He-initialized hidden layers, deterministic for `seed`.
  static MlpModel initialized(std::vector<std::size_t> layer_sizes, std::uint64_t seed,
                              Activation hidden = Activation::relu);

  std::size_t input_size() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  std::size_t parameter_count() const;

  /// Pre-sigmoid output for an already normalized input.
  double logit(std::span<const double> x) const;
  /// Confidence in [0, 1]; applies `normalization` first. Throws DataError on
  /// an input of the wrong size.
  double predict(std::span<const double> x) const;
};

double predict(const MlpModel& model, const FeatureVector& x);

struct TrainHyper {
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean cross-entropy after each epoch
};

class DivergenceError : public NumericalError {
 public:
  explicit DivergenceError(std::size_t epoch)
      : NumericalError("training diverged (NaN loss) at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

class DegenerateLabelsError : public DataError {
 public:
  using DataError::DataError;
};

/// Mini-batch gradient descent on binary cross-entropy. Labels are 0/1.
/// Returns the lowest-training-loss weights seen (initialization included),
/// so the final loss never exceeds the initial one.
MlpModel train_binary(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                      std::span<const std::size_t> hidden_layers, const TrainHyper& hyper,
                      Normalization normalization = Normalization::none,
                      Activation activation = Activation::relu, TrainHistory* history = nullptr);

}  // namespace squashloc
