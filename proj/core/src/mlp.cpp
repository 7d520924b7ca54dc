#include "squashloc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace squashloc {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw DataError("unknown activation '" + std::string(s) + "'");
}

MlpModel MlpModel::zeros(std::vector<std::size_t> layer_sizes) {
  if (layer_sizes.size() < 2 || layer_sizes.back() != 1) {
    throw ConfigError("network needs an input layer and a single output unit");
  }
  MlpModel m;
  m.layer_sizes = std::move(layer_sizes);
  for (std::size_t l = 1; l < m.layer_sizes.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(m.layer_sizes[l]);
    const auto in = static_cast<Eigen::Index>(m.layer_sizes[l - 1]);
    m.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return m;
}

MlpModel MlpModel::initialized(std::vector<std::size_t> layer_sizes, std::uint64_t seed,
                               Activation hidden) {
  MlpModel m = zeros(std::move(layer_sizes));
  m.hidden = hidden;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const bool output = l + 1 == m.layers.size();
    const double gain = (output || hidden == Activation::tanh) ? 1.0 : 2.0;
    const double sd = std::sqrt(gain / static_cast<double>(layer.weights.cols()));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = sd * normal(rng);
    if (!output && hidden == Activation::relu) layer.bias.setConstant(0.01);
  }
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

namespace {

void activate(Eigen::Ref<Eigen::MatrixXd> z, Activation a) {
  if (a == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Numerically stable binary cross-entropy on a logit.
double bce(double logit, int y) {
  return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

}  // namespace

double MlpModel::logit(std::span<const double> x) const {
  if (x.size() != input_size()) {
    throw DataError("network expects " + std::to_string(input_size()) + " inputs, got " +
                    std::to_string(x.size()));
  }
  Eigen::MatrixXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * a;
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) activate(z, hidden);
    a = std::move(z);
  }
  return a(0, 0);
}

double MlpModel::predict(std::span<const double> x) const {
  if (normalization == Normalization::none) return sigmoid(logit(x));
  const auto xn = normalize(x, normalization);
  return sigmoid(logit(xn));
}

double predict(const MlpModel& model, const FeatureVector& x) { return model.predict(x.values); }

namespace {

double dataset_loss(const MlpModel& m, const Eigen::MatrixXd& x, std::span<const int> y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Eigen::VectorXd col = x.col(i);
    s += bce(m.logit(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))),
             y[static_cast<std::size_t>(i)]);
  }
  return s / static_cast<double>(x.cols());
}

}  // namespace

MlpModel train_binary(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                      std::span<const std::size_t> hidden_layers, const TrainHyper& hyper,
                      Normalization normalization, Activation activation, TrainHistory* history) {
  if (features.size() != labels.size()) throw DataError("feature/label count mismatch");
  if (features.empty()) throw DataError("empty training set");
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos + static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 0)) != labels.size()) {
    throw DataError("binary labels must be 0 or 1");
  }
  if (pos < 2 || labels.size() - pos < 2) {
    throw DegenerateLabelsError("training needs at least two examples of each binary class");
  }
  if (hyper.batch == 0) throw ConfigError("batch size must be positive");

  const std::size_t dim = features.front().size();
  const auto n = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = features[static_cast<std::size_t>(i)];
    if (f.size() != dim) throw DataError("training features have inconsistent lengths");
    const auto v = normalize(f, normalization);
    x.col(i) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(dim));
  }

  std::vector<std::size_t> sizes{dim};
  sizes.insert(sizes.end(), hidden_layers.begin(), hidden_layers.end());
  sizes.push_back(1);
  MlpModel model = MlpModel::initialized(sizes, hyper.seed, activation);

  double best_loss = dataset_loss(model, x, labels);
  if (!std::isfinite(best_loss)) throw DivergenceError(0);
  MlpModel best = model;
  if (history) {
    history->initial_loss = best_loss;
    history->epoch_loss.clear();
  }

  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t nl = model.layers.size();
  std::vector<Eigen::MatrixXd> act(nl + 1);
  std::vector<Eigen::MatrixXd> pre(nl);

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t bsz = std::min(hyper.batch, order.size() - start);
      act[0].resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(bsz));
      Eigen::VectorXd yb(static_cast<Eigen::Index>(bsz));
      for (std::size_t b = 0; b < bsz; ++b) {
        act[0].col(static_cast<Eigen::Index>(b)) = x.col(order[start + b]);
        yb(static_cast<Eigen::Index>(b)) = labels[static_cast<std::size_t>(order[start + b])];
      }
      for (std::size_t l = 0; l < nl; ++l) {
        pre[l] = model.layers[l].weights * act[l];
        pre[l].colwise() += model.layers[l].bias;
        act[l + 1] = pre[l];
        if (l + 1 < nl) activate(act[l + 1], model.hidden);
      }
      // dL/dlogit for mean cross-entropy over the batch.
      Eigen::MatrixXd delta(1, static_cast<Eigen::Index>(bsz));
      for (Eigen::Index b = 0; b < delta.cols(); ++b) {
        delta(0, b) = (sigmoid(act[nl](0, b)) - yb(b)) / static_cast<double>(bsz);
      }
      for (std::size_t l = nl; l-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * act[l].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd back = model.layers[l].weights.transpose() * delta;
          if (model.hidden == Activation::relu) {
            back = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
          } else {
            back = back.cwiseProduct((1.0 - act[l].array().square()).matrix());
          }
          delta = std::move(back);
        }
        model.layers[l].weights -= hyper.learning_rate * grad_w;
        model.layers[l].bias -= hyper.learning_rate * grad_b;
      }
    }
    const double loss = dataset_loss(model, x, labels);
    if (!std::isfinite(loss)) throw DivergenceError(epoch);
    if (history) history->epoch_loss.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = model;
    }
  }
  best.normalization = normalization;
  return best;
}

}  // namespace squashloc
