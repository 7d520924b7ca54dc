#include "squashloc/classify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

namespace squashloc {

std::vector<double> interpolate(std::span<const double> x, std::span<const double> neighbor, double u) {
  if (x.size() != neighbor.size()) throw DataError("interpolate: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + u * (neighbor[i] - x[i]);
  return out;
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

struct SmoteDraw {
  std::size_t source;
  std::size_t neighbor;
  double u;
};

std::vector<SmoteDraw> smote_draws(const std::vector<const std::vector<double>*>& pts, std::size_t k,
                                   std::size_t count, std::uint64_t seed) {
  const std::size_t n = pts.size();
  if (n <= k || k == 0) {
    throw DataError("SMOTE needs more minority samples (" + std::to_string(n) +
                    ") than neighbours k (" + std::to_string(k) + ") and k >= 1");
  }
  for (const auto* p : pts) {
    if (p->size() != pts.front()->size()) throw DataError("SMOTE inputs have inconsistent lengths");
  }
  std::vector<std::vector<std::size_t>> neighbors(n);
  auto knn = [&](std::size_t i) -> const std::vector<std::size_t>& {
    if (neighbors[i].empty()) {
      std::vector<std::pair<double, std::size_t>> d;
      d.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) d.emplace_back(squared_distance(*pts[i], *pts[j]), j);
      }
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
      for (std::size_t m = 0; m < k; ++m) neighbors[i].push_back(d[m].second);
    }
    return neighbors[i];
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<SmoteDraw> draws;
  draws.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t i = s % n;
    const std::size_t nb = knn(i)[pick(rng)];
    draws.push_back({i, nb, unit(rng)});
  }
  return draws;
}

std::size_t smote_count(double amount, std::size_t n) {
  if (!(amount >= 0)) throw DataError("SMOTE amount must be non-negative");
  // Guard against amount * n landing a hair under an integer.
  return static_cast<std::size_t>(std::floor(amount * static_cast<double>(n) + 1e-9));
}

std::vector<std::vector<double>> smote_n(const std::vector<std::vector<double>>& minority,
                                         std::size_t k, std::size_t count, std::uint64_t seed) {
  std::vector<const std::vector<double>*> pts;
  for (const auto& m : minority) pts.push_back(&m);
  std::vector<std::vector<double>> out;
  for (const auto& d : smote_draws(pts, k, count, seed)) {
    out.push_back(interpolate(minority[d.source], minority[d.neighbor], d.u));
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> smote(const std::vector<std::vector<double>>& minority,
                                       std::size_t k, double amount, std::uint64_t seed) {
  return smote_n(minority, k, smote_count(amount, minority.size()), seed);
}

std::vector<FeatureVector> smote(std::span<const FeatureVector> minority, std::size_t k, double amount,
                                 std::uint64_t seed) {
  std::vector<const std::vector<double>*> pts;
  for (const auto& m : minority) pts.push_back(&m.values);
  std::vector<FeatureVector> out;
  for (const auto& d : smote_draws(pts, k, smote_count(amount, minority.size()), seed)) {
    const FeatureVector& src = minority[d.source];
    out.push_back(FeatureVector{src.kind, interpolate(src.values, minority[d.neighbor].values, d.u),
                                src.channel, src.detection_index});
  }
  return out;
}

// ---------------------------------------------------------------------------

BinaryMetrics BinaryMetrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                         std::size_t tn) {
  BinaryMetrics m{tp, fp, fn, tn};
  const std::size_t n = tp + fp + fn + tn;
  m.accuracy = n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
  if (tp + fp == 0) {
    m.precision_degenerate = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    m.recall_degenerate = true;
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  return m;
}

double BinaryMetrics::f1() const {
  const std::size_t d = 2 * tp + fp + fn;
  return d == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(d);
}

double select_cutoff(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("select_cutoff: size mismatch");
  constexpr double kLo = 1e-6;
  constexpr double kHi = 1.0 - 1e-6;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto total_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));

  double best_cut = 0.5;
  double best_f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (labels[order[k]] == 1 ? tp : fp)++;
    const double hi = scores[order[k]];
    const double lo = k + 1 < order.size() ? scores[order[k + 1]] : 0.0;
    if (k + 1 < order.size() && lo == hi) continue;  // cut can only fall between distinct scores
    const double cut = std::clamp(0.5 * (hi + lo), kLo, kHi);
    if (!(hi > cut)) continue;
    const std::size_t fn = total_pos - tp;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_cut = cut;
    }
  }
  return best_cut;
}

// ---------------------------------------------------------------------------

const BundleEntry& ClassifierBundle::entry(ClassLabel label) const {
  for (const auto& e : entries) {
    if (e.label == label) return e;
  }
  throw DataError("classifier bundle has no entry for class " + std::string(to_string(label)));
}

void ClassifierBundle::validate() const {
  if (entries.size() != 4) throw DataError("classifier bundle must have exactly four entries");
  for (ClassLabel c : kImpactClasses) {
    const auto n = std::count_if(entries.begin(), entries.end(), [&](const BundleEntry& e) { return e.label == c; });
    if (n != 1) {
      throw DataError("classifier bundle needs exactly one entry for " + std::string(to_string(c)));
    }
  }
  for (const auto& e : entries) {
    if (!(e.cutoff > 0.0 && e.cutoff < 1.0)) throw DataError("bundle cutoff must lie in (0, 1)");
    if (!(e.precision >= 0.0 && e.precision <= 1.0)) throw DataError("bundle precision must lie in [0, 1]");
  }
}

std::array<double, 4> fusion_scores(const std::map<ClassLabel, double>& confidences,
                                    const ClassifierBundle& bundle) {
  double prec_sum = 0.0;
  for (ClassLabel c : kImpactClasses) prec_sum += bundle.entry(c).precision;
  std::array<double, 4> scores{};
  for (std::size_t k = 0; k < 4; ++k) {
    const ClassLabel c = kImpactClasses[k];
    auto it = confidences.find(c);
    if (it == confidences.end()) {
      throw DataError("missing confidence for class " + std::string(to_string(c)));
    }
    const BundleEntry& e = bundle.entry(c);
    const double f = it->second;
    if (!(f > e.cutoff)) {
      scores[k] = -1.0;
      continue;
    }
    const double weight = prec_sum > 0.0 ? e.precision / prec_sum : 0.25;
    scores[k] = (f - e.cutoff) / (1.0 - e.cutoff) * weight;
  }
  return scores;
}

ClassLabel fuse(const std::map<ClassLabel, double>& confidences, const ClassifierBundle& bundle) {
  const auto scores = fusion_scores(confidences, bundle);
  int best = -1;
  for (int k = 0; k < 4; ++k) {
    if (scores[static_cast<std::size_t>(k)] < 0.0) continue;
    if (best < 0 || scores[static_cast<std::size_t>(k)] > scores[static_cast<std::size_t>(best)]) best = k;
  }
  return best < 0 ? ClassLabel::false_event : kImpactClasses[best];
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold(labels.size());
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < folds) {
      throw StratificationError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                                " samples, fewer than " + std::to_string(folds) + " folds");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = i % folds;
  }
  return fold;
}

void balance_with_smote(std::vector<std::vector<double>>& x, std::vector<int>& y, std::size_t k,
                        std::uint64_t seed) {
  const auto pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  const std::size_t neg = y.size() - pos;
  if (pos == neg || pos == 0 || neg == 0) return;
  const int minority_label = pos < neg ? 1 : 0;
  std::vector<std::vector<double>> minority;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == minority_label) minority.push_back(x[i]);
  }
  const std::size_t kk = std::min(k, minority.size() - 1);
  if (kk == 0) return;
  const std::size_t need = (pos < neg ? neg : pos) - minority.size();
  for (auto& s : smote_n(minority, kk, need, seed)) {
    x.push_back(std::move(s));
    y.push_back(minority_label);
  }
}

namespace {

BinaryMetrics score_predictions(const Predictor& p, const std::vector<std::vector<double>>& x,
                                const std::vector<int>& y, double cutoff) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool predicted = p(x[i]) > cutoff;
    if (predicted) {
      (y[i] == 1 ? tp : fp)++;
    } else {
      (y[i] == 1 ? fn : tn)++;
    }
  }
  return BinaryMetrics::from_counts(tp, fp, fn, tn);
}

double tuned_cutoff(const Predictor& p, const std::vector<std::vector<double>>& x,
                    const std::vector<int>& y) {
  std::vector<double> s;
  s.reserve(x.size());
  for (const auto& v : x) s.push_back(p(v));
  return select_cutoff(s, y);
}

}  // namespace

CvResult crossvalidate(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                       const Trainer& trainer, const CvOptions& opts) {
  if (x.size() != y.size()) throw DataError("crossvalidate: feature/label count mismatch");
  if (x.size() < opts.folds) throw DataError("crossvalidate: fewer samples than folds");
  const auto fold = stratified_folds(y, opts.folds, opts.seed);

  CvResult res;
  for (std::size_t f = 0; f < opts.folds; ++f) {
    std::vector<std::vector<double>> xtr, xva;
    std::vector<int> ytr, yva;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (fold[i] == f) {
        xva.push_back(x[i]);
        yva.push_back(y[i]);
      } else {
        xtr.push_back(x[i]);
        ytr.push_back(y[i]);
      }
    }
    const std::size_t original = xtr.size();
    auto xfit = xtr;
    auto yfit = ytr;
    if (opts.use_smote) balance_with_smote(xfit, yfit, opts.smote_k, opts.seed + 7919 * (f + 1));
    const Predictor p = trainer(xfit, yfit);
    xtr.resize(original);
    const double cut = opts.tune_cutoff ? tuned_cutoff(p, xtr, ytr) : 0.5;
    res.cutoffs.push_back(cut);
    res.folds.push_back(score_predictions(p, xva, yva, cut));
  }
  for (const auto& m : res.folds) {
    res.mean_accuracy += m.accuracy;
    res.mean_precision += m.precision;
    res.mean_recall += m.recall;
  }
  const auto k = static_cast<double>(res.folds.size());
  res.mean_accuracy /= k;
  res.mean_precision /= k;
  res.mean_recall /= k;
  return res;
}

Trainer mlp_trainer(std::vector<std::size_t> hidden_layers, TrainHyper hyper,
                    Normalization normalization) {
  return [hidden_layers = std::move(hidden_layers), hyper, normalization](
             const std::vector<std::vector<double>>& x, const std::vector<int>& y) -> Predictor {
    auto model = std::make_shared<MlpModel>(
        train_binary(x, y, hidden_layers, hyper, normalization));
    return [model](std::span<const double> v) { return model->predict(v); };
  };
}

ClassModelReport train_class_model(const std::vector<FeatureVector>& features,
                                   const std::vector<ClassLabel>& labels, ClassLabel target,
                                   std::span<const std::size_t> hidden_layers, const TrainHyper& hyper,
                                   const CvOptions& cv) {
  if (features.empty() || features.size() != labels.size()) {
    throw DataError("train_class_model: need one label per feature vector");
  }
  const FeatureKind kind = features.front().kind;
  const Normalization norm = default_normalization(kind);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < features.size(); ++i) {
    x.push_back(features[i].values);
    y.push_back(labels[i] == target ? 1 : 0);
  }
  const std::vector<std::size_t> arch(hidden_layers.begin(), hidden_layers.end());

  ClassModelReport report;
  report.cv = crossvalidate(x, y, mlp_trainer(arch, hyper, norm), cv);

  auto xfit = x;
  auto yfit = y;
  if (cv.use_smote) balance_with_smote(xfit, yfit, cv.smote_k, cv.seed);
  MlpModel model = train_binary(xfit, yfit, arch, hyper, norm);
  const Predictor p = [&model](std::span<const double> v) { return model.predict(v); };

  BundleEntry& e = report.entry;
  e.label = target;
  e.channel = features.front().channel;
  e.input_kind = kind;
  e.feature_half_width = kind == FeatureKind::T1 ? (features.front().values.size() - 1) / 2
                                                 : features.front().values.size();
  e.cutoff = cv.tune_cutoff ? tuned_cutoff(p, x, y) : 0.5;
  e.precision = report.cv.mean_precision;
  e.model = std::move(model);
  return report;
}

}  // namespace squashloc
