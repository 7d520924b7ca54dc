#pragma once

#include "squashloc/features.hpp"
#include "squashloc/mlp.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace squashloc {

/// Synthetic minority over-sampling. Produces floor(amount * |minority|)
/// points x + u * (x_nn - x), where x is a minority sample (taken in turn),
/// x_nn one of its k nearest minority neighbours and u ~ U(0, 1).
/// Requires |minority| > k.
std::vector<FeatureVector> smote(std::span<const FeatureVector> minority, std::size_t k, double amount,
                                 std::uint64_t seed);

/// Raw-vector form of smote().
std::vector<std::vector<double>> smote(const std::vector<std::vector<double>>& minority,
                                       std::size_t k, double amount, std::uint64_t seed);

/// x + u * (neighbor - x).
std::vector<double> interpolate(std::span<const double> x, std::span<const double> neighbor, double u);

struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;   // (tp + tn) / n
  double precision = 0.0;  // tp / (tp + fp); 0 and flagged when undefined
  double recall = 0.0;     // tp / (tp + fn); 0 and flagged when undefined
  bool precision_degenerate = false;
  bool recall_degenerate = false;

  static BinaryMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
  double f1() const;
};

/// Cutoff in (0, 1) maximizing F1 of `score > cutoff` against the labels.
double select_cutoff(std::span<const double> scores, std::span<const int> labels);

/// One trained per-class classifier with its operating point.
struct BundleEntry {
  ClassLabel label = ClassLabel::front_wall;
  MlpModel model;
  int channel = 0;
  FeatureKind input_kind = FeatureKind::T1;
  std::size_t feature_half_width = kDefaultFeatureHalfWidth;
  double cutoff = 0.5;     // in (0, 1)
  double precision = 1.0;  // in [0, 1]
};

/// Exactly one entry per impact class.
struct ClassifierBundle {
  std::vector<BundleEntry> entries;

  const BundleEntry& entry(ClassLabel label) const;
  void validate() const;

  /// Binary, little-endian, versioned. See bundle.cpp for the layout.
  void save(const std::string& path) const;
  static ClassifierBundle load(const std::string& path);
  /// Human-readable JSON listing of the per-class entries.
  std::string manifest() const;
};

/// Class decision: argmax over classes with f_k > cut_k of
/// (f_k - cut_k) / (1 - cut_k) * prec_k / sum(prec); false_event when no
/// class clears its cutoff. Ties go to the earlier class in
/// front_wall, racquet, floor, glass order. Throws DataError when a
/// confidence is missing.
ClassLabel fuse(const std::map<ClassLabel, double>& confidences, const ClassifierBundle& bundle);

/// Per-class fusion scores (negative when not eligible), in kImpactClasses order.
std::array<double, 4> fusion_scores(const std::map<ClassLabel, double>& confidences,
                                    const ClassifierBundle& bundle);

using Predictor = std::function<double(std::span<const double>)>;
using Trainer =
    std::function<Predictor(const std::vector<std::vector<double>>& x, const std::vector<int>& y)>;

struct CvOptions {
  std::size_t folds = 8;
  bool use_smote = true;
  std::size_t smote_k = 5;
  bool tune_cutoff = true;  // otherwise a fixed 0.5 cutoff
  std::uint64_t seed = 0;
};

struct CvResult {
  std::vector<BinaryMetrics> folds;
  std::vector<double> cutoffs;
  double mean_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};

class StratificationError : public DataError {
 public:
  using DataError::DataError;
};

/// Fold id per sample; each class is dealt round-robin after a seeded
/// shuffle. Throws StratificationError when a class has fewer members than
/// folds.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed);

/// Oversamples the minority class of (x, y) until both classes have equal
/// size (SMOTE), appending the synthetic points in place.
void balance_with_smote(std::vector<std::vector<double>>& x, std::vector<int>& y, std::size_t k,
                        std::uint64_t seed);

/// Stratified k-fold evaluation. SMOTE and cutoff selection only ever see
/// the training folds.
CvResult crossvalidate(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                       const Trainer& trainer, const CvOptions& opts = {});

/// Trainer backed by train_binary().
Trainer mlp_trainer(std::vector<std::size_t> hidden_layers, TrainHyper hyper,
                    Normalization normalization);

inline const std::vector<std::size_t> kT1Architecture(20, 10);
inline const std::vector<std::size_t> kT2Architecture(10, 10);

/// Trains the deployable model for one (class, channel, feature kind):
/// cross-validation supplies the precision, a final fit on all data
/// (SMOTE-balanced) supplies the model and its F1-optimal cutoff.
struct ClassModelReport {
  BundleEntry entry;
  CvResult cv;
};
ClassModelReport train_class_model(const std::vector<FeatureVector>& features,
                                   const std::vector<ClassLabel>& labels, ClassLabel target,
                                   std::span<const std::size_t> hidden_layers, const TrainHyper& hyper,
                                   const CvOptions& cv);

}  // namespace squashloc
