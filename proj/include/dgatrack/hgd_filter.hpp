#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dgatrack/linguistics.hpp"

namespace dgatrack {

/// Linguistic model of human-generated domains: centroid, covariance and the
/// distribution of training Mahalanobis distances with its two thresholds.
struct HgdModel {
  Eigen::Vector4d mu = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d cov_inv = Eigen::Matrix4d::Zero();
  /// Ridge added to the diagonal before inversion; 0 when cov was well conditioned.
  double ridge_epsilon = 0.0;
  /// Sorted distances. When `distances_quantized` is set these are the 1,001
  /// nearest-rank quantiles at 0.0%, 0.1%, ..., 100.0% instead of the raw list.
  std::vector<double> train_distances;
  bool distances_quantized = false;
  double percentile_loose = 70.0;
  double percentile_strict = 90.0;
  double lambda_loose = 0.0;   // pre-labeling threshold
  double lambda_strict = 0.0;  // pre-clustering threshold
  std::size_t training_size = 0;
};

enum class ThresholdMode { strict, loose };

struct FilterVerdict {
  double distance = 0.0;
  bool is_agd = false;
  ThresholdMode threshold_used = ThresholdMode::strict;
};

inline constexpr std::size_t kMinTrainingSize = 50;
inline constexpr double kConditionLimit = 1e12;

/// Fits the model. Throws InsufficientDataError below kMinTrainingSize vectors
/// and DomainError for percentiles outside (0, 100] or loose >= strict.
HgdModel train_model(std::span<const LinguisticFeatures> hgd_features,
                     double percentile_loose = 70.0, double percentile_strict = 90.0);

double mahalanobis(const HgdModel& model, const LinguisticFeatures& x);

/// Nearest-rank percentile of the training distances: element ceil(p/100*N)-1.
double threshold_from_percentile(const HgdModel& model, double p);

FilterVerdict classify(const HgdModel& model, const LinguisticFeatures& x, ThresholdMode mode);

/// Replaces the raw distance list by its 1,001 quantiles. Thresholds are kept.
void quantize_distances(HgdModel& model);

}  // namespace dgatrack
