#include "dgatrack/hgd_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dgatrack/errors.hpp"
#include "dgatrack/linalg.hpp"

namespace dgatrack {

namespace {

Eigen::Vector4d to_vector(const LinguisticFeatures& f) { return {f.r, f.s1, f.s2, f.s3}; }

void check_percentile(double p) {
  if (!(p > 0.0 && p <= 100.0)) {
    throw DomainError("percentile must lie in (0, 100], got " + std::to_string(p));
  }
}

std::size_t nearest_rank_index(double p, std::size_t n) {
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(rank, 1, n) - 1;
}

}  // namespace

HgdModel train_model(std::span<const LinguisticFeatures> hgd_features, double percentile_loose,
                     double percentile_strict) {
  check_percentile(percentile_loose);
  check_percentile(percentile_strict);
  if (percentile_loose >= percentile_strict) {
    throw DomainError("loose percentile must be below the strict percentile");
  }
  const std::size_t n = hgd_features.size();
  if (n < kMinTrainingSize) {
    throw InsufficientDataError("need at least " + std::to_string(kMinTrainingSize) +
                                " training vectors, got " + std::to_string(n));
  }

  HgdModel model;
  model.training_size = n;
  model.percentile_loose = percentile_loose;
  model.percentile_strict = percentile_strict;

  for (const auto& f : hgd_features) model.mu += to_vector(f);
  model.mu /= static_cast<double>(n);
  for (const auto& f : hgd_features) {
    const Eigen::Vector4d d = to_vector(f) - model.mu;
    model.cov += d * d.transpose();
  }
  model.cov /= static_cast<double>(n - 1);

  const SymmetricEigen eig = symmetric_eigen(model.cov);
  const double largest = eig.values(0);
  const double smallest = eig.values(3);
  const double condition = smallest > 0.0 ? largest / smallest
                                          : std::numeric_limits<double>::infinity();
  Eigen::Matrix4d to_invert = model.cov;
  if (condition > kConditionLimit) {
    const double trace = model.cov.trace();
    // A zero trace means every vector was identical; any positive ridge works.
    model.ridge_epsilon = trace > 0.0 ? 1e-8 * trace : 1e-8;
    to_invert += model.ridge_epsilon * Eigen::Matrix4d::Identity();
  }
  model.cov_inv = to_invert.inverse();

  model.train_distances.reserve(n);
  for (const auto& f : hgd_features) model.train_distances.push_back(mahalanobis(model, f));
  std::sort(model.train_distances.begin(), model.train_distances.end());

  model.lambda_loose = threshold_from_percentile(model, percentile_loose);
  model.lambda_strict = threshold_from_percentile(model, percentile_strict);
  return model;
}

double mahalanobis(const HgdModel& model, const LinguisticFeatures& x) {
  const Eigen::Vector4d d = to_vector(x) - model.mu;
  const double q = d.dot(model.cov_inv * d);
  return std::sqrt(std::max(q, 0.0));
}

double threshold_from_percentile(const HgdModel& model, double p) {
  check_percentile(p);
  const auto& dist = model.train_distances;
  if (dist.empty()) throw InsufficientDataError("model has no training distances");
  if (model.distances_quantized) {
    // Entry k holds the nearest-rank percentile k/10.
    auto k = static_cast<std::size_t>(std::ceil(p * 10.0 - 1e-9));
    return dist[std::min(k, dist.size() - 1)];
  }
  return dist[nearest_rank_index(p, dist.size())];
}

FilterVerdict classify(const HgdModel& model, const LinguisticFeatures& x, ThresholdMode mode) {
  FilterVerdict verdict;
  verdict.distance = mahalanobis(model, x);
  verdict.threshold_used = mode;
  const double threshold = mode == ThresholdMode::strict ? model.lambda_strict
                                                         : model.lambda_loose;
  verdict.is_agd = verdict.distance > threshold;
  return verdict;
}

void quantize_distances(HgdModel& model) {
  if (model.distances_quantized || model.train_distances.empty()) return;
  const auto& dist = model.train_distances;
  std::vector<double> quantiles(1001);
  quantiles[0] = dist.front();
  for (std::size_t k = 1; k <= 1000; ++k) {
    quantiles[k] = dist[nearest_rank_index(static_cast<double>(k) / 10.0, dist.size())];
  }
  model.train_distances = std::move(quantiles);
  model.distances_quantized = true;
}

}  // namespace dgatrack
