#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dgatrack/clustering.hpp"
#include "dgatrack/domain.hpp"
#include "dgatrack/hgd_filter.hpp"
#include "dgatrack/linguistics.hpp"

namespace dgatrack {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Kolmogorov tail probability Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at the
/// corrected effective size. Throws DomainError for an empty sample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

enum class ClusterFeature { prefix_length, numeric_ratio, suffix };

std::string_view to_string(ClusterFeature f);
/// Throws ConfigError for unknown names.
ClusterFeature cluster_feature_from_string(std::string_view name);

struct SeparationReport {
  std::vector<std::string> cluster_ids;
  /// Row i holds p-values against clusters 0..i-1.
  std::vector<std::vector<double>> p_values;
  std::string feature_name;
  std::vector<std::string> warnings;
};

/// Pairwise KS over per-member feature samples. Clusters with fewer than two
/// members are left out with a warning. `ids` defaults to "0", "1", ...
/// Throws DomainError for fewer than two clusters or the suffix feature.
SeparationReport cluster_separation(std::span<const DomainCluster> clusters, ClusterFeature feature,
                                    std::vector<std::string> ids = {});

/// Shannon entropy in bits of a cluster feature. Prefix length and suffix are
/// categorical; the numeric ratio falls into 10 equal bins over [0, 1].
double intra_cluster_entropy(const DomainCluster& cluster, ClusterFeature feature);

struct SensitivityCurve {
  std::vector<double> gamma_grid;
  std::vector<std::size_t> cluster_counts;
  std::map<std::string, std::vector<double>> avg_entropy;  // keyed by feature name
  std::vector<double> mean_entropy;  // average over the three features
};

/// Prune and merge at every gamma. A gamma that leaves no cluster scores entropy 0.
/// Throws DomainError for an empty or non-increasing grid.
SensitivityCurve gamma_sensitivity(std::span<const DomainCluster> pre_merge,
                                   std::span<const double> gamma_grid);

/// Static CIDR-to-AS table with longest-prefix lookup.
class AsMap {
 public:
  struct Entry {
    std::uint32_t network = 0;
    int prefix_length = 0;
    std::uint32_t asn = 0;
  };

  /// Lines `cidr,asn`; an optional header, blank lines and `#` comments are
  /// skipped. Throws ParseError for malformed rows, host bits set or
  /// conflicting duplicates.
  static AsMap from_stream(std::istream& in);
  static AsMap load(const std::filesystem::path& path);
  void add(std::string_view cidr, std::uint32_t asn);

  std::optional<std::uint32_t> lookup(Ipv4 ip) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::array<std::map<std::uint32_t, std::uint32_t>, 33> by_length_;
};

enum class Granularity { ip_set, as_set };

struct TimeSeries {
  std::string partition_key;
  std::vector<std::pair<std::int64_t, std::uint64_t>> buckets;  // (UTC day, requests)
};

/// Days since the epoch, rounding towards negative infinity.
std::int64_t utc_day(std::int64_t timestamp);

/// Groups cluster members by the exact set of IPs (or ASs) they resolved to
/// and sums request counts per UTC day. Unmapped IPs fall into "AS?".
/// Series are ordered by key. Throws ConfigError for as_set without a map.
std::vector<TimeSeries> activity_time_series(const DomainCluster& cluster,
                                             std::span<const DnsRecord> records,
                                             Granularity granularity,
                                             const AsMap* as_map = nullptr);

struct PcaProjection {
  std::vector<std::array<double, 2>> points;
  Eigen::Matrix<double, 4, 2> components = Eigen::Matrix<double, 4, 2>::Zero();
  double variance_preserved = 0.0;
  bool low_variance_warning = false;  // variance_preserved < 0.99
};

/// Projects centred features onto the two leading principal axes of the
/// model covariance. Axes with no variance project to zero.
/// Throws DomainError for fewer than two vectors.
PcaProjection pca_project_2d(const HgdModel& model, std::span<const LinguisticFeatures> features);

}  // namespace dgatrack
