#pragma once

#include <bitset>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgatrack/clustering.hpp"
#include "dgatrack/domain.hpp"
#include "dgatrack/hgd_filter.hpp"
#include "dgatrack/linguistics.hpp"

namespace dgatrack {

/// Digits in `prefix` divided by its length; 0 for an empty prefix.
double numeric_ratio(std::string_view prefix);

/// Cluster descriptor: C&C addresses, prefix-length range, charset,
/// numeric-ratio range and public-suffix set.
struct Fingerprint {
  std::string cluster_id;
  std::vector<Ipv4> cnc_ips;  // sorted
  std::pair<std::size_t, std::size_t> prefix_len_range{0, 0};
  std::bitset<256> charset;
  std::pair<double, double> numeric_ratio_range{0.0, 0.0};
  std::vector<std::string> suffix_set;  // sorted
  std::optional<std::string> label;
  std::size_t member_count = 0;

  /// Characters of the charset in ascending byte order.
  std::string charset_string() const;
  static std::bitset<256> charset_of(std::string_view text);
};

enum class Verdict { not_agd, agd_unmatched, matched };

std::string_view to_string(Verdict v);

struct LabelResult {
  Domain domain;
  Verdict verdict = Verdict::not_agd;
  std::vector<std::string> matched_clusters;  // best first
  double distance = 0.0;
};

/// Throws DomainError for a cluster without members.
Fingerprint extract_fingerprint(const DomainCluster& cluster, std::string cluster_id);

/// Length, numeric ratio (both inclusive), charset subset and eTLD membership.
bool match_features(const Fingerprint& fp, const Domain& d);

/// Loose-threshold filter, then fingerprints sharing an IP with `ips`, then
/// match_features. Matches are ranked by shared IPs, then member count, then id.
LabelResult label_domain(std::span<const Fingerprint> db, const HgdModel& model,
                         const FeatureExtractor& extractor, const Domain& d,
                         std::span<const Ipv4> ips);

/// As label_domain without IP evidence: every fingerprint is a candidate.
/// Matches are ranked by member count, then id.
LabelResult label_by_features_only(std::span<const Fingerprint> db, const HgdModel& model,
                                   const FeatureExtractor& extractor, const Domain& d);

}  // namespace dgatrack
