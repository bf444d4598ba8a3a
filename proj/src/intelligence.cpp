#include "dgatrack/intelligence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <set>

#include "dgatrack/errors.hpp"
#include "dgatrack/fingerprint.hpp"
#include "dgatrack/linalg.hpp"
#include "text.hpp"

namespace dgatrack {

namespace {

constexpr double kSeriesCutoff = 1e-12;

std::vector<double> member_samples(const DomainCluster& c, ClusterFeature feature) {
  std::vector<double> out;
  out.reserve(c.members.size());
  for (const auto& m : c.members) {
    out.push_back(feature == ClusterFeature::prefix_length
                      ? static_cast<double>(m.chosen_prefix.size())
                      : numeric_ratio(m.chosen_prefix));
  }
  return out;
}

template <typename Key>
double entropy_of(const std::map<Key, std::size_t>& counts, std::size_t total) {
  double h = 0.0;
  for (const auto& [key, n] : counts) {
    const double p = static_cast<double>(n) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta form of the same function; the alternating series
    // converges slowly for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1;; ++j) {
      const double k = 2.0 * j - 1.0;
      const double term = std::exp(-k * k * c);
      sum += term;
      if (term < kSeriesCutoff) break;
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j < 1000; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < kSeriesCutoff) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());

  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }

  KsResult r;
  r.statistic = d;
  if (d == 0.0) return r;
  const double ne = n * m / (n + m);
  const double root = std::sqrt(ne);
  r.p_value = kolmogorov_q((root + 0.12 + 0.11 / root) * d);
  return r;
}

std::string_view to_string(ClusterFeature f) {
  switch (f) {
    case ClusterFeature::prefix_length: return "prefix_length";
    case ClusterFeature::numeric_ratio: return "numeric_ratio";
    case ClusterFeature::suffix: return "suffix";
  }
  return "unknown";
}

ClusterFeature cluster_feature_from_string(std::string_view name) {
  if (name == "prefix_length") return ClusterFeature::prefix_length;
  if (name == "numeric_ratio") return ClusterFeature::numeric_ratio;
  if (name == "suffix") return ClusterFeature::suffix;
  throw ConfigError("unknown cluster feature '" + std::string(name) + "'");
}

SeparationReport cluster_separation(std::span<const DomainCluster> clusters, ClusterFeature feature,
                                    std::vector<std::string> ids) {
  if (clusters.size() < 2) throw DomainError("separation needs at least two clusters");
  if (feature == ClusterFeature::suffix) {
    throw DomainError("separation compares numeric features only");
  }
  if (ids.empty()) {
    for (std::size_t i = 0; i < clusters.size(); ++i) ids.push_back(std::to_string(i));
  }
  if (ids.size() != clusters.size()) throw DomainError("one id per cluster required");

  SeparationReport report;
  report.feature_name = std::string(to_string(feature));
  std::vector<std::vector<double>> samples;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i].members.size() < 2) {
      report.warnings.push_back("cluster " + ids[i] + " has fewer than 2 members; excluded");
      continue;
    }
    report.cluster_ids.push_back(ids[i]);
    samples.push_back(member_samples(clusters[i], feature));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& row = report.p_values.emplace_back();
    for (std::size_t j = 0; j < i; ++j) row.push_back(ks_two_sample(samples[i], samples[j]).p_value);
  }
  return report;
}

double intra_cluster_entropy(const DomainCluster& cluster, ClusterFeature feature) {
  const std::size_t total = cluster.members.size();
  if (total == 0) throw DomainError("entropy of an empty cluster");
  switch (feature) {
    case ClusterFeature::prefix_length: {
      std::map<std::size_t, std::size_t> counts;
      for (const auto& m : cluster.members) ++counts[m.chosen_prefix.size()];
      return entropy_of(counts, total);
    }
    case ClusterFeature::numeric_ratio: {
      std::map<int, std::size_t> counts;
      for (const auto& m : cluster.members) {
        ++counts[std::min(static_cast<int>(numeric_ratio(m.chosen_prefix) * 10.0), 9)];
      }
      return entropy_of(counts, total);
    }
    case ClusterFeature::suffix: {
      std::map<std::string, std::size_t> counts;
      for (const auto& m : cluster.members) ++counts[m.etld];
      return entropy_of(counts, total);
    }
  }
  return 0.0;
}

SensitivityCurve gamma_sensitivity(std::span<const DomainCluster> pre_merge,
                                   std::span<const double> gamma_grid) {
  if (gamma_grid.empty()) throw DomainError("empty gamma grid");
  for (std::size_t i = 1; i < gamma_grid.size(); ++i) {
    if (!(gamma_grid[i] > gamma_grid[i - 1])) throw DomainError("gamma grid must increase");
  }
  constexpr std::array kFeatures{ClusterFeature::prefix_length, ClusterFeature::numeric_ratio,
                                 ClusterFeature::suffix};
  SensitivityCurve curve;
  curve.gamma_grid.assign(gamma_grid.begin(), gamma_grid.end());
  std::vector<DomainCluster> input(pre_merge.begin(), pre_merge.end());
  for (double gamma : gamma_grid) {
    const auto merged = merge_clusters(prune_clusters(input, gamma));
    curve.cluster_counts.push_back(merged.size());
    double overall = 0.0;
    for (auto f : kFeatures) {
      double sum = 0.0;
      for (const auto& c : merged) sum += intra_cluster_entropy(c, f);
      const double mean = merged.empty() ? 0.0 : sum / static_cast<double>(merged.size());
      curve.avg_entropy[std::string(to_string(f))].push_back(mean);
      overall += mean;
    }
    curve.mean_entropy.push_back(overall / static_cast<double>(kFeatures.size()));
  }
  return curve;
}

void AsMap::add(std::string_view cidr, std::uint32_t asn) {
  const auto slash = cidr.find('/');
  const auto ip = Ipv4::parse(cidr.substr(0, slash));
  if (!ip) throw ParseError("bad CIDR '" + std::string(cidr) + "'");
  int length = 32;
  if (slash != std::string_view::npos) {
    const auto parsed = detail::parse_int64(cidr.substr(slash + 1));
    if (!parsed || *parsed < 0 || *parsed > 32) {
      throw ParseError("bad prefix length in '" + std::string(cidr) + "'");
    }
    length = static_cast<int>(*parsed);
  }
  const std::uint32_t mask = length == 0 ? 0u : ~0u << (32 - length);
  if ((ip->value & ~mask) != 0) throw ParseError("host bits set in '" + std::string(cidr) + "'");
  auto [it, fresh] = by_length_[length].emplace(ip->value, asn);
  if (!fresh) {
    if (it->second != asn) throw ParseError("conflicting AS for '" + std::string(cidr) + "'");
    return;
  }
  entries_.push_back(Entry{ip->value, length, asn});
}

AsMap AsMap::from_stream(std::istream& in) {
  AsMap map;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto text = detail::trim(line);
    if (text.empty() || text.starts_with('#')) continue;
    const auto fields = detail::split(text, ',');
    if (fields.size() != 2) throw ParseError("expected 'cidr,asn', got '" + std::string(text) + "'");
    auto asn_text = detail::trim(fields[1]);
    if (asn_text.starts_with("AS") || asn_text.starts_with("as")) asn_text.remove_prefix(2);
    const auto asn = detail::parse_int64(asn_text);
    if (!asn || *asn < 0 || *asn > 0xffffffffLL) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw ParseError("bad AS number in '" + std::string(text) + "'");
    }
    first = false;
    map.add(detail::trim(fields[0]), static_cast<std::uint32_t>(*asn));
  }
  return map;
}

AsMap AsMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open AS map " + path.string());
  return from_stream(in);
}

std::optional<std::uint32_t> AsMap::lookup(Ipv4 ip) const {
  for (int length = 32; length >= 0; --length) {
    const auto& table = by_length_[length];
    if (table.empty()) continue;
    const std::uint32_t mask = length == 0 ? 0u : ~0u << (32 - length);
    auto it = table.find(ip.value & mask);
    if (it != table.end()) return it->second;
  }
  return std::nullopt;
}

std::int64_t utc_day(std::int64_t timestamp) {
  constexpr std::int64_t kDay = 86400;
  std::int64_t q = timestamp / kDay;
  if (timestamp % kDay < 0) --q;
  return q;
}

std::vector<TimeSeries> activity_time_series(const DomainCluster& cluster,
                                             std::span<const DnsRecord> records,
                                             Granularity granularity, const AsMap* as_map) {
  if (granularity == Granularity::as_set && as_map == nullptr) {
    throw ConfigError("AS-set granularity needs an AS map");
  }
  std::map<std::string, std::set<std::string>> resolved;  // member -> IP or AS labels
  for (const auto& m : cluster.members) resolved[m.raw];
  for (const auto& r : records) {
    auto it = resolved.find(r.domain.raw);
    if (it == resolved.end()) continue;
    if (granularity == Granularity::ip_set) {
      it->second.insert(r.ip.to_string());
    } else {
      const auto asn = as_map->lookup(r.ip);
      it->second.insert(asn ? "AS" + std::to_string(*asn) : std::string("AS?"));
    }
  }

  std::map<std::string, std::string> key_of;
  for (const auto& [name, set] : resolved) {
    if (set.empty()) continue;
    key_of[name] = join(std::vector<std::string>(set.begin(), set.end()), ',');
  }
  std::map<std::string, std::map<std::int64_t, std::uint64_t>> buckets;
  for (const auto& r : records) {
    auto it = key_of.find(r.domain.raw);
    if (it == key_of.end()) continue;
    buckets[it->second][utc_day(r.timestamp)] += r.count;
  }

  std::vector<TimeSeries> out;
  for (auto& [key, days] : buckets) {
    TimeSeries ts;
    ts.partition_key = key;
    ts.buckets.assign(days.begin(), days.end());
    out.push_back(std::move(ts));
  }
  return out;
}

PcaProjection pca_project_2d(const HgdModel& model, std::span<const LinguisticFeatures> features) {
  if (features.size() < 2) throw DomainError("PCA projection needs at least two vectors");
  const SymmetricEigen eig = symmetric_eigen(model.cov);
  const double trace = eig.values.sum();

  PcaProjection out;
  double kept = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double value = eig.values(c);
    if (!(value > 1e-12 * std::max(trace, 0.0)) || value <= 0.0) continue;
    out.components.col(c) = eig.vectors.col(c);
    kept += value;
  }
  out.variance_preserved = trace > 0.0 ? std::min(kept / trace, 1.0) : 1.0;
  out.low_variance_warning = out.variance_preserved < 0.99;

  out.points.reserve(features.size());
  for (const auto& f : features) {
    const Eigen::Vector4d centred = Eigen::Vector4d(f.r, f.s1, f.s2, f.s3) - model.mu;
    const Eigen::Vector2d p = out.components.transpose() * centred;
    out.points.push_back({p(0), p(1)});
  }
  return out;
}

}  // namespace dgatrack
