#include "dgatrack/fingerprint.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

#include "dgatrack/errors.hpp"

namespace dgatrack {

namespace {

std::size_t shared_ip_count(const std::vector<Ipv4>& sorted_a, std::span<const Ipv4> b) {
  std::size_t n = 0;
  for (const auto& ip : b) {
    if (std::binary_search(sorted_a.begin(), sorted_a.end(), ip)) ++n;
  }
  return n;
}

struct Candidate {
  const Fingerprint* fp;
  std::size_t shared;
};

LabelResult finish(LabelResult result, std::vector<Candidate> candidates, const Domain& d) {
  std::erase_if(candidates, [&](const Candidate& c) { return !match_features(*c.fp, d); });
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::make_tuple(-static_cast<long long>(a.shared), -static_cast<long long>(a.fp->member_count),
                           std::string_view(a.fp->cluster_id)) <
           std::make_tuple(-static_cast<long long>(b.shared), -static_cast<long long>(b.fp->member_count),
                           std::string_view(b.fp->cluster_id));
  });
  for (const auto& c : candidates) result.matched_clusters.push_back(c.fp->cluster_id);
  result.verdict = result.matched_clusters.empty() ? Verdict::agd_unmatched : Verdict::matched;
  return result;
}

}  // namespace

double numeric_ratio(std::string_view prefix) {
  if (prefix.empty()) return 0.0;
  auto digits = std::count_if(prefix.begin(), prefix.end(),
                              [](unsigned char c) { return std::isdigit(c) != 0; });
  return static_cast<double>(digits) / static_cast<double>(prefix.size());
}

std::string Fingerprint::charset_string() const {
  std::string out;
  for (std::size_t c = 0; c < charset.size(); ++c) {
    if (charset.test(c)) out.push_back(static_cast<char>(c));
  }
  return out;
}

std::bitset<256> Fingerprint::charset_of(std::string_view text) {
  std::bitset<256> bits;
  for (unsigned char c : text) bits.set(c);
  return bits;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::not_agd: return "not_agd";
    case Verdict::agd_unmatched: return "agd_unmatched";
    case Verdict::matched: return "matched";
  }
  return "unknown";
}

Fingerprint extract_fingerprint(const DomainCluster& cluster, std::string cluster_id) {
  if (cluster.members.empty()) throw DomainError("cannot fingerprint an empty cluster");
  Fingerprint fp;
  fp.cluster_id = std::move(cluster_id);
  fp.cnc_ips = cluster.ip_set;
  std::sort(fp.cnc_ips.begin(), fp.cnc_ips.end());
  fp.cnc_ips.erase(std::unique(fp.cnc_ips.begin(), fp.cnc_ips.end()), fp.cnc_ips.end());
  fp.label = cluster.label;
  fp.member_count = cluster.members.size();

  const auto& first = cluster.members.front().chosen_prefix;
  fp.prefix_len_range = {first.size(), first.size()};
  const double r0 = numeric_ratio(first);
  fp.numeric_ratio_range = {r0, r0};
  for (const auto& m : cluster.members) {
    const auto& p = m.chosen_prefix;
    fp.prefix_len_range.first = std::min(fp.prefix_len_range.first, p.size());
    fp.prefix_len_range.second = std::max(fp.prefix_len_range.second, p.size());
    const double r = numeric_ratio(p);
    fp.numeric_ratio_range.first = std::min(fp.numeric_ratio_range.first, r);
    fp.numeric_ratio_range.second = std::max(fp.numeric_ratio_range.second, r);
    fp.charset |= Fingerprint::charset_of(p);
    fp.suffix_set.push_back(m.etld);
  }
  std::sort(fp.suffix_set.begin(), fp.suffix_set.end());
  fp.suffix_set.erase(std::unique(fp.suffix_set.begin(), fp.suffix_set.end()), fp.suffix_set.end());
  return fp;
}

bool match_features(const Fingerprint& fp, const Domain& d) {
  const auto& p = d.chosen_prefix;
  if (p.size() < fp.prefix_len_range.first || p.size() > fp.prefix_len_range.second) return false;
  const auto chars = Fingerprint::charset_of(p);
  if ((chars & ~fp.charset).any()) return false;
  const double r = numeric_ratio(p);
  if (r < fp.numeric_ratio_range.first || r > fp.numeric_ratio_range.second) return false;
  return std::binary_search(fp.suffix_set.begin(), fp.suffix_set.end(), d.etld);
}

LabelResult label_domain(std::span<const Fingerprint> db, const HgdModel& model,
                         const FeatureExtractor& extractor, const Domain& d,
                         std::span<const Ipv4> ips) {
  LabelResult result;
  result.domain = d;
  const FilterVerdict filter = classify(model, extractor(d), ThresholdMode::loose);
  result.distance = filter.distance;
  if (!filter.is_agd) return result;

  std::vector<Candidate> candidates;
  for (const auto& fp : db) {
    const std::size_t shared = shared_ip_count(fp.cnc_ips, ips);
    if (shared > 0) candidates.push_back({&fp, shared});
  }
  return finish(std::move(result), std::move(candidates), d);
}

LabelResult label_by_features_only(std::span<const Fingerprint> db, const HgdModel& model,
                                   const FeatureExtractor& extractor, const Domain& d) {
  LabelResult result;
  result.domain = d;
  const FilterVerdict filter = classify(model, extractor(d), ThresholdMode::loose);
  result.distance = filter.distance;
  if (!filter.is_agd) return result;

  std::vector<Candidate> candidates;
  for (const auto& fp : db) candidates.push_back({&fp, 0});
  return finish(std::move(result), std::move(candidates), d);
}

}  // namespace dgatrack
