#pragma once

// Shared fixtures for the unit tests and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dgatrack/clustering.hpp"
#include "dgatrack/domain.hpp"
#include "dgatrack/hgd_filter.hpp"
#include "dgatrack/linguistics.hpp"
#include "dgatrack/synthetic.hpp"

#ifndef DGATRACK_DATA_DIR
#error "DGATRACK_DATA_DIR must point at the bundled data directory"
#endif

namespace dgatrack::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DGATRACK_DATA_DIR) / name;
}

inline const SuffixDB& suffixes() {
  static const SuffixDB db = load_public_suffix_list(data_path("public_suffix_list.dat"));
  return db;
}

inline const FeatureExtractor& extractor() {
  static const FeatureExtractor fx(Dictionary::load(data_path("words.txt")));
  return fx;
}

inline Domain dom(const std::string& raw) { return parse_domain(raw, suffixes()); }

inline std::vector<LinguisticFeatures> features_of(const std::vector<std::string>& names) {
  std::vector<LinguisticFeatures> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(extractor()(dom(n)));
  return out;
}

/// Counts transcribed from the worked bigram example.
inline NGramTable figure_bigrams() {
  return NGramTable::from_counts(2, {{"fa", 109}, {"ac", 343}, {"ce", 438}, {"eb", 29}, {"bo", 118},
                                     {"oo", 114}, {"ok", 45}, {"aa", 4}, {"aw", 45}, {"wr", 17}});
}

/// Model trained on the bundled HGD corpus.
inline const HgdModel& bundled_model() {
  static const HgdModel model = train_model(features_of(read_lines(data_path("hgd_corpus.txt"))));
  return model;
}

/// Addresses base, base+1, ..., base+n-1.
inline std::vector<Ipv4> ip_range(const std::string& base, std::size_t n) {
  std::vector<Ipv4> out;
  const std::uint32_t start = Ipv4::parse(base)->value;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Ipv4{start + static_cast<std::uint32_t>(i)});
  return out;
}

inline ScenarioCluster botnet(DgaSpec dga, std::size_t domains, std::vector<Ipv4> pool,
                              std::string label = {}) {
  ScenarioCluster c;
  c.dga = std::move(dga);
  c.domain_count = domains;
  c.ip_pool = std::move(pool);
  c.label = std::move(label);
  return c;
}

/// Three botnets with disjoint pools of 6, 4 and 2 addresses, 100 domains
/// each, plus one-domain-one-IP noise.
inline BotnetScenario three_botnets(std::uint64_t seed, std::size_t noise = 200) {
  BotnetScenario s;
  s.seed = seed;
  s.noise_domains = noise;
  s.clusters.push_back(botnet(DgaSpec::preset(DgaKind::uniform_char), 100, ip_range("10.1.0.1", 6), "uniform"));
  s.clusters.push_back(botnet(DgaSpec::preset(DgaKind::hex32), 100, ip_range("10.2.0.1", 4), "hex"));
  s.clusters.push_back(botnet(DgaSpec::preset(DgaKind::short_alpha), 100, ip_range("10.3.0.1", 2), "short"));
  return s;
}

/// Sorted member-name sets of clusters, sorted, for order-free comparison.
inline std::vector<std::vector<std::string>> memberships(const std::vector<DomainCluster>& clusters) {
  std::vector<std::vector<std::string>> out;
  for (const auto& c : clusters) {
    std::vector<std::string> names;
    for (const auto& m : c.members) names.push_back(m.raw);
    std::sort(names.begin(), names.end());
    out.push_back(std::move(names));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dgatrack::testing
