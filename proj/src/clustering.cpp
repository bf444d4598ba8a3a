#include "dgatrack/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>

#include "dgatrack/errors.hpp"
#include "dgatrack/random.hpp"

namespace dgatrack {

namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;  // (domain index, ip index)

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // The smaller root wins so representatives are the lowest index of a set.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

template <typename Apply>
DominantEigen power_iterate(Eigen::Index k, Apply&& apply, const PowerIterationOptions& opts) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(k, 1.0 / std::sqrt(static_cast<double>(k)));
  double previous_diff = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double eigenvalue = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd y = apply(x);
    eigenvalue = x.dot(y);
    const double norm = y.norm();
    if (norm == 0.0) throw DomainError("matrix maps the start vector to zero");
    y /= norm;
    const double diff = (y - x).norm();
    x = std::move(y);
    if (diff < opts.tolerance) {
      Eigen::Index big = 0;
      x.cwiseAbs().maxCoeff(&big);
      if (x(big) < 0) x = -x;
      return DominantEigen{std::move(x), eigenvalue, it};
    }
    if (previous_diff > 0.0) ratio = diff / previous_diff;
    previous_diff = diff;
  }
  // Successive differences shrink by about |lambda2 / lambda1| per step.
  const double gap = std::isnan(ratio) ? 0.0 : eigenvalue * (1.0 - std::min(ratio, 1.0));
  throw IterationLimitError("power iteration did not converge in " +
                                std::to_string(opts.max_iterations) +
                                " iterations (estimated eigengap " + std::to_string(gap) + ")",
                            gap);
}

}  // namespace

void ClusteringConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be at least 2");
  if (min_pts < 1) throw ConfigError("min_pts must be at least 1");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (partition_budget < 1) throw ConfigError("partition_budget must be positive");
}

BipartiteGraph BipartiteGraph::build(std::span<const DnsRecord> records,
                                     std::span<const Domain> domains) {
  std::vector<Domain> listed(domains.begin(), domains.end());
  std::sort(listed.begin(), listed.end());
  listed.erase(std::unique(listed.begin(), listed.end()), listed.end());
  std::unordered_map<std::string_view, std::uint32_t> position;
  position.reserve(listed.size());
  for (std::size_t i = 0; i < listed.size(); ++i) {
    position.emplace(listed[i].raw, static_cast<std::uint32_t>(i));
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (listed index, ip value)
  for (const auto& r : records) {
    auto it = position.find(r.domain.raw);
    if (it != position.end()) pairs.emplace_back(it->second, r.ip.value);
  }
  if (pairs.empty()) throw EmptyGraphError("no DNS records for the selected domains");
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<std::uint32_t> ip_values;
  ip_values.reserve(pairs.size());
  for (const auto& [d, ip] : pairs) ip_values.push_back(ip);
  std::sort(ip_values.begin(), ip_values.end());
  ip_values.erase(std::unique(ip_values.begin(), ip_values.end()), ip_values.end());

  BipartiteGraph g;
  g.ips_.reserve(ip_values.size());
  for (auto v : ip_values) g.ips_.push_back(Ipv4{v});
  g.ip_domains_.resize(ip_values.size());

  std::uint32_t last_listed = std::numeric_limits<std::uint32_t>::max();
  for (const auto& [d, ip] : pairs) {
    if (d != last_listed) {
      g.domains_.push_back(std::move(listed[d]));
      g.domain_ips_.emplace_back();
      last_listed = d;
    }
    auto l = static_cast<std::uint32_t>(
        std::lower_bound(ip_values.begin(), ip_values.end(), ip) - ip_values.begin());
    auto k = static_cast<std::uint32_t>(g.domains_.size() - 1);
    g.domain_ips_.back().push_back(l);
    g.ip_domains_[l].push_back(k);
  }
  return g;
}

BipartiteGraph BipartiteGraph::build(std::span<const DnsRecord> records) {
  std::vector<Domain> all;
  all.reserve(records.size());
  for (const auto& r : records) all.push_back(r.domain);
  return build(records, all);
}

Eigen::SparseMatrix<double> BipartiteGraph::incidence() const {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t k = 0; k < domains_.size(); ++k) {
    for (auto l : domain_ips_[k]) {
      triplets.emplace_back(static_cast<int>(l), static_cast<int>(k),
                            1.0 / static_cast<double>(ip_domains_[l].size()));
    }
  }
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(ips_.size()),
                                static_cast<Eigen::Index>(domains_.size()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::SparseMatrix<double> BipartiteGraph::normalized_incidence() const {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t k = 0; k < domains_.size(); ++k) {
    double column_sum = 0.0;
    for (auto l : domain_ips_[k]) column_sum += 1.0 / static_cast<double>(ip_domains_[l].size());
    for (auto l : domain_ips_[k]) {
      const double weight = 1.0 / static_cast<double>(ip_domains_[l].size());
      triplets.emplace_back(static_cast<int>(l), static_cast<int>(k), weight / column_sum);
    }
  }
  Eigen::SparseMatrix<double> n(static_cast<Eigen::Index>(ips_.size()),
                                static_cast<Eigen::Index>(domains_.size()));
  n.setFromTriplets(triplets.begin(), triplets.end());
  return n;
}

BipartiteGraph BipartiteGraph::subgraph(std::span<const std::size_t> domain_indices) const {
  if (domain_indices.empty()) throw EmptyGraphError("empty domain subset");
  std::vector<std::size_t> chosen(domain_indices.begin(), domain_indices.end());
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());

  std::vector<std::uint32_t> used_ips;
  for (auto k : chosen) {
    used_ips.insert(used_ips.end(), domain_ips_.at(k).begin(), domain_ips_.at(k).end());
  }
  std::sort(used_ips.begin(), used_ips.end());
  used_ips.erase(std::unique(used_ips.begin(), used_ips.end()), used_ips.end());

  BipartiteGraph g;
  g.domains_.reserve(chosen.size());
  g.ips_.reserve(used_ips.size());
  for (auto l : used_ips) g.ips_.push_back(ips_[l]);
  g.ip_domains_.resize(used_ips.size());
  for (auto k : chosen) {
    auto new_k = static_cast<std::uint32_t>(g.domains_.size());
    g.domains_.push_back(domains_[k]);
    auto& adj = g.domain_ips_.emplace_back();
    adj.reserve(domain_ips_[k].size());
    for (auto l : domain_ips_[k]) {
      auto new_l = static_cast<std::uint32_t>(
          std::lower_bound(used_ips.begin(), used_ips.end(), l) - used_ips.begin());
      adj.push_back(new_l);
      g.ip_domains_[new_l].push_back(new_k);
    }
  }
  return g;
}

bool BipartiteGraph::fully_connected() const {
  return std::all_of(domain_ips_.begin(), domain_ips_.end(),
                     [&](const auto& adj) { return adj.size() == ips_.size(); });
}

std::vector<std::vector<std::size_t>> BipartiteGraph::connected_components() const {
  DisjointSets sets(domains_.size());
  for (const auto& members : ip_domains_) {
    for (std::size_t i = 1; i < members.size(); ++i) sets.unite(members[0], members[i]);
  }
  std::vector<std::vector<std::size_t>> components;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t k = 0; k < domains_.size(); ++k) {
    std::size_t root = sets.find(k);
    auto [it, fresh] = slot.emplace(root, components.size());
    if (fresh) components.emplace_back();
    components[it->second].push_back(k);
  }
  return components;
}

Eigen::MatrixXd similarity_matrix(const BipartiteGraph& g) {
  const Eigen::SparseMatrix<double> n = g.normalized_incidence();
  return Eigen::MatrixXd(n.transpose() * n);
}

DominantEigen dominant_eigenvector(const Eigen::MatrixXd& s, const PowerIterationOptions& opts) {
  if (s.rows() != s.cols() || s.rows() == 0) throw DomainError("similarity matrix must be square and non-empty");
  return power_iterate(s.rows(), [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return s * x; },
                       opts);
}

DominantEigen dominant_eigenvector(const BipartiteGraph& g, const PowerIterationOptions& opts) {
  const Eigen::SparseMatrix<double> n = g.normalized_incidence();
  const Eigen::SparseMatrix<double> nt = n.transpose();
  return power_iterate(
      static_cast<Eigen::Index>(g.domain_count()),
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd z = n * x;
        return nt * z;
      },
      opts);
}

DbscanResult dbscan_1d(std::span<const double> features, double epsilon, std::size_t min_pts) {
  const std::size_t n = features.size();
  DbscanResult result;
  if (n == 0) return result;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return features[a] < features[b]; });
  auto value = [&](std::size_t pos) { return features[order[pos]]; };

  // Neighbourhoods are contiguous windows of the sorted sequence.
  std::vector<bool> core(n, false);
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (value(i) - value(lo) > epsilon) ++lo;
    if (hi < i) hi = i;
    while (hi + 1 < n && value(hi + 1) - value(i) <= epsilon) ++hi;
    core[i] = hi - lo + 1 >= min_pts;
  }

  // Cores form one cluster per run whose consecutive gaps stay within epsilon.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(n, kNone);
  std::size_t clusters = 0;
  std::size_t last_core = kNone;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    if (last_core == kNone || value(i) - value(last_core) > epsilon) ++clusters;
    label[i] = clusters - 1;
    last_core = i;
  }

  // A border point joins the lowest cluster with a core in reach: the nearest
  // core on its left if within epsilon, else the nearest on its right.
  std::vector<std::size_t> left_core(n, kNone), right_core(n, kNone);
  for (std::size_t i = 0, last = kNone; i < n; ++i) {
    if (core[i]) last = i;
    left_core[i] = last;
  }
  for (std::size_t i = n, next = kNone; i-- > 0;) {
    if (core[i]) next = i;
    right_core[i] = next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    if (left_core[i] != kNone && value(i) - value(left_core[i]) <= epsilon) {
      label[i] = label[left_core[i]];
    } else if (right_core[i] != kNone && value(right_core[i]) - value(i) <= epsilon) {
      label[i] = label[right_core[i]];
    }
  }

  result.clusters.resize(clusters);
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == kNone) {
      result.noise.push_back(order[i]);
    } else {
      result.clusters[label[i]].push_back(order[i]);
    }
  }
  std::sort(result.noise.begin(), result.noise.end());
  return result;
}

std::vector<DomainCluster> recursive_cluster(const BipartiteGraph& g, const ClusteringConfig& cfg,
                                             std::size_t partition_index) {
  cfg.validate();
  struct Node {
    BipartiteGraph graph;
    std::size_t depth;
  };

  std::vector<DomainCluster> out;
  auto emit = [&](const BipartiteGraph& h, std::size_t depth) {
    DomainCluster c;
    c.members = h.domains();
    c.ip_set = h.ips();
    c.provenance.push_back(Provenance{partition_index, depth});
    out.push_back(std::move(c));
  };

  std::vector<Node> stack;
  stack.push_back(Node{g, 0});
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    const BipartiteGraph& h = node.graph;
    const std::size_t k = h.domain_count();
    if (k < cfg.min_cluster_size) continue;

    std::vector<std::vector<std::size_t>> children = h.connected_components();
    if (children.size() == 1) {
      if (h.fully_connected()) {
        emit(h, node.depth);
        continue;
      }
      DominantEigen eig = dominant_eigenvector(h);
      // Scale so the largest entry is 1; epsilon is then relative to [0, 1].
      const Eigen::VectorXd feature = eig.vector / eig.vector.maxCoeff();
      DbscanResult db = dbscan_1d(std::span<const double>(feature.data(), k), cfg.epsilon,
                                  cfg.min_pts);
      if (db.clusters.size() == 1 && db.clusters.front().size() == k) {
        emit(h, node.depth);
        continue;
      }
      children = std::move(db.clusters);
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it) {
      if (it->size() < cfg.min_cluster_size) continue;
      stack.push_back(Node{h.subgraph(*it), node.depth + 1});
    }
  }
  return out;
}

std::vector<std::vector<Domain>> partition_dataset(std::span<const Domain> domains,
                                                   const ClusteringConfig& cfg) {
  const std::size_t total = domains.size();
  const std::size_t parts =
      std::max<std::size_t>(1, (total + cfg.partition_budget - 1) / cfg.partition_budget);
  std::vector<std::vector<Domain>> out;
  if (parts == 1) {
    out.emplace_back(domains.begin(), domains.end());
    return out;
  }
  std::vector<Domain> shuffled(domains.begin(), domains.end());
  Rng rng(cfg.rng_seed);
  rng.shuffle(shuffled);
  const std::size_t base = total / parts;
  const std::size_t extra = total % parts;
  std::size_t at = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    std::vector<Domain> part(std::make_move_iterator(shuffled.begin() + static_cast<std::ptrdiff_t>(at)),
                             std::make_move_iterator(shuffled.begin() + static_cast<std::ptrdiff_t>(at + size)));
    std::sort(part.begin(), part.end());
    out.push_back(std::move(part));
    at += size;
  }
  return out;
}

std::vector<DomainCluster> prune_clusters(std::vector<DomainCluster> clusters, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  std::erase_if(clusters, [gamma](const DomainCluster& c) { return c.ip_ratio() > gamma; });
  return clusters;
}

std::vector<DomainCluster> merge_clusters(std::vector<DomainCluster> clusters) {
  DisjointSets sets(clusters.size());
  std::unordered_map<std::uint32_t, std::size_t> owner;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (const auto& ip : clusters[i].ip_set) {
      auto [it, fresh] = owner.emplace(ip.value, i);
      if (!fresh) sets.unite(it->second, i);
    }
  }

  std::vector<DomainCluster> merged;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const std::size_t root = sets.find(i);
    auto [it, fresh] = slot.emplace(root, merged.size());
    if (fresh) {
      merged.push_back(std::move(clusters[i]));
      continue;
    }
    DomainCluster& into = merged[it->second];
    DomainCluster& from = clusters[i];
    into.members.insert(into.members.end(), std::make_move_iterator(from.members.begin()),
                        std::make_move_iterator(from.members.end()));
    into.ip_set.insert(into.ip_set.end(), from.ip_set.begin(), from.ip_set.end());
    into.provenance.insert(into.provenance.end(), from.provenance.begin(), from.provenance.end());
    if (!into.label && from.label) into.label = from.label;
  }
  for (auto& c : merged) {
    std::sort(c.members.begin(), c.members.end());
    c.members.erase(std::unique(c.members.begin(), c.members.end()), c.members.end());
    std::sort(c.ip_set.begin(), c.ip_set.end());
    c.ip_set.erase(std::unique(c.ip_set.begin(), c.ip_set.end()), c.ip_set.end());
  }
  return merged;
}

ClusteringOutcome cluster_agds(const BipartiteGraph& g, const ClusteringConfig& cfg) {
  cfg.validate();
  ClusteringOutcome outcome;
  const auto parts = partition_dataset(g.domains(), cfg);
  outcome.partitions = parts.size();

  std::vector<std::future<std::vector<DomainCluster>>> jobs;
  if (parts.size() == 1) {
    outcome.raw = recursive_cluster(g, cfg, 0);
  } else {
    const auto& all = g.domains();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::vector<std::size_t> indices;
      indices.reserve(parts[i].size());
      for (const auto& d : parts[i]) {
        indices.push_back(static_cast<std::size_t>(
            std::lower_bound(all.begin(), all.end(), d) - all.begin()));
      }
      jobs.push_back(std::async(std::launch::async, [&g, &cfg, i, indices = std::move(indices)] {
        return recursive_cluster(g.subgraph(indices), cfg, i);
      }));
    }
    for (auto& job : jobs) {
      auto part = job.get();
      outcome.raw.insert(outcome.raw.end(), std::make_move_iterator(part.begin()),
                         std::make_move_iterator(part.end()));
    }
  }

  auto kept = prune_clusters(outcome.raw, cfg.gamma);
  outcome.after_prune = kept.size();
  outcome.merged = merge_clusters(std::move(kept));
  return outcome;
}

}  // namespace dgatrack
