#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "dgatrack/domain.hpp"

namespace dgatrack {

struct ClusteringConfig {
  double epsilon = 0.1;
  std::size_t min_cluster_size = 25;
  std::size_t min_pts = 4;
  double gamma = 2.0;
  std::size_t partition_budget = 20000;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Domain-to-IP bipartite graph. Domains are sorted by name, IPs by value;
/// every domain has at least one IP and every IP at least one domain.
class BipartiteGraph {
 public:
  /// Keeps the listed domains that appear in `records`; domains without any
  /// record are left out. Duplicate (domain, ip) pairs collapse to one edge.
  /// Throws EmptyGraphError when no edge remains.
  static BipartiteGraph build(std::span<const DnsRecord> records, std::span<const Domain> domains);
  /// Uses every domain that appears in `records`.
  static BipartiteGraph build(std::span<const DnsRecord> records);

  std::size_t domain_count() const noexcept { return domains_.size(); }
  std::size_t ip_count() const noexcept { return ips_.size(); }
  const std::vector<Domain>& domains() const noexcept { return domains_; }
  const std::vector<Ipv4>& ips() const noexcept { return ips_; }
  /// Sorted IP indices per domain.
  const std::vector<std::vector<std::uint32_t>>& domain_ips() const noexcept { return domain_ips_; }
  /// Sorted domain indices per IP, i.e. D(l).
  const std::vector<std::vector<std::uint32_t>>& ip_domains() const noexcept { return ip_domains_; }

  /// M (L x K): M[l,k] = 1/|D(l)| when domain k resolved to IP l.
  Eigen::SparseMatrix<double> incidence() const;
  /// N: M with every column rescaled to sum 1.
  Eigen::SparseMatrix<double> normalized_incidence() const;

  /// Graph induced by a subset of domains (indices into domains()), with
  /// weights recomputed for the subset. Throws EmptyGraphError for an empty subset.
  BipartiteGraph subgraph(std::span<const std::size_t> domain_indices) const;

  /// True when every domain resolved to every IP, i.e. all entries of M are positive.
  bool fully_connected() const;

  /// Domain index sets of the connected components, each ascending, ordered
  /// by their smallest index.
  std::vector<std::vector<std::size_t>> connected_components() const;

 private:
  std::vector<Domain> domains_;
  std::vector<Ipv4> ips_;
  std::vector<std::vector<std::uint32_t>> domain_ips_;
  std::vector<std::vector<std::uint32_t>> ip_domains_;
};

/// Dense S = N^T N (K x K).
Eigen::MatrixXd similarity_matrix(const BipartiteGraph& g);

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

struct DominantEigen {
  Eigen::VectorXd vector;  // unit norm, largest-magnitude component positive
  double eigenvalue = 0.0;
  int iterations = 0;
};

/// Power iteration from the normalised all-ones vector. Stops when successive
/// iterates differ by less than the tolerance (2-norm). Throws
/// IterationLimitError, carrying an eigengap estimate, when it does not converge.
DominantEigen dominant_eigenvector(const Eigen::MatrixXd& s, const PowerIterationOptions& opts = {});
/// Same iteration on S = N^T N applied through the sparse incidence matrix.
DominantEigen dominant_eigenvector(const BipartiteGraph& g, const PowerIterationOptions& opts = {});

struct DbscanResult {
  /// Clusters in discovery order; indices within a cluster ascend by feature.
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> noise;  // ascending index
};

/// DBSCAN on scalars with metric |a - b|. A point is core when at least
/// `min_pts` points (itself included) lie within `epsilon`. Points are visited
/// in ascending feature order, ties by index, so border points go to the
/// lowest cluster that reaches them.
DbscanResult dbscan_1d(std::span<const double> features, double epsilon, std::size_t min_pts);

struct Provenance {
  std::size_t partition = 0;
  std::size_t depth = 0;
};

struct DomainCluster {
  std::vector<Domain> members;  // sorted by name
  std::vector<Ipv4> ip_set;     // sorted
  std::optional<std::string> label;
  std::vector<Provenance> provenance;

  double ip_ratio() const {
    return static_cast<double>(ip_set.size()) / static_cast<double>(members.size());
  }
};

/// Recursive spectral/DBSCAN clustering of one graph.
///
/// Each node of the recursion is split into connected components first. A
/// connected node is emitted when its incidence matrix is fully positive, or
/// when DBSCAN over the max-scaled dominant eigenvector returns a single
/// cluster holding every domain; otherwise each DBSCAN cluster is recursed on
/// (noise is dropped). Nodes below min_cluster_size are discarded.
std::vector<DomainCluster> recursive_cluster(const BipartiteGraph& g, const ClusteringConfig& cfg,
                                             std::size_t partition_index = 0);

/// Seeded split into ceil(|domains| / partition_budget) near-equal subsets.
/// A single partition is the input unchanged; otherwise each subset is sorted.
std::vector<std::vector<Domain>> partition_dataset(std::span<const Domain> domains,
                                                   const ClusteringConfig& cfg);

/// Drops clusters whose |IPs| / |domains| exceeds gamma.
std::vector<DomainCluster> prune_clusters(std::vector<DomainCluster> clusters, double gamma);

/// Merges clusters that share an IP until all ip_sets are disjoint
/// (connected components of the share-an-IP relation).
std::vector<DomainCluster> merge_clusters(std::vector<DomainCluster> clusters);

struct ClusteringOutcome {
  std::size_t partitions = 0;
  std::vector<DomainCluster> raw;     // all partitions, before pruning
  std::size_t after_prune = 0;
  std::vector<DomainCluster> merged;  // final clusters
};

/// Partition, cluster every partition, prune and merge.
ClusteringOutcome cluster_agds(const BipartiteGraph& g, const ClusteringConfig& cfg);

}  // namespace dgatrack
