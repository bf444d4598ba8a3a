#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "dgatrack/clustering.hpp"
#include "dgatrack/errors.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dgatrack;
using testing::dom;

namespace {

DnsRecord rec(const std::string& d, const std::string& ip) {
  return DnsRecord{0, dom(d), *Ipv4::parse(ip), 1};
}

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& m) { return Eigen::MatrixXd(m); }

/// Records for `count` domains named prefix<i>.com that each resolve to the whole pool.
std::vector<DnsRecord> block(const std::string& prefix, std::size_t count, const std::vector<Ipv4>& pool) {
  std::vector<DnsRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Domain d = dom(prefix + std::to_string(i) + ".com");
    for (const auto& ip : pool) out.push_back(DnsRecord{0, d, ip, 1});
  }
  return out;
}

DomainCluster cluster_of(std::size_t domains, std::vector<std::string> ips, const std::string& tag) {
  DomainCluster c;
  for (std::size_t i = 0; i < domains; ++i) c.members.push_back(dom(tag + std::to_string(i) + ".com"));
  for (const auto& ip : ips) c.ip_set.push_back(*Ipv4::parse(ip));
  std::sort(c.ip_set.begin(), c.ip_set.end());
  return c;
}

}  // namespace

TEST_CASE("bipartite graph construction") {
  SUBCASE("shared IP") {
    auto g = BipartiteGraph::build(std::vector{rec("a.com", "1.1.1.1"), rec("b.com", "1.1.1.1")});
    CHECK(dense(g.incidence()).isApprox((Eigen::MatrixXd(1, 2) << 0.5, 0.5).finished()));
  }
  SUBCASE("exclusive IPs") {
    auto g = BipartiteGraph::build(std::vector{rec("a.com", "1.1.1.1"), rec("b.com", "2.2.2.2")});
    CHECK(dense(g.incidence()).isApprox(Eigen::MatrixXd::Identity(2, 2)));
  }
  SUBCASE("three domains and a second IP") {
    auto g = BipartiteGraph::build(std::vector{rec("a.com", "1.1.1.1"), rec("b.com", "1.1.1.1"),
                                               rec("c.com", "1.1.1.1"), rec("c.com", "2.2.2.2")});
    Eigen::MatrixXd expected(2, 3);
    expected << 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 0, 1;
    CHECK(dense(g.incidence()).isApprox(expected));
  }
  SUBCASE("duplicates collapse and unlisted domains are ignored") {
    std::vector records{rec("a.com", "1.1.1.1"), rec("a.com", "1.1.1.1"), rec("b.com", "1.1.1.1"),
                        rec("z.com", "1.1.1.1")};
    std::vector<Domain> listed{dom("a.com"), dom("b.com"), dom("q.com")};
    auto g = BipartiteGraph::build(records, listed);
    CHECK(g.domain_count() == 2);
    CHECK(g.ip_count() == 1);
    CHECK(dense(g.incidence()).isApprox((Eigen::MatrixXd(1, 2) << 0.5, 0.5).finished()));
  }
  SUBCASE("empty") {
    CHECK_THROWS_AS(BipartiteGraph::build(std::vector<DnsRecord>{}), EmptyGraphError);
  }
}

TEST_CASE("similarity matrix examples") {
  SUBCASE("single shared exclusive IP") {
    auto g = BipartiteGraph::build(std::vector{rec("a.com", "1.1.1.1"), rec("b.com", "1.1.1.1")});
    CHECK(similarity_matrix(g).isApprox(Eigen::MatrixXd::Ones(2, 2)));
  }
  SUBCASE("disjoint IPs") {
    auto g = BipartiteGraph::build(std::vector{rec("a.com", "1.1.1.1"), rec("b.com", "2.2.2.2")});
    auto s = similarity_matrix(g);
    CHECK(s(0, 1) == 0.0);
    CHECK(s(1, 0) == 0.0);
  }
  SUBCASE("hand-normalised pair") {
    auto g = BipartiteGraph::build(std::vector{rec("a.com", "1.1.1.1"), rec("a.com", "2.2.2.2"),
                                               rec("b.com", "2.2.2.2")});
    CHECK(std::abs(similarity_matrix(g)(0, 1) - 1.0 / 3.0) < 1e-15);
  }
}

TEST_CASE("graph and similarity invariants on random graphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto edges = oracle::random_connected(rng, 2 + rng() % 49, 1 + rng() % 30);
    const auto g = BipartiteGraph::build(oracle::records_of(edges, testing::suffixes()));
    const Eigen::MatrixXd m = dense(g.incidence());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const auto nz = (m.row(r).array() > 0).count();
      REQUIRE(nz > 0);
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m(r, c) > 0) CHECK(m(r, c) == doctest::Approx(1.0 / static_cast<double>(nz)));
      }
    }
    const Eigen::MatrixXd n = dense(g.normalized_incidence());
    for (Eigen::Index c = 0; c < n.cols(); ++c) CHECK(std::abs(n.col(c).sum() - 1.0) < 1e-9);

    const Eigen::MatrixXd s = similarity_matrix(g);
    CHECK((s - oracle::dense_similarity(edges)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(s.minCoeff() >= 0.0);
    CHECK(s.maxCoeff() <= 1.0 + 1e-12);
    CHECK(s.diagonal().minCoeff() > 0.0);
    for (int v = 0; v < 5; ++v) {
      const Eigen::VectorXd x = Eigen::VectorXd::Random(s.rows());
      CHECK(x.dot(s * x) >= -1e-12);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    CHECK(solver.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("dominant eigenvector examples") {
  SUBCASE("identity keeps the start vector") {
    auto r = dominant_eigenvector(Eigen::MatrixXd::Identity(3, 3));
    CHECK((r.vector - Eigen::VectorXd::Constant(3, 1.0 / std::sqrt(3.0))).norm() < 1e-12);
  }
  SUBCASE("rank one") {
    auto r = dominant_eigenvector(Eigen::MatrixXd::Ones(2, 2));
    CHECK((r.vector - Eigen::VectorXd::Constant(2, 1.0 / std::sqrt(2.0))).norm() < 1e-12);
    CHECK(r.eigenvalue == doctest::Approx(2.0));
  }
  SUBCASE("block diagonal picks the larger block") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(5, 5);
    s.topLeftCorner(3, 3).setOnes();
    s.bottomRightCorner(2, 2).setOnes();
    auto r = dominant_eigenvector(s);
    const auto t = oracle::top_eigen(s);
    CHECK((r.vector - t.vector).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.vector(3) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(r.vector(0) == doctest::Approx(r.vector(2)));
  }
  SUBCASE("iteration limit reports an eigengap") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(5, 5);
    s.topLeftCorner(3, 3).setOnes();
    s.bottomRightCorner(2, 2).setOnes();
    try {
      dominant_eigenvector(s, PowerIterationOptions{1e-10, 5});
      FAIL("expected IterationLimitError");
    } catch (const IterationLimitError& e) {
      CHECK(e.eigengap() == doctest::Approx(1.0).epsilon(0.3));
    }
  }
}

TEST_CASE("dominant eigenvector matches a dense eigen-decomposition") {
  std::mt19937_64 rng(99);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto edges = oracle::random_connected(rng, 2 + rng() % 49, 1 + rng() % 30);
    const auto g = BipartiteGraph::build(oracle::records_of(edges, testing::suffixes()));
    const Eigen::MatrixXd s = similarity_matrix(g);
    const auto t = oracle::top_eigen(s);
    if (t.second / t.value > 0.99) continue;  // ill-separated; tolerance not meaningful
    ++compared;
    const auto dense_r = dominant_eigenvector(s);
    const auto sparse_r = dominant_eigenvector(g);
    CHECK((dense_r.vector - t.vector).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((sparse_r.vector - t.vector).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(dense_r.vector.norm() - 1.0) < 1e-12);
    CHECK(dense_r.eigenvalue == doctest::Approx(t.value).epsilon(1e-8));
  }
  CHECK(compared >= 150);
}

TEST_CASE("dbscan examples") {
  SUBCASE("identical features") {
    std::vector<double> x(6, 0.3);
    auto r = dbscan_1d(x, 0.1, 4);
    REQUIRE(r.clusters.size() == 1);
    CHECK(r.clusters[0].size() == 6);
    CHECK(r.noise.empty());
  }
  SUBCASE("two groups") {
    std::vector<double> x{0, 0.01, 0.02, 0.9, 0.91, 0.92};
    auto r = dbscan_1d(x, 0.1, 2);
    REQUIRE(r.clusters.size() == 2);
    CHECK(r.clusters[0] == std::vector<std::size_t>{0, 1, 2});
    CHECK(r.clusters[1] == std::vector<std::size_t>{3, 4, 5});
  }
  SUBCASE("lonely point") {
    std::vector<double> x{0.5};
    auto r = dbscan_1d(x, 0.1, 4);
    CHECK(r.clusters.empty());
    CHECK(r.noise == std::vector<std::size_t>{0});
  }
  SUBCASE("empty input") {
    auto r = dbscan_1d(std::vector<double>{}, 0.1, 4);
    CHECK(r.clusters.empty());
    CHECK(r.noise.empty());
  }
}

TEST_CASE("dbscan matches the textbook algorithm on random inputs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const bool grid = trial % 2 == 0;  // multiples of 0.05 produce ties and exact-epsilon gaps
    std::vector<double> x(n);
    for (auto& v : x) v = grid ? static_cast<double>(rng() % 21) * 0.05 : unit(rng);
    const double eps = std::vector<double>{0.02, 0.05, 0.1, 0.2}[rng() % 4];
    const std::size_t min_pts = 1 + rng() % 6;
    const auto got = dbscan_1d(x, eps, min_pts);
    const auto want = oracle::dbscan(x, eps, min_pts);
    REQUIRE(got.clusters.size() == want.clusters.size());
    for (std::size_t c = 0; c < got.clusters.size(); ++c) {
      std::set<std::size_t> a(got.clusters[c].begin(), got.clusters[c].end());
      std::set<std::size_t> b(want.clusters[c].begin(), want.clusters[c].end());
      CHECK(a == b);
    }
    CHECK(got.noise == want.noise);
  }
}

TEST_CASE("recursive clustering") {
  ClusteringConfig cfg;
  SUBCASE("two disjoint botnets") {
    auto records = block("alpha", 50, testing::ip_range("10.0.0.1", 5));
    auto more = block("beta", 50, testing::ip_range("10.9.0.1", 3));
    records.insert(records.end(), more.begin(), more.end());
    const auto g = BipartiteGraph::build(records);
    const auto out = recursive_cluster(g, cfg);
    REQUIRE(out.size() == 2);
    std::set<std::string> prefixes;
    for (const auto& c : out) {
      CHECK(c.members.size() == 50);
      const std::string head = c.members.front().chosen_prefix.substr(0, 4);
      for (const auto& m : c.members) CHECK(m.chosen_prefix.substr(0, 4) == head);
      prefixes.insert(head);
    }
    CHECK(prefixes == std::set<std::string>{"alph", "beta"});
  }
  SUBCASE("too small") {
    const auto g = BipartiteGraph::build(block("tiny", 10, testing::ip_range("10.0.0.1", 2)));
    CHECK(recursive_cluster(g, cfg).empty());
  }
  SUBCASE("fully connected stops at the root") {
    const auto g = BipartiteGraph::build(block("dense", 30, testing::ip_range("10.0.0.1", 4)));
    CHECK(g.fully_connected());
    const auto out = recursive_cluster(g, cfg);
    REQUIRE(out.size() == 1);
    CHECK(out[0].members.size() == 30);
    CHECK(out[0].ip_set.size() == 4);
    REQUIRE(out[0].provenance.size() == 1);
    CHECK(out[0].provenance[0].depth == 0);
  }
  SUBCASE("outputs are disjoint and carry their members' IPs") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
      BotnetScenario s = testing::three_botnets(rng(), 150);
      s.clusters[0].ips_per_domain = 3;
      const auto gen = generate_scenario(s, testing::suffixes());
      const auto g = BipartiteGraph::build(gen.records);
      const auto out = recursive_cluster(g, cfg);
      std::map<std::string, std::set<Ipv4>> resolved;
      for (const auto& r : gen.records) resolved[r.domain.raw].insert(r.ip);
      std::set<std::string> seen;
      for (const auto& c : out) {
        CHECK(c.members.size() >= cfg.min_cluster_size);
        std::set<Ipv4> ips;
        for (const auto& m : c.members) {
          CHECK(seen.insert(m.raw).second);
          ips.insert(resolved[m.raw].begin(), resolved[m.raw].end());
        }
        CHECK(std::vector<Ipv4>(ips.begin(), ips.end()) == c.ip_set);
      }
    }
  }
}

TEST_CASE("partitioning") {
  auto names = [](std::size_t n) {
    std::vector<Domain> out;
    for (std::size_t i = 0; i < n; ++i) {
      Domain d;
      d.raw = "p" + std::to_string(i) + ".com";
      d.chosen_prefix = "p" + std::to_string(i);
      d.etld = "com";
      out.push_back(d);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  ClusteringConfig cfg;
  SUBCASE("a single partition is the input") {
    const auto d = names(100);
    const auto parts = partition_dataset(d, cfg);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0] == d);
  }
  SUBCASE("three balanced partitions") {
    const auto d = names(45000);
    const auto parts = partition_dataset(d, cfg);
    REQUIRE(parts.size() == 3);
    std::set<std::string> all;
    for (const auto& p : parts) {
      CHECK(std::abs(static_cast<long>(p.size()) - 15000) <= 1);
      CHECK(std::is_sorted(p.begin(), p.end()));
      for (const auto& x : p) all.insert(x.raw);
    }
    CHECK(all.size() == 45000);
  }
  SUBCASE("seeded") {
    const auto d = names(5000);
    cfg.partition_budget = 1000;
    const auto a = partition_dataset(d, cfg);
    const auto b = partition_dataset(d, cfg);
    CHECK(a == b);
    cfg.rng_seed = 1;
    CHECK(partition_dataset(d, cfg) != a);
    for (std::size_t total = 1; total < 40; ++total) {
      cfg.partition_budget = 7;
      const auto parts = partition_dataset(names(total), cfg);
      CHECK(parts.size() == (total + 6) / 7);
    }
  }
}

TEST_CASE("pruning") {
  const auto wide = cluster_of(30, {}, "w");
  auto with_ips = [](DomainCluster c, std::size_t n) {
    c.ip_set = testing::ip_range("10.0.0.1", n);
    return c;
  };
  const auto ratio3 = with_ips(wide, 90);
  const auto narrow = with_ips(cluster_of(100, {}, "n"), 3);
  const auto exact = with_ips(cluster_of(10, {}, "e"), 28);
  CHECK(prune_clusters({ratio3}, 2.8).empty());
  CHECK(prune_clusters({narrow}, 2.8).size() == 1);
  CHECK(prune_clusters({exact}, 2.8).size() == 1);
  const auto once = prune_clusters({ratio3, narrow, exact}, 2.8);
  CHECK(testing::memberships(prune_clusters(once, 2.8)) == testing::memberships(once));
  CHECK_THROWS_AS(prune_clusters({narrow}, 0.0), DomainError);
}

TEST_CASE("merging") {
  SUBCASE("shared address") {
    auto out = merge_clusters({cluster_of(2, {"1.0.0.1", "1.0.0.2"}, "a"), cluster_of(2, {"1.0.0.2", "1.0.0.3"}, "b"),
                               cluster_of(2, {"1.0.0.9"}, "c")});
    REQUIRE(out.size() == 2);
    CHECK(out[0].members.size() == 4);
    CHECK(out[0].ip_set.size() == 3);
    CHECK(out[1].ip_set.size() == 1);
  }
  SUBCASE("chain") {
    auto out = merge_clusters({cluster_of(1, {"1.0.0.1", "1.0.0.2"}, "a"), cluster_of(1, {"1.0.0.2", "1.0.0.3"}, "b"),
                               cluster_of(1, {"1.0.0.3", "1.0.0.4"}, "c")});
    REQUIRE(out.size() == 1);
    CHECK(out[0].members.size() == 3);
    CHECK(out[0].ip_set.size() == 4);
  }
  SUBCASE("disjoint clusters are unchanged") {
    std::vector in{cluster_of(2, {"1.0.0.1"}, "a"), cluster_of(2, {"1.0.0.2"}, "b")};
    CHECK(testing::memberships(merge_clusters(in)) == testing::memberships(in));
  }
  SUBCASE("random inputs against iterated pairwise merging") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<DomainCluster> in;
      const std::size_t n = 1 + rng() % 12;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> ips;
        for (std::size_t k = 0; k < 1 + rng() % 3; ++k) ips.push_back("1.0.0." + std::to_string(rng() % 25));
        in.push_back(cluster_of(1 + rng() % 3, ips, "t" + std::to_string(i) + "x"));
      }
      // Literal fixed point of the pairwise rule.
      auto naive = in;
      for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t a = 0; a < naive.size() && !changed; ++a) {
          for (std::size_t b = a + 1; b < naive.size() && !changed; ++b) {
            std::vector<Ipv4> common;
            std::set_intersection(naive[a].ip_set.begin(), naive[a].ip_set.end(), naive[b].ip_set.begin(),
                                  naive[b].ip_set.end(), std::back_inserter(common));
            if (common.empty()) continue;
            naive[a].members.insert(naive[a].members.end(), naive[b].members.begin(), naive[b].members.end());
            std::set<Ipv4> u(naive[a].ip_set.begin(), naive[a].ip_set.end());
            u.insert(naive[b].ip_set.begin(), naive[b].ip_set.end());
            naive[a].ip_set.assign(u.begin(), u.end());
            naive.erase(naive.begin() + static_cast<long>(b));
            changed = true;
          }
        }
      }
      const auto got = merge_clusters(in);
      CHECK(testing::memberships(got) == testing::memberships(naive));
      for (std::size_t a = 0; a < got.size(); ++a) {
        for (std::size_t b = a + 1; b < got.size(); ++b) {
          std::vector<Ipv4> common;
          std::set_intersection(got[a].ip_set.begin(), got[a].ip_set.end(), got[b].ip_set.begin(), got[b].ip_set.end(),
                                std::back_inserter(common));
          CHECK(common.empty());
        }
      }
      CHECK(testing::memberships(merge_clusters(got)) == testing::memberships(got));
    }
  }
}

TEST_CASE("partitioned clustering agrees with a single pass") {
  BotnetScenario s;
  s.seed = 3;
  s.clusters.push_back(testing::botnet(DgaSpec::preset(DgaKind::uniform_char), 1500, testing::ip_range("10.1.0.1", 5)));
  s.clusters.push_back(testing::botnet(DgaSpec::preset(DgaKind::hex32), 1500, testing::ip_range("10.2.0.1", 3)));
  s.noise_domains = 500;
  const auto gen = generate_scenario(s, testing::suffixes());
  const auto g = BipartiteGraph::build(gen.records);
  ClusteringConfig single;
  ClusteringConfig split = single;
  split.partition_budget = 1000;
  const auto a = cluster_agds(g, single);
  const auto b = cluster_agds(g, split);
  CHECK(a.partitions == 1);
  CHECK(b.partitions == 4);
  CHECK(a.merged.size() == 2);
  CHECK(testing::memberships(a.merged) == testing::memberships(b.merged));
}

TEST_CASE("configuration validation") {
  ClusteringConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epsilon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_cluster_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.gamma = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
