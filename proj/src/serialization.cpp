#include "dgatrack/serialization.hpp"

#include <algorithm>
#include <fstream>

#include "dgatrack/errors.hpp"

namespace dgatrack {

namespace {

template <typename F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid " + what + ": " + e.what());
  }
}

void check_version(const Json& j, const std::string& what) {
  const int version = j.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw ValidationError(what + " has format_version " + std::to_string(version) +
                          ", expected " + std::to_string(kFormatVersion));
  }
}

Ipv4 ip_from_json(const Json& j) {
  const auto ip = Ipv4::parse(j.get<std::string>());
  if (!ip) throw ValidationError("bad IPv4 address " + j.dump());
  return *ip;
}

std::vector<Ipv4> ip_list_from_json(const Json& j) {
  std::vector<Ipv4> out;
  for (const auto& item : j) out.push_back(ip_from_json(item));
  return out;
}

std::vector<Ipv4> ip_blocks_from_json(const Json& j) {
  std::vector<Ipv4> out;
  for (const auto& item : j) {
    try {
      auto block = expand_ip_block(item.get<std::string>());
      out.insert(out.end(), block.begin(), block.end());
    } catch (const ParseError& e) {
      throw ValidationError(e.what());
    }
  }
  return out;
}

Json ips_to_json(const std::vector<Ipv4>& ips) {
  Json out = Json::array();
  for (const auto& ip : ips) out.push_back(ip.to_string());
  return out;
}

template <int R, int C>
Json matrix_to_json(const Eigen::Matrix<double, R, C>& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::Matrix4d matrix4_from_json(const Json& j) {
  Eigen::Matrix4d m;
  if (j.size() != 4) throw ValidationError("expected a 4x4 matrix");
  for (int i = 0; i < 4; ++i) {
    if (j[i].size() != 4) throw ValidationError("expected a 4x4 matrix");
    for (int k = 0; k < 4; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

Json model_to_json(const HgdModel& m) {
  return Json{{"format_version", kFormatVersion},
              {"mu", {m.mu(0), m.mu(1), m.mu(2), m.mu(3)}},
              {"cov", matrix_to_json<4, 4>(m.cov)},
              {"cov_inv", matrix_to_json<4, 4>(m.cov_inv)},
              {"ridge_epsilon", m.ridge_epsilon},
              {"percentile_loose", m.percentile_loose},
              {"percentile_strict", m.percentile_strict},
              {"lambda_loose", m.lambda_loose},
              {"lambda_strict", m.lambda_strict},
              {"training_size", m.training_size},
              {"distances_quantized", m.distances_quantized},
              {"train_distances", m.train_distances}};
}

HgdModel model_from_json(const Json& j) {
  return guarded("model", [&] {
    check_version(j, "model");
    HgdModel m;
    const auto& mu = j.at("mu");
    if (mu.size() != 4) throw ValidationError("model mu must have 4 entries");
    for (int i = 0; i < 4; ++i) m.mu(i) = mu[i].get<double>();
    m.cov = matrix4_from_json(j.at("cov"));
    m.cov_inv = matrix4_from_json(j.at("cov_inv"));
    m.ridge_epsilon = j.at("ridge_epsilon").get<double>();
    m.percentile_loose = j.at("percentile_loose").get<double>();
    m.percentile_strict = j.at("percentile_strict").get<double>();
    m.lambda_loose = j.at("lambda_loose").get<double>();
    m.lambda_strict = j.at("lambda_strict").get<double>();
    m.training_size = j.at("training_size").get<std::size_t>();
    m.distances_quantized = j.at("distances_quantized").get<bool>();
    m.train_distances = j.at("train_distances").get<std::vector<double>>();
    if (!std::is_sorted(m.train_distances.begin(), m.train_distances.end())) {
      throw ValidationError("model distances are not sorted");
    }
    return m;
  });
}

Json fingerprint_to_json(const Fingerprint& fp) {
  return Json{{"cluster_id", fp.cluster_id},
              {"cnc_ips", ips_to_json(fp.cnc_ips)},
              {"prefix_len_range", {fp.prefix_len_range.first, fp.prefix_len_range.second}},
              {"charset", fp.charset_string()},
              {"numeric_ratio_range", {fp.numeric_ratio_range.first, fp.numeric_ratio_range.second}},
              {"suffix_set", fp.suffix_set},
              {"label", fp.label ? Json(*fp.label) : Json(nullptr)},
              {"member_count", fp.member_count}};
}

Fingerprint fingerprint_from_json(const Json& j) {
  return guarded("fingerprint", [&] {
    Fingerprint fp;
    fp.cluster_id = j.at("cluster_id").get<std::string>();
    fp.cnc_ips = ip_list_from_json(j.at("cnc_ips"));
    std::sort(fp.cnc_ips.begin(), fp.cnc_ips.end());
    const auto& len = j.at("prefix_len_range");
    fp.prefix_len_range = {len.at(0).get<std::size_t>(), len.at(1).get<std::size_t>()};
    fp.charset = Fingerprint::charset_of(j.at("charset").get<std::string>());
    const auto& ratio = j.at("numeric_ratio_range");
    fp.numeric_ratio_range = {ratio.at(0).get<double>(), ratio.at(1).get<double>()};
    fp.suffix_set = j.at("suffix_set").get<std::vector<std::string>>();
    std::sort(fp.suffix_set.begin(), fp.suffix_set.end());
    if (j.contains("label") && !j.at("label").is_null()) fp.label = j.at("label").get<std::string>();
    fp.member_count = j.value("member_count", std::size_t{0});

    if (fp.prefix_len_range.first > fp.prefix_len_range.second ||
        fp.numeric_ratio_range.first > fp.numeric_ratio_range.second ||
        fp.numeric_ratio_range.first < 0.0 || fp.numeric_ratio_range.second > 1.0) {
      throw ValidationError("fingerprint " + fp.cluster_id + " has an inverted range");
    }
    if (fp.charset.none() || fp.suffix_set.empty() || fp.cnc_ips.empty()) {
      throw ValidationError("fingerprint " + fp.cluster_id + " has an empty set");
    }
    return fp;
  });
}

Json fingerprint_db_to_json(const std::vector<Fingerprint>& db) {
  Json list = Json::array();
  for (const auto& fp : db) list.push_back(fingerprint_to_json(fp));
  return Json{{"format_version", kFormatVersion}, {"fingerprints", std::move(list)}};
}

std::vector<Fingerprint> fingerprint_db_from_json(const Json& j) {
  return guarded("fingerprint database", [&] {
    check_version(j, "fingerprint database");
    std::vector<Fingerprint> db;
    for (const auto& item : j.at("fingerprints")) db.push_back(fingerprint_from_json(item));
    return db;
  });
}

Json clusters_to_json(const std::vector<DomainCluster>& clusters) {
  Json out = Json::array();
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    Json members = Json::array();
    for (const auto& m : c.members) members.push_back(m.raw);
    Json provenance = Json::array();
    for (const auto& p : c.provenance) {
      provenance.push_back({{"partition", p.partition}, {"depth", p.depth}});
    }
    out.push_back({{"id", "C" + std::to_string(i + 1)},
                   {"members", std::move(members)},
                   {"ip_set", ips_to_json(c.ip_set)},
                   {"label", c.label ? Json(*c.label) : Json(nullptr)},
                   {"provenance", std::move(provenance)}});
  }
  return out;
}

std::vector<DomainCluster> clusters_from_json(const Json& j, const SuffixDB& db) {
  return guarded("cluster dump", [&] {
    std::vector<DomainCluster> out;
    for (const auto& item : j) {
      DomainCluster c;
      for (const auto& m : item.at("members")) {
        try {
          c.members.push_back(parse_domain(m.get<std::string>(), db));
        } catch (const ParseError& e) {
          throw ValidationError(std::string("cluster member: ") + e.what());
        } catch (const NoPrefixError& e) {
          throw ValidationError(std::string("cluster member: ") + e.what());
        }
      }
      std::sort(c.members.begin(), c.members.end());
      c.ip_set = ip_list_from_json(item.at("ip_set"));
      std::sort(c.ip_set.begin(), c.ip_set.end());
      if (item.contains("label") && !item.at("label").is_null()) {
        c.label = item.at("label").get<std::string>();
      }
      for (const auto& p : item.value("provenance", Json::array())) {
        c.provenance.push_back({p.at("partition").get<std::size_t>(), p.at("depth").get<std::size_t>()});
      }
      if (c.members.empty()) throw ValidationError("cluster without members");
      out.push_back(std::move(c));
    }
    return out;
  });
}

Json dga_spec_to_json(const DgaSpec& spec) {
  return Json{{"kind", to_string(spec.kind)},
              {"charset", spec.charset},
              {"len_range", {spec.len_range.first, spec.len_range.second}},
              {"suffixes", spec.suffixes},
              {"seed", spec.seed}};
}

DgaSpec dga_spec_from_json(const Json& j) {
  return guarded("DGA spec", [&] {
    DgaKind kind;
    try {
      kind = dga_kind_from_string(j.at("kind").get<std::string>());
    } catch (const ConfigError& e) {
      throw ValidationError(e.what());
    }
    DgaSpec spec = DgaSpec::preset(kind, j.value("seed", std::uint64_t{0}));
    if (j.contains("charset")) spec.charset = j.at("charset").get<std::string>();
    if (j.contains("len_range")) {
      const auto& r = j.at("len_range");
      spec.len_range = {r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()};
    }
    if (j.contains("suffixes")) spec.suffixes = j.at("suffixes").get<std::vector<std::string>>();
    spec.validate();
    return spec;
  });
}

Json scenario_to_json(const BotnetScenario& s) {
  Json clusters = Json::array();
  for (const auto& c : s.clusters) {
    Json timeline = Json::array();
    for (const auto& p : c.timeline) {
      timeline.push_back({{"days", {p.first_day, p.last_day}},
                          {"ip_subset", ips_to_json(p.ip_subset)},
                          {"request_rate", p.request_rate}});
    }
    clusters.push_back({{"dga", dga_spec_to_json(c.dga)},
                        {"domain_count", c.domain_count},
                        {"ip_pool", ips_to_json(c.ip_pool)},
                        {"ips_per_domain", c.ips_per_domain},
                        {"label", c.label},
                        {"timeline", std::move(timeline)}});
  }
  return Json{{"seed", s.seed},
              {"start_timestamp", s.start_timestamp},
              {"allow_overlap", s.allow_overlap},
              {"noise_domains", s.noise_domains},
              {"noise_dga", dga_spec_to_json(s.noise_dga)},
              {"clusters", std::move(clusters)}};
}

BotnetScenario scenario_from_json(const Json& j) {
  return guarded("scenario", [&] {
    BotnetScenario s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.start_timestamp = j.value("start_timestamp", s.start_timestamp);
    s.allow_overlap = j.value("allow_overlap", false);
    s.noise_domains = j.value("noise_domains", std::size_t{0});
    if (j.contains("noise_dga")) s.noise_dga = dga_spec_from_json(j.at("noise_dga"));
    for (const auto& item : j.value("clusters", Json::array())) {
      ScenarioCluster c;
      c.dga = dga_spec_from_json(item.at("dga"));
      c.domain_count = item.at("domain_count").get<std::size_t>();
      c.ip_pool = ip_blocks_from_json(item.at("ip_pool"));
      c.ips_per_domain = item.value("ips_per_domain", std::size_t{0});
      c.label = item.value("label", std::string());
      for (const auto& p : item.value("timeline", Json::array())) {
        TimelinePhase phase;
        phase.first_day = p.at("days").at(0).get<std::int64_t>();
        phase.last_day = p.at("days").at(1).get<std::int64_t>();
        phase.ip_subset = ip_blocks_from_json(p.at("ip_subset"));
        phase.request_rate = p.value("request_rate", std::uint64_t{1});
        c.timeline.push_back(std::move(phase));
      }
      s.clusters.push_back(std::move(c));
    }
    s.validate();
    return s;
  });
}

Json separation_to_json(const SeparationReport& r) {
  return Json{{"feature", r.feature_name},
              {"cluster_ids", r.cluster_ids},
              {"p_values", r.p_values},
              {"warnings", r.warnings}};
}

Json sensitivity_to_json(const SensitivityCurve& c) {
  return Json{{"gamma_grid", c.gamma_grid},
              {"cluster_counts", c.cluster_counts},
              {"avg_entropy", c.avg_entropy},
              {"mean_entropy", c.mean_entropy}};
}

Json time_series_to_json(const std::vector<TimeSeries>& series) {
  Json out = Json::array();
  for (const auto& ts : series) {
    Json buckets = Json::array();
    for (const auto& [day, count] : ts.buckets) buckets.push_back({{"day", day}, {"requests", count}});
    out.push_back({{"partition_key", ts.partition_key}, {"buckets", std::move(buckets)}});
  }
  return out;
}

Json pca_to_json(const PcaProjection& p) {
  Json points = Json::array();
  for (const auto& pt : p.points) points.push_back({pt[0], pt[1]});
  return Json{{"variance_preserved", p.variance_preserved},
              {"low_variance_warning", p.low_variance_warning},
              {"components", matrix_to_json<4, 2>(p.components)},
              {"points", std::move(points)}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dgatrack
