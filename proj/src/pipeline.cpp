#include "dgatrack/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include "dgatrack/errors.hpp"
#include "dgatrack/fingerprint.hpp"
#include "dgatrack/hgd_filter.hpp"
#include "dgatrack/linguistics.hpp"
#include "dgatrack/serialization.hpp"
#include "dgatrack/synthetic.hpp"

namespace dgatrack {

namespace fs = std::filesystem;

namespace {

void require_artifact(const fs::path& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    throw MissingArtifactError("missing " + what + ": " + (path.empty() ? "<unset>" : path.string()));
  }
}

void require_input(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError("no " + what + " configured");
  if (!fs::exists(path)) throw IoError(what + " not found: " + path.string());
}

struct Context {
  SuffixDB suffixes;
  FeatureExtractor extractor;
};

Context load_context(const PipelineConfig& cfg) {
  require_input(cfg.paths.suffix_list, "public suffix list");
  require_input(cfg.paths.dictionary, "dictionary");
  return Context{load_public_suffix_list(cfg.paths.suffix_list),
                 FeatureExtractor(Dictionary::load(cfg.paths.dictionary))};
}

std::vector<LinguisticFeatures> extract_all(const FeatureExtractor& fx, const std::vector<Domain>& domains) {
  std::vector<LinguisticFeatures> out(domains.size());
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t chunk = (domains.size() + workers - 1) / workers;
  std::vector<std::future<void>> jobs;
  for (std::size_t start = 0; start < domains.size(); start += chunk) {
    const std::size_t end = std::min(domains.size(), start + chunk);
    jobs.push_back(std::async(std::launch::async, [&, start, end] {
      for (std::size_t i = start; i < end; ++i) out[i] = fx(domains[i]);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

std::vector<Domain> parse_lines(const std::vector<std::string>& lines, const SuffixDB& db,
                                std::size_t& skipped, std::ostream& log, const std::string& source) {
  std::vector<Domain> out;
  for (const auto& line : lines) {
    try {
      out.push_back(parse_domain(line, db));
    } catch (const Error& e) {
      ++skipped;
      log << "warning: " << source << ": skipping '" << line << "': " << e.what() << '\n';
    }
  }
  return out;
}

HgdModel load_model(const PipelineConfig& cfg) {
  require_artifact(cfg.model_path(), "model");
  return model_from_json(read_json_file(cfg.model_path()));
}

void ensure_output_dir(const PipelineConfig& cfg) { fs::create_directories(cfg.paths.output_dir); }

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string percent(std::size_t part, std::size_t whole) {
  if (whole == 0) return "0.0%";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * static_cast<double>(part) / static_cast<double>(whole));
  return buf;
}

fs::path resolve(const fs::path& base, const Json& value) {
  fs::path p = value.get<std::string>();
  return p.is_relative() ? base / p : p;
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

std::vector<std::string> cluster_ids(const Json& dump) {
  std::vector<std::string> ids;
  for (const auto& c : dump) ids.push_back(c.at("id").get<std::string>());
  return ids;
}

}  // namespace

PipelineConfig PipelineConfig::defaults(const fs::path& data_dir) {
  PipelineConfig cfg;
  cfg.paths.suffix_list = data_dir / "public_suffix_list.dat";
  cfg.paths.dictionary = data_dir / "words.txt";
  cfg.paths.hgd_corpus = data_dir / "hgd_corpus.txt";
  return cfg;
}

PipelineConfig PipelineConfig::load(const fs::path& file, const fs::path& data_dir) {
  PipelineConfig cfg = defaults(data_dir);
  Json j;
  try {
    j = read_json_file(file);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const fs::path base = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  try {
    reject_unknown(j, {"paths", "percentile_loose", "percentile_strict", "clustering", "report"}, "config");
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      reject_unknown(p, {"suffix_list", "dictionary", "hgd_corpus", "blacklist", "dns_records", "as_map",
                         "model", "fingerprint_db", "output_dir"},
                     "paths");
      auto set = [&](const char* key, fs::path& target) {
        if (p.contains(key)) target = resolve(base, p.at(key));
      };
      set("suffix_list", cfg.paths.suffix_list);
      set("dictionary", cfg.paths.dictionary);
      set("hgd_corpus", cfg.paths.hgd_corpus);
      set("blacklist", cfg.paths.blacklist);
      set("dns_records", cfg.paths.dns_records);
      set("as_map", cfg.paths.as_map);
      set("model", cfg.paths.model);
      set("fingerprint_db", cfg.paths.fingerprint_db);
      set("output_dir", cfg.paths.output_dir);
    }
    cfg.percentile_loose = j.value("percentile_loose", cfg.percentile_loose);
    cfg.percentile_strict = j.value("percentile_strict", cfg.percentile_strict);
    if (j.contains("clustering")) {
      const auto& c = j.at("clustering");
      reject_unknown(c, {"epsilon", "min_cluster_size", "min_pts", "gamma", "partition_budget", "seed"},
                     "clustering");
      auto& k = cfg.clustering;
      k.epsilon = c.value("epsilon", k.epsilon);
      k.min_cluster_size = c.value("min_cluster_size", k.min_cluster_size);
      k.min_pts = c.value("min_pts", k.min_pts);
      k.gamma = c.value("gamma", k.gamma);
      k.partition_budget = c.value("partition_budget", k.partition_budget);
      k.rng_seed = c.value("seed", k.rng_seed);
    }
    if (j.contains("report")) {
      const auto& r = j.at("report");
      reject_unknown(r, {"gamma_grid", "separation_feature", "granularity", "clusters"}, "report");
      if (r.contains("gamma_grid")) cfg.report.gamma_grid = r.at("gamma_grid").get<std::vector<double>>();
      if (r.contains("separation_feature")) {
        cfg.report.separation_feature = cluster_feature_from_string(r.at("separation_feature").get<std::string>());
      }
      if (r.contains("granularity")) {
        const auto g = r.at("granularity").get<std::string>();
        if (g == "ip_set") {
          cfg.report.granularity = Granularity::ip_set;
        } else if (g == "as_set") {
          cfg.report.granularity = Granularity::as_set;
        } else {
          throw ConfigError("unknown granularity '" + g + "'");
        }
      }
      if (r.contains("clusters")) cfg.report.clusters = r.at("clusters").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

fs::path PipelineConfig::model_path() const {
  return paths.model.empty() ? paths.output_dir / "model.json" : paths.model;
}
fs::path PipelineConfig::fingerprint_db_path() const {
  return paths.fingerprint_db.empty() ? paths.output_dir / "fingerprints.json" : paths.fingerprint_db;
}
fs::path PipelineConfig::clusters_path() const { return paths.output_dir / "clusters.json"; }
fs::path PipelineConfig::premerge_path() const { return paths.output_dir / "clusters_premerge.json"; }

void PipelineConfig::validate() const {
  auto ok = [](double p) { return p > 0.0 && p <= 100.0; };
  if (!ok(percentile_loose) || !ok(percentile_strict) || percentile_loose >= percentile_strict) {
    throw ConfigError("percentiles must satisfy 0 < loose < strict <= 100");
  }
  clustering.validate();
  if (report.gamma_grid.empty()) throw ConfigError("empty gamma grid");
  for (std::size_t i = 1; i < report.gamma_grid.size(); ++i) {
    if (!(report.gamma_grid[i] > report.gamma_grid[i - 1])) throw ConfigError("gamma grid must increase");
  }
}

ReportKind report_kind_from_string(std::string_view name) {
  if (name == "separation") return ReportKind::separation;
  if (name == "gamma") return ReportKind::gamma;
  if (name == "timeseries") return ReportKind::timeseries;
  if (name == "pca") return ReportKind::pca;
  throw ConfigError("unknown report kind '" + std::string(name) + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingArtifactError*>(&e)) return kExitMissingArtifact;
  if (dynamic_cast<const EmptyDiscoveryError*>(&e)) return kExitEmptyDiscovery;
  if (dynamic_cast<const Error*>(&e)) return kExitBadInput;
  return 1;
}

void cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Context ctx = load_context(cfg);
  require_input(cfg.paths.hgd_corpus, "HGD corpus");
  std::size_t skipped = 0;
  const auto domains = parse_lines(read_lines(cfg.paths.hgd_corpus), ctx.suffixes, skipped, log, "corpus");
  const auto features = extract_all(ctx.extractor, domains);
  const HgdModel model = train_model(features, cfg.percentile_loose, cfg.percentile_strict);
  ensure_output_dir(cfg);
  write_json_file(cfg.model_path(), model_to_json(model));
  log << "trained on " << model.training_size << " domains (" << skipped << " skipped)\n"
      << "lambda (loose, p" << model.percentile_loose << ") = " << model.lambda_loose << '\n'
      << "Lambda (strict, p" << model.percentile_strict << ") = " << model.lambda_strict << '\n';
  if (model.ridge_epsilon > 0.0) log << "covariance ridge " << model.ridge_epsilon << " applied\n";
  log << "model written to " << cfg.model_path().string() << '\n';
}

void cmd_discover(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const HgdModel model = load_model(cfg);
  const Context ctx = load_context(cfg);
  require_input(cfg.paths.blacklist, "blacklist");
  require_input(cfg.paths.dns_records, "DNS records");

  const Blacklist blacklist = load_blacklist(cfg.paths.blacklist, ctx.suffixes);
  std::vector<Domain> listed;
  for (const auto& e : blacklist.entries) listed.push_back(e.domain);
  const auto features = extract_all(ctx.extractor, listed);
  std::vector<Domain> agds;
  for (std::size_t i = 0; i < listed.size(); ++i) {
    if (classify(model, features[i], ThresholdMode::strict).is_agd) agds.push_back(listed[i]);
  }
  log << "blacklist: " << listed.size() << " domains (" << blacklist.skipped << " unparseable)\n"
      << "strict filter: " << agds.size() << " pass (" << percent(agds.size(), listed.size()) << ")\n";
  if (agds.empty()) throw EmptyDiscoveryError("no blacklisted domain passed the strict filter");

  const RecordSet records = load_dns_records(cfg.paths.dns_records, ctx.suffixes);
  log << "records: " << records.records.size() << " (" << records.stats.skipped_ipv6 << " IPv6, "
      << records.stats.skipped_invalid << " invalid skipped)\n";
  BipartiteGraph graph;
  try {
    graph = BipartiteGraph::build(records.records, agds);
  } catch (const EmptyGraphError&) {
    throw EmptyDiscoveryError("no DNS records for the filtered domains");
  }
  log << "graph: " << graph.domain_count() << " domains, " << graph.ip_count() << " IPs\n";

  const ClusteringOutcome outcome = cluster_agds(graph, cfg.clustering);
  log << "partitions: " << outcome.partitions << '\n'
      << "clusters: " << outcome.raw.size() << " found, " << outcome.after_prune << " after pruning (gamma "
      << cfg.clustering.gamma << "), " << outcome.merged.size() << " after merging\n";

  ensure_output_dir(cfg);
  write_json_file(cfg.premerge_path(), clusters_to_json(outcome.raw));
  if (outcome.merged.empty()) throw EmptyDiscoveryError("no cluster survived pruning");

  std::vector<Fingerprint> db;
  for (std::size_t i = 0; i < outcome.merged.size(); ++i) {
    db.push_back(extract_fingerprint(outcome.merged[i], "C" + std::to_string(i + 1)));
  }
  write_json_file(cfg.clusters_path(), clusters_to_json(outcome.merged));
  write_json_file(cfg.fingerprint_db_path(), fingerprint_db_to_json(db));
  write_json_file(cfg.paths.output_dir / "discover_summary.json",
                  Json{{"blacklist_domains", listed.size()},
                       {"blacklist_skipped", blacklist.skipped},
                       {"strict_pass", agds.size()},
                       {"graph_domains", graph.domain_count()},
                       {"graph_ips", graph.ip_count()},
                       {"partitions", outcome.partitions},
                       {"clusters_found", outcome.raw.size()},
                       {"clusters_after_prune", outcome.after_prune},
                       {"clusters_after_merge", outcome.merged.size()}});
  log << "fingerprints written to " << cfg.fingerprint_db_path().string() << '\n';
}

void cmd_label(const PipelineConfig& cfg, const LabelOptions& opts, std::ostream& log) {
  cfg.validate();
  const HgdModel model = load_model(cfg);
  require_artifact(cfg.fingerprint_db_path(), "fingerprint database");
  const auto db = fingerprint_db_from_json(read_json_file(cfg.fingerprint_db_path()));
  const Context ctx = load_context(cfg);
  require_input(opts.queries, "query file");

  std::size_t skipped = 0;
  const auto queries = parse_lines(read_lines(opts.queries), ctx.suffixes, skipped, log, "queries");

  std::vector<LabelResult> results;
  results.reserve(queries.size());
  if (opts.query_records) {
    require_input(*opts.query_records, "query records");
    const RecordSet records = load_dns_records(*opts.query_records, ctx.suffixes);
    std::map<std::string, std::set<Ipv4>> resolved;
    for (const auto& r : records.records) resolved[r.domain.raw].insert(r.ip);
    for (const auto& q : queries) {
      std::vector<Ipv4> ips;
      if (auto it = resolved.find(q.raw); it != resolved.end()) ips.assign(it->second.begin(), it->second.end());
      results.push_back(label_domain(db, model, ctx.extractor, q, ips));
    }
  } else {
    for (const auto& q : queries) results.push_back(label_by_features_only(db, model, ctx.extractor, q));
  }

  std::map<Verdict, std::size_t> tally;
  ensure_output_dir(cfg);
  auto tsv = open_output(cfg.paths.output_dir / "label.tsv");
  tsv << "domain\tverdict\tdistance\tmatched_clusters\n";
  Json rows = Json::array();
  for (const auto& r : results) {
    ++tally[r.verdict];
    std::string matched;
    for (std::size_t i = 0; i < r.matched_clusters.size(); ++i) {
      if (i) matched += ',';
      matched += r.matched_clusters[i];
    }
    tsv << r.domain.raw << '\t' << to_string(r.verdict) << '\t' << r.distance << '\t' << matched << '\n';
    rows.push_back({{"domain", r.domain.raw},
                    {"verdict", to_string(r.verdict)},
                    {"distance", r.distance},
                    {"matched_clusters", r.matched_clusters}});
  }
  const Json summary{{"queries", results.size() + skipped},
                     {"skipped", skipped},
                     {"mode", opts.query_records ? "ip_evidence" : "features_only"},
                     {"not_agd", tally[Verdict::not_agd]},
                     {"agd_unmatched", tally[Verdict::agd_unmatched]},
                     {"matched", tally[Verdict::matched]}};
  write_json_file(cfg.paths.output_dir / "label.json", Json{{"summary", summary}, {"results", rows}});
  log << "labelled " << results.size() << " domains (" << skipped << " skipped): "
      << tally[Verdict::matched] << " matched, " << tally[Verdict::agd_unmatched] << " unmatched AGD, "
      << tally[Verdict::not_agd] << " not AGD\n";
}

void cmd_report(const PipelineConfig& cfg, ReportKind kind, std::ostream& log) {
  cfg.validate();
  ensure_output_dir(cfg);
  const auto& dir = cfg.paths.output_dir;
  switch (kind) {
    case ReportKind::separation: {
      require_artifact(cfg.clusters_path(), "cluster dump");
      require_artifact(cfg.paths.suffix_list, "public suffix list");
      const SuffixDB suffixes = load_public_suffix_list(cfg.paths.suffix_list);
      const Json dump = read_json_file(cfg.clusters_path());
      const auto clusters = clusters_from_json(dump, suffixes);
      const auto report = cluster_separation(clusters, cfg.report.separation_feature, cluster_ids(dump));
      for (const auto& w : report.warnings) log << "warning: " << w << '\n';
      write_json_file(dir / "report_separation.json", separation_to_json(report));
      auto tsv = open_output(dir / "report_separation.tsv");
      tsv << "cluster_a\tcluster_b\tp_value\n";
      for (std::size_t i = 0; i < report.p_values.size(); ++i) {
        for (std::size_t k = 0; k < report.p_values[i].size(); ++k) {
          tsv << report.cluster_ids[i] << '\t' << report.cluster_ids[k] << '\t' << report.p_values[i][k] << '\n';
        }
      }
      log << "separation over " << report.cluster_ids.size() << " clusters (" << report.feature_name << ")\n";
      break;
    }
    case ReportKind::gamma: {
      require_artifact(cfg.premerge_path(), "pre-merge cluster dump");
      require_artifact(cfg.paths.suffix_list, "public suffix list");
      const SuffixDB suffixes = load_public_suffix_list(cfg.paths.suffix_list);
      const auto clusters = clusters_from_json(read_json_file(cfg.premerge_path()), suffixes);
      const auto curve = gamma_sensitivity(clusters, cfg.report.gamma_grid);
      write_json_file(dir / "report_gamma.json", sensitivity_to_json(curve));
      auto tsv = open_output(dir / "report_gamma.tsv");
      tsv << "gamma\tclusters\tentropy_prefix_length\tentropy_numeric_ratio\tentropy_suffix\tentropy_mean\n";
      for (std::size_t i = 0; i < curve.gamma_grid.size(); ++i) {
        tsv << curve.gamma_grid[i] << '\t' << curve.cluster_counts[i] << '\t'
            << curve.avg_entropy.at("prefix_length")[i] << '\t' << curve.avg_entropy.at("numeric_ratio")[i]
            << '\t' << curve.avg_entropy.at("suffix")[i] << '\t' << curve.mean_entropy[i] << '\n';
      }
      log << "gamma sensitivity over " << curve.gamma_grid.size() << " values\n";
      break;
    }
    case ReportKind::timeseries: {
      require_artifact(cfg.clusters_path(), "cluster dump");
      require_artifact(cfg.paths.dns_records, "DNS records");
      require_artifact(cfg.paths.suffix_list, "public suffix list");
      std::optional<AsMap> as_map;
      if (cfg.report.granularity == Granularity::as_set) {
        require_artifact(cfg.paths.as_map, "AS map");
        as_map = AsMap::load(cfg.paths.as_map);
      }
      const SuffixDB suffixes = load_public_suffix_list(cfg.paths.suffix_list);
      const Json dump = read_json_file(cfg.clusters_path());
      const auto clusters = clusters_from_json(dump, suffixes);
      const auto ids = cluster_ids(dump);
      DomainCluster selected;
      for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto& wanted = cfg.report.clusters;
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), ids[i]) == wanted.end()) continue;
        selected.members.insert(selected.members.end(), clusters[i].members.begin(), clusters[i].members.end());
      }
      for (const auto& id : cfg.report.clusters) {
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw ConfigError("unknown cluster id " + id);
      }
      const RecordSet records = load_dns_records(cfg.paths.dns_records, suffixes);
      const auto series = activity_time_series(selected, records.records, cfg.report.granularity,
                                               as_map ? &*as_map : nullptr);
      write_json_file(dir / "report_timeseries.json", time_series_to_json(series));
      auto tsv = open_output(dir / "report_timeseries.tsv");
      tsv << "partition\tday\trequests\n";
      for (const auto& ts : series) {
        for (const auto& [day, n] : ts.buckets) tsv << ts.partition_key << '\t' << day << '\t' << n << '\n';
      }
      log << series.size() << " time series over " << selected.members.size() << " domains\n";
      break;
    }
    case ReportKind::pca: {
      const HgdModel model = load_model(cfg);
      const Context ctx = load_context(cfg);
      require_artifact(cfg.paths.hgd_corpus, "HGD corpus");
      std::size_t skipped = 0;
      const auto domains = parse_lines(read_lines(cfg.paths.hgd_corpus), ctx.suffixes, skipped, log, "corpus");
      const auto projection = pca_project_2d(model, extract_all(ctx.extractor, domains));
      if (projection.low_variance_warning) {
        log << "warning: projection keeps only " << projection.variance_preserved << " of the variance\n";
      }
      write_json_file(dir / "report_pca.json", pca_to_json(projection));
      auto tsv = open_output(dir / "report_pca.tsv");
      tsv << "domain\tx\ty\n";
      for (std::size_t i = 0; i < domains.size(); ++i) {
        tsv << domains[i].raw << '\t' << projection.points[i][0] << '\t' << projection.points[i][1] << '\n';
      }
      log << "PCA: variance preserved " << projection.variance_preserved << '\n';
      break;
    }
  }
}

void cmd_generate_scenario(const fs::path& scenario, const PipelineConfig& cfg, std::ostream& log) {
  const BotnetScenario s = scenario_from_json(read_json_file(scenario));
  const Context ctx = load_context(cfg);
  const ScenarioOutput out = generate_scenario(s, ctx.suffixes, &ctx.extractor.dictionary());
  ensure_output_dir(cfg);
  const auto& dir = cfg.paths.output_dir;
  {
    auto records = open_output(dir / "records.tsv");
    write_dns_records(records, out.records);
  }
  auto blacklist = open_output(dir / "blacklist.txt");
  auto truth = open_output(dir / "truth.tsv");
  truth << "domain\tcluster\tlabel\n";
  for (const auto& [domain, index] : out.truth) {
    blacklist << domain << '\n';
    const std::string label = index >= 0 ? s.clusters[static_cast<std::size_t>(index)].label : "noise";
    truth << domain << '\t' << index << '\t' << label << '\n';
  }
  log << "scenario: " << out.truth.size() << " domains, " << out.records.size() << " records written to "
      << dir.string() << '\n';
}

}  // namespace dgatrack
