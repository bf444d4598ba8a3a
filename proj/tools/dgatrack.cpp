// Command-line front end: train, discover, label, report, generate.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dgatrack/errors.hpp"
#include "dgatrack/linguistics.hpp"
#include "dgatrack/pipeline.hpp"
#include "dgatrack/synthetic.hpp"

#ifndef DGATRACK_DATA_DIR
#define DGATRACK_DATA_DIR "data"
#endif

namespace {

using namespace dgatrack;

struct Overrides {
  std::string config;
  std::optional<std::string> suffix_list, dictionary, hgd_corpus, blacklist, dns_records, as_map, model,
      fingerprint_db, output_dir;
  std::optional<double> percentile_loose, percentile_strict, epsilon, gamma;
  std::optional<std::size_t> min_cluster_size, min_pts, partition_budget;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON configuration file");
    app->add_option("--suffix-list", suffix_list, "public suffix list");
    app->add_option("--dictionary", dictionary, "word list");
    app->add_option("--hgd-corpus", hgd_corpus, "benign domain corpus, one per line");
    app->add_option("--blacklist", blacklist, "blacklisted domains, one per line");
    app->add_option("--records", dns_records, "DNS records TSV");
    app->add_option("--as-map", as_map, "CSV cidr,asn");
    app->add_option("--model", model, "model file");
    app->add_option("--fingerprint-db", fingerprint_db, "fingerprint database file");
    app->add_option("--output-dir", output_dir, "directory for outputs");
    app->add_option("--percentile-loose", percentile_loose);
    app->add_option("--percentile-strict", percentile_strict);
    app->add_option("--epsilon", epsilon, "DBSCAN radius");
    app->add_option("--gamma", gamma, "IP/domain pruning ratio");
    app->add_option("--min-cluster-size", min_cluster_size);
    app->add_option("--min-pts", min_pts, "DBSCAN density");
    app->add_option("--partition-budget", partition_budget, "domains per partition");
    app->add_option("--seed", seed, "partitioning seed");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = config.empty() ? PipelineConfig::defaults(DGATRACK_DATA_DIR)
                                        : PipelineConfig::load(config, DGATRACK_DATA_DIR);
    auto set = [](const std::optional<std::string>& v, std::filesystem::path& p) {
      if (v) p = *v;
    };
    set(suffix_list, cfg.paths.suffix_list);
    set(dictionary, cfg.paths.dictionary);
    set(hgd_corpus, cfg.paths.hgd_corpus);
    set(blacklist, cfg.paths.blacklist);
    set(dns_records, cfg.paths.dns_records);
    set(as_map, cfg.paths.as_map);
    set(model, cfg.paths.model);
    set(fingerprint_db, cfg.paths.fingerprint_db);
    set(output_dir, cfg.paths.output_dir);
    if (percentile_loose) cfg.percentile_loose = *percentile_loose;
    if (percentile_strict) cfg.percentile_strict = *percentile_strict;
    if (epsilon) cfg.clustering.epsilon = *epsilon;
    if (gamma) cfg.clustering.gamma = *gamma;
    if (min_cluster_size) cfg.clustering.min_cluster_size = *min_cluster_size;
    if (min_pts) cfg.clustering.min_pts = *min_pts;
    if (partition_budget) cfg.clustering.partition_budget = *partition_budget;
    if (seed) cfg.clustering.rng_seed = *seed;
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Track DGA-based botnets from blacklists and DNS records"};
  app.require_subcommand(1);

  Overrides common;
  auto* train = app.add_subcommand("train", "fit the benign-domain model");
  common.attach(train);

  auto* discover = app.add_subcommand("discover", "cluster blacklisted AGDs and extract fingerprints");
  common.attach(discover);

  LabelOptions label_opts;
  std::string query_records;
  auto* label = app.add_subcommand("label", "label previously unseen domains");
  common.attach(label);
  label->add_option("--query", label_opts.queries, "domains to label, one per line")->required();
  label->add_option("--query-records", query_records, "DNS records for the queries");

  std::string report_kind;
  std::string granularity;
  std::vector<std::string> report_clusters;
  auto* report = app.add_subcommand("report", "emit analyst reports");
  common.attach(report);
  report->add_option("kind", report_kind, "separation | gamma | timeseries | pca")
      ->required()
      ->check(CLI::IsMember({"separation", "gamma", "timeseries", "pca"}));
  report->add_option("--granularity", granularity, "ip_set | as_set")
      ->check(CLI::IsMember({"ip_set", "as_set"}));
  report->add_option("--clusters", report_clusters, "cluster ids for the time series");

  std::string scenario;
  std::string kind;
  std::size_t count = 0;
  std::uint64_t dga_seed = 0;
  std::string out_file;
  auto* generate = app.add_subcommand("generate", "write a synthetic scenario or domain list");
  common.attach(generate);
  generate->add_option("--scenario", scenario, "scenario JSON; writes records, blacklist and truth");
  generate->add_option("--kind", kind, "DGA kind for a plain domain list")
      ->check(CLI::IsMember({"uniform_char", "hex32", "short_alpha", "word_composed"}));
  generate->add_option("--count", count, "number of domains");
  generate->add_option("--dga-seed", dga_seed, "generator seed");
  generate->add_option("--out", out_file, "output file for a domain list (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; usage errors join the bad-input code.
    return app.exit(e) == 0 ? kExitOk : kExitBadInput;
  }

  std::ostream& log = std::cerr;
  PipelineConfig cfg;
  const int config_status = run_command(log, [&] { cfg = common.resolve(); });
  if (config_status != kExitOk) return config_status;

  if (train->parsed()) return run_command(log, [&] { cmd_train(cfg, log); });
  if (discover->parsed()) return run_command(log, [&] { cmd_discover(cfg, log); });
  if (label->parsed()) {
    if (!query_records.empty()) label_opts.query_records = query_records;
    return run_command(log, [&] { cmd_label(cfg, label_opts, log); });
  }
  if (report->parsed()) {
    if (granularity == "ip_set") cfg.report.granularity = Granularity::ip_set;
    if (granularity == "as_set") cfg.report.granularity = Granularity::as_set;
    if (!report_clusters.empty()) cfg.report.clusters = report_clusters;
    return run_command(log, [&] { cmd_report(cfg, report_kind_from_string(report_kind), log); });
  }
  return run_command(log, [&] {
    if (!scenario.empty()) {
      cmd_generate_scenario(scenario, cfg, log);
      return;
    }
    if (kind.empty() || count == 0) throw ConfigError("generate needs --scenario, or --kind and --count");
    const DgaSpec spec = DgaSpec::preset(dga_kind_from_string(kind), dga_seed);
    std::optional<Dictionary> dict;
    if (spec.kind == DgaKind::word_composed) dict = Dictionary::load(cfg.paths.dictionary);
    const auto names = generate_domains(spec, count, dict ? &*dict : nullptr);
    std::ofstream file;
    if (!out_file.empty()) {
      file.open(out_file);
      if (!file) throw IoError("cannot write " + out_file);
    }
    std::ostream& out = out_file.empty() ? std::cout : file;
    for (const auto& n : names) out << n << '\n';
    log << "generated " << names.size() << " " << kind << " domains\n";
  });
}
