#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dgatrack/clustering.hpp"
#include "dgatrack/intelligence.hpp"

namespace dgatrack {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitEmptyDiscovery = 3;
inline constexpr int kExitMissingArtifact = 4;

struct PipelinePaths {
  std::filesystem::path suffix_list;
  std::filesystem::path dictionary;
  std::filesystem::path hgd_corpus;
  std::filesystem::path blacklist;
  std::filesystem::path dns_records;
  std::filesystem::path as_map;
  std::filesystem::path model;           // default <output_dir>/model.json
  std::filesystem::path fingerprint_db;  // default <output_dir>/fingerprints.json
  std::filesystem::path output_dir = ".";
};

struct ReportOptions {
  std::vector<double> gamma_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  ClusterFeature separation_feature = ClusterFeature::prefix_length;
  Granularity granularity = Granularity::as_set;
  /// Cluster ids joined for the time-series report; empty selects all.
  std::vector<std::string> clusters;
};

struct PipelineConfig {
  PipelinePaths paths;
  double percentile_loose = 70.0;
  double percentile_strict = 90.0;
  ClusteringConfig clustering;
  ReportOptions report;

  /// Paths default to the bundled data directory.
  static PipelineConfig defaults(const std::filesystem::path& data_dir);
  /// Fields absent from the document keep their defaults; relative paths are
  /// resolved against the document's directory. Throws ConfigError.
  static PipelineConfig load(const std::filesystem::path& file, const std::filesystem::path& data_dir);

  std::filesystem::path model_path() const;
  std::filesystem::path fingerprint_db_path() const;
  std::filesystem::path clusters_path() const;
  std::filesystem::path premerge_path() const;

  /// Throws ConfigError.
  void validate() const;
};

enum class ReportKind { separation, gamma, timeseries, pca };
/// Throws ConfigError for unknown names.
ReportKind report_kind_from_string(std::string_view name);

struct LabelOptions {
  std::filesystem::path queries;
  std::optional<std::filesystem::path> query_records;
};

// Commands throw; run_command maps the error hierarchy onto exit codes.

/// Writes the model; logs lambda, Lambda and training size.
void cmd_train(const PipelineConfig& cfg, std::ostream& log);
/// Writes fingerprint DB, final and pre-merge cluster dumps and a summary.
void cmd_discover(const PipelineConfig& cfg, std::ostream& log);
/// Writes label.tsv and label.json into the output directory.
void cmd_label(const PipelineConfig& cfg, const LabelOptions& opts, std::ostream& log);
/// Writes report_<kind>.json and report_<kind>.tsv into the output directory.
void cmd_report(const PipelineConfig& cfg, ReportKind kind, std::ostream& log);

/// Writes records.tsv, blacklist.txt and truth.tsv for a scenario file.
void cmd_generate_scenario(const std::filesystem::path& scenario, const PipelineConfig& cfg,
                           std::ostream& log);

/// Runs `body`, logging any error and returning its exit code.
template <typename F>
int run_command(std::ostream& log, F&& body);

int exit_code_for(const std::exception& e);

template <typename F>
int run_command(std::ostream& log, F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace dgatrack
