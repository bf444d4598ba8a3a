#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgatrack/clustering.hpp"
#include "dgatrack/fingerprint.hpp"
#include "dgatrack/hgd_filter.hpp"
#include "dgatrack/intelligence.hpp"
#include "dgatrack/synthetic.hpp"

namespace dgatrack {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// Malformed documents raise ParseError (syntax) or ValidationError (content).

Json model_to_json(const HgdModel& model);
HgdModel model_from_json(const Json& j);

Json fingerprint_to_json(const Fingerprint& fp);
Fingerprint fingerprint_from_json(const Json& j);

/// {"format_version": 1, "fingerprints": [...]}
Json fingerprint_db_to_json(const std::vector<Fingerprint>& db);
std::vector<Fingerprint> fingerprint_db_from_json(const Json& j);

/// Clusters are written with ids "C1", "C2", ... in order.
Json clusters_to_json(const std::vector<DomainCluster>& clusters);
std::vector<DomainCluster> clusters_from_json(const Json& j, const SuffixDB& db);

Json dga_spec_to_json(const DgaSpec& spec);
/// Unspecified fields take the preset of the given kind.
DgaSpec dga_spec_from_json(const Json& j);
Json scenario_to_json(const BotnetScenario& s);
BotnetScenario scenario_from_json(const Json& j);

Json separation_to_json(const SeparationReport& r);
Json sensitivity_to_json(const SensitivityCurve& c);
Json time_series_to_json(const std::vector<TimeSeries>& series);
Json pca_to_json(const PcaProjection& p);

/// Throws IoError or ParseError.
Json read_json_file(const std::filesystem::path& path);
/// Two-space indented with a trailing newline. Throws IoError.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace dgatrack
