#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgatrack/domain.hpp"
#include "dgatrack/linguistics.hpp"

namespace dgatrack {

enum class DgaKind { uniform_char, hex32, short_alpha, word_composed };

std::string_view to_string(DgaKind k);
/// Throws ConfigError for unknown names.
DgaKind dga_kind_from_string(std::string_view name);

/// Shape of a synthetic name generator.
///
/// uniform_char draws every prefix character independently from `charset`
/// with a length drawn from `len_range`. hex32 always emits 32 hex digits and
/// short_alpha three characters of `charset`. word_composed joins 2 or 3
/// dictionary words of at least three letters; `len_range` bounds the total
/// prefix length.
struct DgaSpec {
  DgaKind kind = DgaKind::uniform_char;
  std::string charset = "abcdefghijklmnopqrstuvwxyz";
  std::pair<std::size_t, std::size_t> len_range{8, 12};
  std::vector<std::string> suffixes{"com"};
  std::uint64_t seed = 0;

  /// Defaults resembling the corpora each kind stands in for.
  static DgaSpec preset(DgaKind kind, std::uint64_t seed = 0);
  /// Throws ValidationError for an empty charset or suffix list or a bad range.
  void validate() const;
};

/// `count` distinct names, deterministic in the spec. word_composed needs
/// `dict`. Throws ExhaustionError when the name space is too small.
std::vector<std::string> generate_domains(const DgaSpec& spec, std::size_t count,
                                          const Dictionary* dict = nullptr);

/// Expands "a.b.c.d" or "a.b.c.d/len" (at most 2^16 addresses).
/// Throws ParseError for malformed input or host bits set.
std::vector<Ipv4> expand_ip_block(std::string_view text);

struct TimelinePhase {
  std::int64_t first_day = 0;
  std::int64_t last_day = 0;  // inclusive
  std::vector<Ipv4> ip_subset;
  std::uint64_t request_rate = 1;
};

struct ScenarioCluster {
  DgaSpec dga;
  std::size_t domain_count = 0;
  std::vector<Ipv4> ip_pool;
  /// 0: every domain resolves to the whole pool (or phase subset). Otherwise
  /// domain i resolves to a window of this many consecutive pool addresses
  /// starting at i * max(1, |pool| / domain_count), wrapping around.
  std::size_t ips_per_domain = 0;
  std::string label;
  /// Empty: one record per (domain, IP) on day 0. Otherwise domain i is
  /// active on the i-th day (cyclically) of the union of phase days and
  /// resolves to that phase's subset with `request_rate` requests.
  std::vector<TimelinePhase> timeline;
};

struct BotnetScenario {
  std::vector<ScenarioCluster> clusters;
  std::size_t noise_domains = 0;  // each resolves to its own fresh IP
  DgaSpec noise_dga{DgaKind::uniform_char, "abcdefghijklmnopqrstuvwxyz0123456789", {6, 14},
                    {"com", "net", "org", "info", "biz"}, 0};
  std::uint64_t seed = 0;
  std::int64_t start_timestamp = 1262304000;  // 2010-01-01T00:00:00Z
  bool allow_overlap = false;

  /// Throws ValidationError for overlapping pools (unless allowed),
  /// overlapping phases, phase IPs outside the pool and empty pools.
  void validate() const;
};

struct ScenarioOutput {
  std::vector<DnsRecord> records;
  std::map<std::string, int> truth;  // domain -> cluster index, -1 for noise
};

ScenarioOutput generate_scenario(const BotnetScenario& s, const SuffixDB& db,
                                 const Dictionary* dict = nullptr);

}  // namespace dgatrack
