#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace dgatrack {

/// IPv4 address held in host byte order.
struct Ipv4 {
  std::uint32_t value = 0;

  /// Strict dotted-quad parser; returns nullopt for anything else.
  static std::optional<Ipv4> parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

/// Public-suffix rule database in publicsuffix.org semantics.
///
/// Lookup picks the prevailing rule for a name: an exception rule (`!`) wins,
/// otherwise the matching rule with the most labels. A wildcard (`*.`) matches
/// exactly one arbitrary label. Names no rule covers fall back to their last
/// label.
class SuffixDB {
 public:
  /// Builds from rule lines. Comment (`//`) and blank lines are skipped, text
  /// after the first whitespace is ignored and rules are lowercased.
  /// Throws EmptyDatabaseError when no rule remains.
  static SuffixDB from_lines(const std::vector<std::string>& lines);
  static SuffixDB from_stream(std::istream& in);

  std::size_t size() const noexcept { return rule_count_; }
  bool has_exception(std::string_view rule) const;

  /// Number of trailing labels of a lowercased, dot-separated name that form
  /// its public suffix (at least 1).
  std::size_t suffix_label_count(std::string_view name) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  using RuleSet = std::unordered_set<std::string, Hash, std::equal_to<>>;

  RuleSet plain_;
  RuleSet wildcard_;   // stored without the leading "*."
  RuleSet exception_;  // stored without the leading "!"
  std::size_t rule_count_ = 0;
};

/// Reads a publicsuffix.org formatted file. Throws IoError or EmptyDatabaseError.
SuffixDB load_public_suffix_list(const std::filesystem::path& path);

/// A domain split into subdomain labels, chosen prefix and effective TLD.
struct Domain {
  std::string raw;
  std::string chosen_prefix;
  std::string etld;
  std::vector<std::string> subdomain_labels;

  friend bool operator==(const Domain& a, const Domain& b) { return a.raw == b.raw; }
  friend auto operator<=>(const Domain& a, const Domain& b) { return a.raw <=> b.raw; }
};

/// Lowercases and splits `raw` against `db`.
///
/// Throws ParseError for empty names, empty labels or whitespace, and
/// NoPrefixError when the name is itself a public suffix.
Domain parse_domain(std::string_view raw, const SuffixDB& db);

struct DnsRecord {
  std::int64_t timestamp = 0;
  Domain domain;
  Ipv4 ip;
  std::uint64_t count = 1;
};

struct BlacklistEntry {
  Domain domain;
};

struct RecordLoadStats {
  std::size_t rows = 0;
  std::size_t skipped_ipv6 = 0;
  std::size_t skipped_invalid = 0;
};

struct RecordSet {
  std::vector<DnsRecord> records;
  RecordLoadStats stats;
};

/// Parses the `timestamp<TAB>domain<TAB>ip<TAB>count` format. A header line
/// and `#` comments are skipped; the count column may be omitted (count 1).
/// IPv6 rows and malformed rows are skipped and counted.
RecordSet read_dns_records(std::istream& in, const SuffixDB& db);
RecordSet load_dns_records(const std::filesystem::path& path, const SuffixDB& db);
void write_dns_records(std::ostream& out, const std::vector<DnsRecord>& records);

struct Blacklist {
  std::vector<BlacklistEntry> entries;
  std::size_t skipped = 0;
};

/// One domain per line; unparseable lines are skipped and counted, duplicates dropped.
Blacklist read_blacklist(std::istream& in, const SuffixDB& db);
Blacklist load_blacklist(const std::filesystem::path& path, const SuffixDB& db);

/// Reads non-empty, non-comment lines of a text file.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace dgatrack

template <>
struct std::hash<dgatrack::Ipv4> {
  std::size_t operator()(const dgatrack::Ipv4& ip) const noexcept {
    return std::hash<std::uint32_t>{}(ip.value);
  }
};
