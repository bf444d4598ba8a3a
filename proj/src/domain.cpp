#include "dgatrack/domain.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "dgatrack/errors.hpp"
#include "text.hpp"

namespace dgatrack {

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  std::size_t pos = 0;
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (pos >= text.size() || text[pos] != '.') return std::nullopt;
      ++pos;
    }
    std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    std::size_t len = pos - start;
    if (len == 0 || len > 3) return std::nullopt;
    unsigned part = 0;
    std::from_chars(text.data() + start, text.data() + pos, part);
    if (part > 255) return std::nullopt;
    value = (value << 8) | part;
  }
  if (pos != text.size()) return std::nullopt;
  return Ipv4{value};
}

std::string Ipv4::to_string() const {
  std::string out;
  out.reserve(15);
  for (int shift = 24; shift >= 0; shift -= 8) {
    out += std::to_string((value >> shift) & 0xffu);
    if (shift) out += '.';
  }
  return out;
}

SuffixDB SuffixDB::from_lines(const std::vector<std::string>& lines) {
  SuffixDB db;
  for (const auto& line : lines) {
    std::string_view rule = detail::trim(line);
    if (rule.empty() || rule.starts_with("//")) continue;
    rule = rule.substr(0, rule.find_first_of(" \t"));
    std::string lowered = detail::to_lower(rule);
    bool inserted = false;
    if (lowered.starts_with('!')) {
      inserted = db.exception_.insert(lowered.substr(1)).second;
    } else if (lowered.starts_with("*.")) {
      inserted = db.wildcard_.insert(lowered.substr(2)).second;
    } else {
      inserted = db.plain_.insert(lowered).second;
    }
    if (inserted) ++db.rule_count_;
  }
  if (db.rule_count_ == 0) throw EmptyDatabaseError("public suffix list contains no rules");
  return db;
}

SuffixDB SuffixDB::from_stream(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return from_lines(lines);
}

bool SuffixDB::has_exception(std::string_view rule) const {
  if (rule.starts_with('!')) rule.remove_prefix(1);
  return exception_.find(rule) != exception_.end();
}

std::size_t SuffixDB::suffix_label_count(std::string_view name) const {
  // starts[i] is the offset of label i; the suffix beginning there is a tail of name.
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < name.size(); ++i) {
    if (name[i] == '.') starts.push_back(i + 1);
  }
  const std::size_t n = starts.size();
  auto tail = [&](std::size_t i) { return name.substr(starts[i]); };

  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::string_view suffix = tail(i);
    if (exception_.find(suffix) != exception_.end()) {
      // An exception rule's public suffix is the rule minus its leftmost label.
      return n - i - 1;
    }
    std::size_t labels_here = n - i;
    if (labels_here > best) {
      if (plain_.find(suffix) != plain_.end()) best = labels_here;
      if (i + 1 < n && wildcard_.find(tail(i + 1)) != wildcard_.end()) best = labels_here;
    }
  }
  return best == 0 ? 1 : best;
}

SuffixDB load_public_suffix_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read public suffix list: " + path.string());
  return SuffixDB::from_stream(in);
}

Domain parse_domain(std::string_view raw, const SuffixDB& db) {
  std::string lowered = detail::to_lower(detail::trim(raw));
  if (!lowered.empty() && lowered.back() == '.') lowered.pop_back();
  if (lowered.empty()) throw ParseError("empty domain name");
  for (char c : lowered) {
    if (static_cast<unsigned char>(c) <= ' ' || c == 0x7f) {
      throw ParseError("domain contains whitespace or control characters: " + lowered);
    }
  }

  std::vector<std::string_view> labels;
  std::string_view rest = lowered;
  while (true) {
    std::size_t dot = rest.find('.');
    std::string_view label = rest.substr(0, dot);
    if (label.empty()) throw ParseError("empty label in domain: " + lowered);
    labels.push_back(label);
    if (dot == std::string_view::npos) break;
    rest.remove_prefix(dot + 1);
  }

  const std::size_t suffix_labels = db.suffix_label_count(lowered);
  if (suffix_labels >= labels.size()) {
    throw NoPrefixError("domain is a public suffix: " + lowered);
  }
  const std::size_t prefix_at = labels.size() - suffix_labels - 1;

  Domain d;
  d.chosen_prefix = std::string(labels[prefix_at]);
  const std::string_view& first_suffix = labels[prefix_at + 1];
  d.etld = std::string(first_suffix.data(),
                       lowered.data() + lowered.size() - first_suffix.data());
  for (std::size_t i = 0; i < prefix_at; ++i) d.subdomain_labels.emplace_back(labels[i]);
  d.raw = std::move(lowered);
  return d;
}

RecordSet read_dns_records(std::istream& in, const SuffixDB& db) {
  RecordSet out;
  std::string line;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    std::string_view view = detail::trim(line);
    if (view.empty() || view.starts_with('#')) continue;
    auto fields = detail::split(view, '\t');
    bool header = first_data_line && !fields.empty() && !detail::parse_int64(fields[0]);
    first_data_line = false;
    if (header) continue;

    ++out.stats.rows;
    if (fields.size() < 3 || fields.size() > 4) {
      ++out.stats.skipped_invalid;
      continue;
    }
    std::string_view ip_text = detail::trim(fields[2]);
    if (ip_text.find(':') != std::string_view::npos) {
      ++out.stats.skipped_ipv6;
      continue;
    }
    auto ts = detail::parse_int64(detail::trim(fields[0]));
    auto ip = Ipv4::parse(ip_text);
    std::optional<std::int64_t> count = 1;
    if (fields.size() == 4) count = detail::parse_int64(detail::trim(fields[3]));
    if (!ts || !ip || !count || *count < 1) {
      ++out.stats.skipped_invalid;
      continue;
    }
    try {
      out.records.push_back(DnsRecord{*ts, parse_domain(fields[1], db), *ip,
                                      static_cast<std::uint64_t>(*count)});
    } catch (const Error&) {
      ++out.stats.skipped_invalid;
    }
  }
  return out;
}

RecordSet load_dns_records(const std::filesystem::path& path, const SuffixDB& db) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read DNS records: " + path.string());
  return read_dns_records(in, db);
}

void write_dns_records(std::ostream& out, const std::vector<DnsRecord>& records) {
  out << "timestamp\tdomain\tip\tcount\n";
  for (const auto& r : records) {
    out << r.timestamp << '\t' << r.domain.raw << '\t' << r.ip.to_string() << '\t' << r.count
        << '\n';
  }
}

Blacklist read_blacklist(std::istream& in, const SuffixDB& db) {
  Blacklist out;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view view = detail::trim(line);
    if (view.empty() || view.starts_with('#')) continue;
    try {
      Domain d = parse_domain(view, db);
      if (seen.insert(d.raw).second) out.entries.push_back(BlacklistEntry{std::move(d)});
    } catch (const Error&) {
      ++out.skipped;
    }
  }
  return out;
}

Blacklist load_blacklist(const std::filesystem::path& path, const SuffixDB& db) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read blacklist: " + path.string());
  return read_blacklist(in, db);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view view = detail::trim(line);
    if (view.empty() || view.starts_with('#')) continue;
    lines.emplace_back(view);
  }
  return lines;
}

}  // namespace dgatrack
