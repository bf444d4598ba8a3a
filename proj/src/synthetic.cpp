#include "dgatrack/synthetic.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_set>

#include "dgatrack/errors.hpp"
#include "dgatrack/random.hpp"
#include "text.hpp"

namespace dgatrack {

namespace {

constexpr std::string_view kHex = "0123456789abcdef";
constexpr std::size_t kWordRetries = 100000;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string unique_chars(std::string_view s) {
  std::string out(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t saturating_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    return std::numeric_limits<std::size_t>::max();
  }
  return a * b;
}

std::size_t saturating_pow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) out = saturating_mul(out, base);
  return out;
}

/// Number of distinct names the spec can produce, saturating; 0 when unknown.
std::size_t name_space(const DgaSpec& spec) {
  const std::size_t suffixes = spec.suffixes.size();
  switch (spec.kind) {
    case DgaKind::hex32: return saturating_mul(saturating_pow(16, 32), suffixes);
    case DgaKind::short_alpha:
      return saturating_mul(saturating_pow(unique_chars(spec.charset).size(), 3), suffixes);
    case DgaKind::uniform_char: {
      const std::size_t c = unique_chars(spec.charset).size();
      std::size_t total = 0;
      for (std::size_t len = spec.len_range.first; len <= spec.len_range.second; ++len) {
        const std::size_t n = saturating_pow(c, len);
        total = n > std::numeric_limits<std::size_t>::max() - total
                    ? std::numeric_limits<std::size_t>::max()
                    : total + n;
      }
      return saturating_mul(total, suffixes);
    }
    case DgaKind::word_composed: return 0;
  }
  return 0;
}

class PrefixSource {
 public:
  PrefixSource(const DgaSpec& spec, const Dictionary* dict) : spec_(spec) {
    charset_ = spec.kind == DgaKind::hex32 ? std::string(kHex) : unique_chars(spec.charset);
    if (spec.kind == DgaKind::word_composed) {
      if (dict == nullptr) throw ConfigError("word_composed generation needs a dictionary");
      for (const auto& w : dict->words()) {
        if (w.size() >= 3 && w.size() <= spec.len_range.second) words_.push_back(&w);
      }
      if (words_.empty()) throw ExhaustionError("no dictionary word fits the length range");
    }
  }

  std::string draw(Rng& rng) const {
    switch (spec_.kind) {
      case DgaKind::hex32: return chars(rng, 32);
      case DgaKind::short_alpha: return chars(rng, 3);
      case DgaKind::uniform_char: {
        const auto len = static_cast<std::size_t>(
            rng.between(static_cast<std::int64_t>(spec_.len_range.first),
                        static_cast<std::int64_t>(spec_.len_range.second)));
        return chars(rng, len);
      }
      case DgaKind::word_composed: return words(rng);
    }
    return {};
  }

 private:
  std::string chars(Rng& rng, std::size_t len) const {
    std::string out(len, ' ');
    for (auto& c : out) c = charset_[rng.below(charset_.size())];
    return out;
  }

  std::string words(Rng& rng) const {
    for (std::size_t attempt = 0; attempt < kWordRetries; ++attempt) {
      const std::size_t parts = 2 + rng.below(2);
      std::string out;
      for (std::size_t i = 0; i < parts; ++i) out += *words_[rng.below(words_.size())];
      if (out.size() >= spec_.len_range.first && out.size() <= spec_.len_range.second) return out;
    }
    throw ExhaustionError("cannot compose words within the length range");
  }

  const DgaSpec& spec_;
  std::string charset_;
  std::vector<const std::string*> words_;
};

std::vector<std::string> generate_excluding(const DgaSpec& spec, std::size_t count,
                                            const Dictionary* dict,
                                            std::unordered_set<std::string>& taken) {
  spec.validate();
  if (count == 0) throw DomainError("count must be at least 1");
  const std::size_t space = name_space(spec);
  if (space != 0 && count > space) {
    throw ExhaustionError("requested " + std::to_string(count) + " names from a space of " +
                          std::to_string(space));
  }
  PrefixSource source(spec, dict);
  Rng rng(spec.seed);
  std::vector<std::string> out;
  out.reserve(count);
  const std::size_t limit = 1000 + 50 * count;
  for (std::size_t attempts = 0; out.size() < count; ++attempts) {
    if (attempts >= limit) {
      throw ExhaustionError("gave up after " + std::to_string(attempts) + " draws with " +
                            std::to_string(out.size()) + " distinct names");
    }
    std::string name = source.draw(rng);
    name += '.';
    name += spec.suffixes[rng.below(spec.suffixes.size())];
    if (taken.insert(name).second) out.push_back(std::move(name));
  }
  return out;
}

bool intersects(const std::vector<Ipv4>& a, const std::vector<Ipv4>& b) {
  std::set<Ipv4> s(a.begin(), a.end());
  return std::any_of(b.begin(), b.end(), [&](const Ipv4& ip) { return s.count(ip) > 0; });
}

}  // namespace

std::string_view to_string(DgaKind k) {
  switch (k) {
    case DgaKind::uniform_char: return "uniform_char";
    case DgaKind::hex32: return "hex32";
    case DgaKind::short_alpha: return "short_alpha";
    case DgaKind::word_composed: return "word_composed";
  }
  return "unknown";
}

DgaKind dga_kind_from_string(std::string_view name) {
  for (auto k : {DgaKind::uniform_char, DgaKind::hex32, DgaKind::short_alpha, DgaKind::word_composed}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown DGA kind '" + std::string(name) + "'");
}

DgaSpec DgaSpec::preset(DgaKind kind, std::uint64_t seed) {
  DgaSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  switch (kind) {
    case DgaKind::uniform_char: break;
    case DgaKind::hex32:
      spec.charset = std::string(kHex);
      spec.len_range = {32, 32};
      spec.suffixes = {"co.cc"};
      break;
    case DgaKind::short_alpha:
      spec.len_range = {3, 3};
      spec.suffixes = {"com", "org", "net"};
      break;
    case DgaKind::word_composed:
      spec.len_range = {6, 16};
      break;
  }
  return spec;
}

void DgaSpec::validate() const {
  if (charset.empty()) throw ValidationError("empty charset");
  for (char c : charset) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-')) {
      throw ValidationError(std::string("charset character '") + c + "' is not valid in a label");
    }
  }
  if (suffixes.empty()) throw ValidationError("empty suffix list");
  if (len_range.first < 1 || len_range.first > len_range.second) {
    throw ValidationError("invalid length range");
  }
}

std::vector<std::string> generate_domains(const DgaSpec& spec, std::size_t count,
                                          const Dictionary* dict) {
  std::unordered_set<std::string> taken;
  return generate_excluding(spec, count, dict, taken);
}

std::vector<Ipv4> expand_ip_block(std::string_view text) {
  text = detail::trim(text);
  const auto slash = text.find('/');
  const auto ip = Ipv4::parse(text.substr(0, slash));
  if (!ip) throw ParseError("bad IP block '" + std::string(text) + "'");
  if (slash == std::string_view::npos) return {*ip};
  const auto len = detail::parse_int64(text.substr(slash + 1));
  if (!len || *len < 16 || *len > 32) {
    throw ParseError("IP block prefix must be within /16../32: '" + std::string(text) + "'");
  }
  const std::uint32_t size = 1u << (32 - *len);
  const std::uint32_t base = ip->value & ~(size - 1);
  if (base != ip->value) throw ParseError("IP block has host bits set: '" + std::string(text) + "'");
  std::vector<Ipv4> out;
  out.reserve(size);
  for (std::uint32_t i = 0; i < size; ++i) out.push_back(Ipv4{base + i});
  return out;
}

void BotnetScenario::validate() const {
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    const std::string name = "cluster " + std::to_string(i);
    c.dga.validate();
    if (c.domain_count > 0 && c.ip_pool.empty()) throw ValidationError(name + " has an empty IP pool");
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& phase : c.timeline) {
      if (phase.first_day > phase.last_day) throw ValidationError(name + " has an inverted day range");
      if (phase.ip_subset.empty()) throw ValidationError(name + " has a phase without IPs");
      std::set<Ipv4> pool(c.ip_pool.begin(), c.ip_pool.end());
      for (const auto& ip : phase.ip_subset) {
        if (!pool.count(ip)) throw ValidationError(name + " phase uses IP " + ip.to_string() + " outside its pool");
      }
      spans.emplace_back(phase.first_day, phase.last_day);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t k = 1; k < spans.size(); ++k) {
      if (spans[k].first <= spans[k - 1].second) throw ValidationError(name + " has overlapping day ranges");
    }
    if (!allow_overlap) {
      for (std::size_t j = 0; j < i; ++j) {
        if (intersects(clusters[j].ip_pool, c.ip_pool)) {
          throw ValidationError("IP pools of clusters " + std::to_string(j) + " and " +
                                std::to_string(i) + " overlap");
        }
      }
    }
  }
  if (noise_domains > 0) noise_dga.validate();
}

ScenarioOutput generate_scenario(const BotnetScenario& s, const SuffixDB& db, const Dictionary* dict) {
  s.validate();
  ScenarioOutput out;
  std::unordered_set<std::string> taken;
  std::set<Ipv4> used_ips;

  for (std::size_t ci = 0; ci < s.clusters.size(); ++ci) {
    const auto& c = s.clusters[ci];
    used_ips.insert(c.ip_pool.begin(), c.ip_pool.end());
    if (c.domain_count == 0) continue;
    DgaSpec spec = c.dga;
    spec.seed ^= splitmix64(s.seed + ci + 1);
    const auto names = generate_excluding(spec, c.domain_count, dict, taken);

    std::vector<std::int64_t> days;
    for (const auto& phase : c.timeline) {
      for (auto d = phase.first_day; d <= phase.last_day; ++d) days.push_back(d);
    }
    std::sort(days.begin(), days.end());

    for (std::size_t i = 0; i < names.size(); ++i) {
      const Domain domain = parse_domain(names[i], db);
      out.truth[domain.raw] = static_cast<int>(ci);
      std::int64_t day = 0;
      const std::vector<Ipv4>* pool = &c.ip_pool;
      std::uint64_t rate = 1;
      if (!days.empty()) {
        day = days[i % days.size()];
        for (const auto& phase : c.timeline) {
          if (day >= phase.first_day && day <= phase.last_day) {
            pool = &phase.ip_subset;
            rate = phase.request_rate;
          }
        }
      }
      std::vector<Ipv4> ips;
      if (c.ips_per_domain == 0) {
        ips = *pool;
      } else {
        const std::size_t p = pool->size();
        const std::size_t stride = std::max<std::size_t>(1, p / c.domain_count);
        for (std::size_t j = 0; j < std::min(c.ips_per_domain, p); ++j) {
          ips.push_back((*pool)[(i * stride + j) % p]);
        }
      }
      std::sort(ips.begin(), ips.end());
      ips.erase(std::unique(ips.begin(), ips.end()), ips.end());
      for (const auto& ip : ips) {
        out.records.push_back(DnsRecord{s.start_timestamp + day * 86400, domain, ip, rate});
      }
    }
  }

  if (s.noise_domains > 0) {
    DgaSpec spec = s.noise_dga;
    spec.seed ^= splitmix64(s.seed ^ 0x6e6f697365ULL);
    const auto names = generate_excluding(spec, s.noise_domains, dict, taken);
    std::uint32_t next_ip = Ipv4::parse("100.64.0.0")->value;
    for (const auto& name : names) {
      while (used_ips.count(Ipv4{next_ip})) ++next_ip;
      const Domain domain = parse_domain(name, db);
      out.truth[domain.raw] = -1;
      out.records.push_back(DnsRecord{s.start_timestamp, domain, Ipv4{next_ip}, 1});
      used_ips.insert(Ipv4{next_ip++});
    }
  }
  return out;
}

}  // namespace dgatrack
