#include "dgatrack/linguistics.hpp"

#include <algorithm>

#include "dgatrack/errors.hpp"
#include "text.hpp"

namespace dgatrack {

namespace {

bool is_lower_alpha(char c) { return c >= 'a' && c <= 'z'; }

std::size_t power26(int n) {
  std::size_t p = 1;
  for (int i = 0; i < n; ++i) p *= 26;
  return p;
}

}  // namespace

Dictionary Dictionary::from_words(const std::vector<std::string>& words) {
  Dictionary dict;
  for (const auto& w : words) {
    std::string lowered = detail::to_lower(detail::trim(w));
    if (lowered.empty() || !std::all_of(lowered.begin(), lowered.end(), is_lower_alpha)) continue;
    dict.words_.push_back(std::move(lowered));
  }
  std::sort(dict.words_.begin(), dict.words_.end());
  dict.words_.erase(std::unique(dict.words_.begin(), dict.words_.end()), dict.words_.end());
  if (dict.words_.empty()) throw EmptyDatabaseError("dictionary contains no words");
  dict.set_.reserve(dict.words_.size());
  for (const auto& w : dict.words_) {
    dict.set_.insert(w);
    dict.max_len_ = std::max(dict.max_len_, w.size());
  }
  return dict;
}

Dictionary Dictionary::load(const std::filesystem::path& path) {
  return from_words(read_lines(path));
}

NGramTable::NGramTable(int n) : n_(n), counts_(power26(n), 0) {}

bool NGramTable::index_of(std::string_view gram, std::size_t& index) {
  index = 0;
  for (char c : gram) {
    if (!is_lower_alpha(c)) return false;
    index = index * 26 + static_cast<std::size_t>(c - 'a');
  }
  return true;
}

NGramTable NGramTable::build(const Dictionary& dict, int n) {
  if (n < 1 || n > 3) throw DomainError("n-gram order must be 1, 2 or 3");
  NGramTable table(n);
  const auto width = static_cast<std::size_t>(n);
  for (const auto& w : dict.words()) {
    for (std::size_t i = 0; i + width <= w.size(); ++i) {
      std::size_t index = 0;
      index_of(std::string_view(w).substr(i, width), index);
      ++table.counts_[index];
      ++table.total_;
    }
  }
  return table;
}

NGramTable NGramTable::from_counts(int n, const std::map<std::string, std::uint64_t>& counts) {
  if (n < 1 || n > 3) throw DomainError("n-gram order must be 1, 2 or 3");
  NGramTable table(n);
  for (const auto& [gram, count] : counts) {
    std::size_t index = 0;
    if (gram.size() != static_cast<std::size_t>(n) || !index_of(gram, index)) {
      throw DomainError("invalid n-gram key: " + gram);
    }
    table.counts_[index] = count;
    table.total_ += count;
  }
  return table;
}

std::uint64_t NGramTable::count(std::string_view gram) const {
  std::size_t index = 0;
  if (gram.size() != static_cast<std::size_t>(n_) || !index_of(gram, index)) return 0;
  return counts_[index];
}

std::map<std::string, std::uint64_t> NGramTable::nonzero() const {
  std::map<std::string, std::uint64_t> out;
  for (std::size_t index = 0; index < counts_.size(); ++index) {
    if (counts_[index] == 0) continue;
    std::string gram(static_cast<std::size_t>(n_), 'a');
    std::size_t rest = index;
    for (int i = n_ - 1; i >= 0; --i) {
      gram[static_cast<std::size_t>(i)] = static_cast<char>('a' + rest % 26);
      rest /= 26;
    }
    out.emplace(std::move(gram), counts_[index]);
  }
  return out;
}

NGramTables NGramTables::build(const Dictionary& dict) {
  return NGramTables{NGramTable::build(dict, 1), NGramTable::build(dict, 2),
                     NGramTable::build(dict, 3)};
}

const NGramTable& NGramTables::for_n(int n) const {
  switch (n) {
    case 1: return unigrams;
    case 2: return bigrams;
    case 3: return trigrams;
    default: throw DomainError("n-gram order must be 1, 2 or 3");
  }
}

double meaningful_char_ratio(std::string_view prefix, const Dictionary& dict) {
  const std::size_t len = prefix.size();
  if (len == 0) return 0.0;
  constexpr std::size_t kMinWord = 3;

  // covered[i] = most characters of prefix[i..] coverable by disjoint words.
  std::vector<std::size_t> covered(len + 1, 0);
  const std::size_t max_word = dict.max_word_length();
  for (std::size_t i = len; i-- > 0;) {
    std::size_t best = covered[i + 1];
    std::size_t end_limit = std::min(len, i + max_word);
    for (std::size_t j = i + 1; j <= end_limit; ++j) {
      if (!is_lower_alpha(prefix[j - 1])) break;
      if (j - i < kMinWord) continue;
      if (dict.contains(prefix.substr(i, j - i))) best = std::max(best, (j - i) + covered[j]);
    }
    covered[i] = best;
  }
  return static_cast<double>(covered[0]) / static_cast<double>(len);
}

double ngram_normality(std::string_view prefix, const NGramTable& table) {
  const auto n = static_cast<std::size_t>(table.n());
  if (prefix.size() < n) return 0.0;
  const std::size_t grams = prefix.size() - n + 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < grams; ++i) {
    sum += static_cast<double>(table.count(prefix.substr(i, n)));
  }
  return sum / static_cast<double>(grams);
}

LinguisticFeatures feature_vector(const Domain& d, const Dictionary& dict,
                                  const NGramTables& tables) {
  const std::string_view p = d.chosen_prefix;
  return LinguisticFeatures{meaningful_char_ratio(p, dict), ngram_normality(p, tables.unigrams),
                            ngram_normality(p, tables.bigrams),
                            ngram_normality(p, tables.trigrams)};
}

FeatureExtractor::FeatureExtractor(Dictionary dict)
    : dict_(std::move(dict)), tables_(NGramTables::build(dict_)) {}

LinguisticFeatures FeatureExtractor::of_prefix(std::string_view prefix) const {
  return LinguisticFeatures{meaningful_char_ratio(prefix, dict_),
                            ngram_normality(prefix, tables_.unigrams),
                            ngram_normality(prefix, tables_.bigrams),
                            ngram_normality(prefix, tables_.trigrams)};
}

}  // namespace dgatrack
