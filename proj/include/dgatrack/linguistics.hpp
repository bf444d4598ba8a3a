#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dgatrack/domain.hpp"

namespace dgatrack {

/// Reference word list. Words are lowercase [a-z] strings, kept sorted and unique.
class Dictionary {
 public:
  /// Lowercases each word; entries containing anything but letters are
  /// dropped. Throws EmptyDatabaseError if nothing remains.
  static Dictionary from_words(const std::vector<std::string>& words);
  static Dictionary load(const std::filesystem::path& path);

  bool contains(std::string_view word) const { return set_.find(word) != set_.end(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t size() const noexcept { return words_.size(); }
  std::size_t max_word_length() const noexcept { return max_len_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> words_;
  std::unordered_set<std::string, Hash, std::equal_to<>> set_;
  std::size_t max_len_ = 0;
};

/// Occurrence counts of every [a-z] n-gram (n = 1, 2 or 3) over a dictionary.
class NGramTable {
 public:
  /// Counts n-grams inside each word; n-grams never cross word boundaries.
  static NGramTable build(const Dictionary& dict, int n);
  /// Table with explicitly supplied counts, e.g. a published fixture.
  /// Throws DomainError for keys that are not n lowercase letters.
  static NGramTable from_counts(int n, const std::map<std::string, std::uint64_t>& counts);

  int n() const noexcept { return n_; }
  /// Count of `gram`; zero for grams of the wrong length or outside [a-z].
  std::uint64_t count(std::string_view gram) const;
  std::uint64_t total() const noexcept { return total_; }
  /// Non-zero entries, keyed by n-gram.
  std::map<std::string, std::uint64_t> nonzero() const;

 private:
  explicit NGramTable(int n);
  static bool index_of(std::string_view gram, std::size_t& index);

  int n_ = 1;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct NGramTables {
  NGramTable unigrams;
  NGramTable bigrams;
  NGramTable trigrams;

  static NGramTables build(const Dictionary& dict);
  const NGramTable& for_n(int n) const;
};

/// Feature vector [r, s1, s2, s3] of a chosen prefix.
struct LinguisticFeatures {
  double r = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  std::array<double, 4> as_array() const { return {r, s1, s2, s3}; }
  friend bool operator==(const LinguisticFeatures&, const LinguisticFeatures&) = default;
};

/// Fraction of the prefix covered by disjoint dictionary words of at least
/// three letters, maximised over all placements. Characters outside [a-z]
/// never belong to a word but still count in the length.
double meaningful_char_ratio(std::string_view prefix, const Dictionary& dict);

/// Mean dictionary count of the prefix's n-grams. Zero when the prefix is
/// shorter than n.
double ngram_normality(std::string_view prefix, const NGramTable& table);

LinguisticFeatures feature_vector(const Domain& d, const Dictionary& dict,
                                  const NGramTables& tables);

/// Dictionary plus its n-gram tables, built once and shared read-only.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(Dictionary dict);

  LinguisticFeatures operator()(const Domain& d) const {
    return feature_vector(d, dict_, tables_);
  }
  LinguisticFeatures of_prefix(std::string_view prefix) const;

  const Dictionary& dictionary() const noexcept { return dict_; }
  const NGramTables& tables() const noexcept { return tables_; }

 private:
  Dictionary dict_;
  NGramTables tables_;
};

}  // namespace dgatrack
