#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emoint/rnn.hpp"

namespace emoint {

struct Lexicon {
  std::string name;
  std::map<std::string, std::map<std::string, double>> entries;  // term -> label -> score
  std::vector<std::string> warnings;

  // Sorted set of labels; fixes this lexicon's block of the feature layout.
  std::vector<std::string> labels() const;
  const std::map<std::string, double>* find(const std::string& term) const;
};

/// Reads `term \t label \t score` lines. Terms are lowercased. A repeated
/// (term, label) keeps the last score and records a warning.
Lexicon load_lexicon(std::istream& in, std::string name);
Lexicon load_lexicon_file(const std::string& path);

using WordSet = std::set<std::string>;

WordSet default_negators();
// One word per line; blank lines ignored.
WordSet load_negators(std::istream& in);

/// Dense lexicon feature layout, version 1:
///
///   for each lexicon (in the given order), for each of its labels (sorted):
///     sum of matched scores, max matched score (0 if none), matched count
///   then six global features:
///     token count, all-caps source tokens, elongated tokens (a character
///     repeated 3+ times in a row), '!' count, '?' count, hashtag count
///
/// A token matches its exact form, else its form with leading/trailing
/// punctuation other than '#' removed. Inside a negation scope (after a
/// negator, up to and including the next token containing one of , . ; ! ?)
/// a token's scores are multiplied by -1.
struct LexiconFeatureLayout {
  std::vector<std::string> names;
  std::size_t size() const { return names.size(); }
};

inline constexpr int kLexiconLayoutVersion = 1;

LexiconFeatureLayout lexicon_feature_layout(std::span<const Lexicon> lexicons);

// `raw_text` (pre-lowercasing) feeds the all-caps count; without it that feature is 0.
nn::Vector extract_lexicon_features(std::span<const std::string> tokens,
                                    std::span<const Lexicon> lexicons, const WordSet& negators,
                                    std::optional<std::string_view> raw_text = std::nullopt);

bool is_negator(const std::string& token, const WordSet& negators);

struct NgramConfig {
  int word_min = 1;
  int word_max = 2;  // 0 disables word n-grams
  int char_min = 3;
  int char_max = 4;  // 0 disables character n-grams
  std::size_t hash_dim = 1024;
};

// Sorted by index, no zero entries.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// Hashed n-gram counts. Word n-grams join tokens with a single space and
/// hash as "w:<ngram>"; character n-grams run over the space-joined token
/// string and hash as "c:<ngram>". Bucket = FNV-1a 64 of those bytes mod hash_dim.
SparseVector extract_ngram_features(std::span<const std::string> tokens, const NgramConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);

nn::Vector densify(const SparseVector& v, std::size_t dim);

}  // namespace emoint
