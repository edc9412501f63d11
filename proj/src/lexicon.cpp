#include "emoint/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>

#include "emoint/error.hpp"

namespace emoint {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool closes_scope(const std::string& token) {
  return token.find_first_of(",.;!?") != std::string::npos;
}

bool is_edge_punct(char c) {
  switch (c) {
    case '!': case '?': case '.': case ',': case ';': case ':': case '(': case ')':
    case '\'': case '*': case '-': case '"':
      return true;
    default:
      return false;
  }
}

std::string strip_punct(const std::string& token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && is_edge_punct(token[b])) ++b;
  while (e > b && is_edge_punct(token[e - 1])) --e;
  return token.substr(b, e - b);
}

bool is_elongated(const std::string& token) {
  int run = 1;
  for (std::size_t i = 1; i < token.size(); ++i) {
    run = token[i] == token[i - 1] ? run + 1 : 1;
    if (run >= 3) return true;
  }
  return false;
}

bool is_all_caps(std::string_view token) {
  bool any = false;
  for (char c : token) {
    if (c >= 'a' && c <= 'z') return false;
    if (c >= 'A' && c <= 'Z') any = true;
  }
  return any;
}

}  // namespace

std::vector<std::string> Lexicon::labels() const {
  std::set<std::string> s;
  for (const auto& [_, by_label] : entries) {
    for (const auto& [label, __] : by_label) s.insert(label);
  }
  return {s.begin(), s.end()};
}

const std::map<std::string, double>* Lexicon::find(const std::string& term) const {
  auto it = entries.find(term);
  return it == entries.end() ? nullptr : &it->second;
}

Lexicon load_lexicon(std::istream& in, std::string name) {
  Lexicon lex;
  lex.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected term, label, score");
    }
    std::string term = lowercase(line.substr(0, t1));
    std::string label = line.substr(t1 + 1, t2 - t1 - 1);
    std::string_view score_text = std::string_view(line).substr(t2 + 1);
    double score = 0.0;
    auto [p, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (ec != std::errc() || p != score_text.data() + score_text.size() || !std::isfinite(score)) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": non-numeric score '" +
                                         std::string(score_text) + "'");
    }
    auto& slot = lex.entries[term];
    if (slot.count(label)) {
      lex.warnings.push_back("line " + std::to_string(line_no) + ": duplicate entry " + term + "/" + label +
                             ", keeping the last score");
    }
    slot[label] = score;
  }
  return lex;
}

Lexicon load_lexicon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open lexicon '" + path + "'");
  std::string name = path.substr(path.find_last_of('/') + 1);
  try {
    return load_lexicon(in, name);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

WordSet default_negators() {
  return {"not", "no", "never", "n't", "cannot", "nobody", "nothing", "neither", "nor"};
}

WordSet load_negators(std::istream& in) {
  WordSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto word = lowercase(line);
    if (!word.empty()) out.insert(word);
  }
  return out;
}

bool is_negator(const std::string& token, const WordSet& negators) {
  if (negators.count(token)) return true;
  const std::string bare = strip_punct(token);
  if (negators.count(bare)) return true;
  // contractions such as "don't" when "n't" is a negator
  return negators.count("n't") && bare.size() > 3 && bare.compare(bare.size() - 3, 3, "n't") == 0;
}

LexiconFeatureLayout lexicon_feature_layout(std::span<const Lexicon> lexicons) {
  LexiconFeatureLayout layout;
  for (const auto& lex : lexicons) {
    for (const auto& label : lex.labels()) {
      for (const char* agg : {"sum", "max", "count"}) {
        layout.names.push_back(lex.name + ":" + label + ":" + agg);
      }
    }
  }
  for (const char* g : {"tokens", "allcaps", "elongated", "exclaims", "questions", "hashtags"}) {
    layout.names.push_back(std::string("global:") + g);
  }
  return layout;
}

nn::Vector extract_lexicon_features(std::span<const std::string> tokens, std::span<const Lexicon> lexicons,
                                    const WordSet& negators, std::optional<std::string_view> raw_text) {
  const auto layout = lexicon_feature_layout(lexicons);
  nn::Vector f = nn::Vector::Zero(static_cast<Eigen::Index>(layout.size()));

  // Negation sign for every token.
  std::vector<double> sign(tokens.size(), 1.0);
  bool in_scope = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (in_scope) {
      sign[i] = -1.0;
      if (closes_scope(tokens[i])) in_scope = false;
    } else if (is_negator(tokens[i], negators)) {
      in_scope = !closes_scope(tokens[i]);
    }
  }

  Eigen::Index offset = 0;
  for (const auto& lex : lexicons) {
    const auto labels = lex.labels();
    std::vector<bool> seen(labels.size(), false);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto* scores = lex.find(tokens[i]);
      if (!scores) scores = lex.find(strip_punct(tokens[i]));
      if (!scores) continue;
      for (const auto& [label, score] : *scores) {
        const auto li = static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), label) - labels.begin());
        const Eigen::Index base = offset + static_cast<Eigen::Index>(3 * li);
        const double v = sign[i] * score;
        f(base) += v;
        f(base + 1) = seen[li] ? std::max(f(base + 1), v) : v;
        f(base + 2) += 1.0;
        seen[li] = true;
      }
    }
    offset += static_cast<Eigen::Index>(3 * labels.size());
  }

  std::size_t elongated = 0, exclaims = 0, questions = 0, hashtags = 0;
  for (const auto& t : tokens) {
    if (is_elongated(t)) ++elongated;
    exclaims += static_cast<std::size_t>(std::count(t.begin(), t.end(), '!'));
    questions += static_cast<std::size_t>(std::count(t.begin(), t.end(), '?'));
    if (t.size() > 1 && t.front() == '#') ++hashtags;
  }
  std::size_t caps = 0;
  if (raw_text) {
    std::size_t i = 0;
    const auto& s = *raw_text;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j > i && is_all_caps(s.substr(i, j - i))) ++caps;
      i = j;
    }
  }
  f(offset + 0) = static_cast<double>(tokens.size());
  f(offset + 1) = static_cast<double>(caps);
  f(offset + 2) = static_cast<double>(elongated);
  f(offset + 3) = static_cast<double>(exclaims);
  f(offset + 4) = static_cast<double>(questions);
  f(offset + 5) = static_cast<double>(hashtags);
  return f;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

SparseVector extract_ngram_features(std::span<const std::string> tokens, const NgramConfig& config) {
  if (config.hash_dim == 0) throw Error(ErrorCode::kConfig, "hash_dim must be positive");
  std::map<std::uint32_t, double> acc;
  auto bump = [&](const std::string& key) {
    acc[static_cast<std::uint32_t>(fnv1a64(key) % config.hash_dim)] += 1.0;
  };
  if (config.word_max > 0) {
    for (int n = std::max(1, config.word_min); n <= config.word_max; ++n) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        std::string key = "w:";
        for (int k = 0; k < n; ++k) {
          if (k) key.push_back(' ');
          key += tokens[i + static_cast<std::size_t>(k)];
        }
        bump(key);
      }
    }
  }
  if (config.char_max > 0) {
    std::string text;
    for (const auto& t : tokens) {
      if (!text.empty()) text.push_back(' ');
      text += t;
    }
    for (int n = std::max(1, config.char_min); n <= config.char_max; ++n) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= text.size(); ++i) {
        bump("c:" + text.substr(i, static_cast<std::size_t>(n)));
      }
    }
  }
  return {acc.begin(), acc.end()};
}

nn::Vector densify(const SparseVector& v, std::size_t dim) {
  nn::Vector out = nn::Vector::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& [i, x] : v) {
    if (i >= dim) throw Error(ErrorCode::kShape, "sparse index outside dense dimension");
    out(i) += x;
  }
  return out;
}

}  // namespace emoint
