#include <sstream>

#include "doctest.h"
#include "emoint/error.hpp"
#include "emoint/lexicon.hpp"
#include "emoint/word_model.hpp"

using namespace emoint;

namespace {

Lexicon lex(const std::string& text, const std::string& name = "lex") {
  std::istringstream in(text);
  return load_lexicon(in, name);
}

double feature(const nn::Vector& f, const std::vector<Lexicon>& lexicons, const std::string& name) {
  const auto layout = lexicon_feature_layout(lexicons);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout.names[i] == name) return f(static_cast<Eigen::Index>(i));
  }
  FAIL("no feature " << name);
  return 0.0;
}

nn::Vector features(const std::vector<std::string>& tokens, const std::vector<Lexicon>& lexicons,
                    std::optional<std::string_view> raw = std::nullopt) {
  return extract_lexicon_features(tokens, lexicons, default_negators(), raw);
}

}  // namespace

TEST_CASE("lexicon loading") {
  auto l = lex("happy\tjoy\t0.8\n");
  REQUIRE(l.find("happy"));
  CHECK(l.find("happy")->at("joy") == 0.8);
  CHECK(lex("").entries.empty());
  try {
    lex("happy\tjoy\t0.8\nsad\tsadness\tx\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  auto dup = lex("Happy\tjoy\t0.5\nhappy\tjoy\t0.9\nhappy\tfear\t0.1\n");
  CHECK(dup.warnings.size() == 1);
  CHECK(dup.find("happy")->at("joy") == 0.9);
  CHECK(dup.labels() == std::vector<std::string>{"fear", "joy"});
  CHECK_THROWS_AS(lex("only\ttwo\n"), Error);
}

TEST_CASE("lexicon features and negation") {
  std::vector<Lexicon> ls = {lex("happy\tjoy\t0.8\n")};
  auto f = features({"happy"}, ls);
  CHECK(feature(f, ls, "lex:joy:sum") == doctest::Approx(0.8));
  CHECK(feature(f, ls, "lex:joy:max") == doctest::Approx(0.8));
  CHECK(feature(f, ls, "lex:joy:count") == 1.0);

  CHECK(feature(features({"not", "happy"}, ls), ls, "lex:joy:sum") == doctest::Approx(-0.8));
  CHECK(feature(features({"not", "happy!", "happy"}, ls), ls, "lex:joy:sum") == doctest::Approx(0.0));
  CHECK(feature(features({"don't", "feel", "happy"}, ls), ls, "lex:joy:sum") == doctest::Approx(-0.8));
  CHECK(feature(features({"never", "ever,", "happy"}, ls), ls, "lex:joy:sum") == doctest::Approx(0.8));
  CHECK(feature(features({"nothing"}, ls), ls, "lex:joy:count") == 0.0);

  // negating twice restores the sum
  const double base = feature(features({"happy", "happy"}, ls), ls, "lex:joy:sum");
  const double once = feature(features({"not", "happy", "happy"}, ls), ls, "lex:joy:sum");
  CHECK(once == doctest::Approx(-base));
}

TEST_CASE("sum features are additive over concatenation") {
  std::vector<Lexicon> ls = {lex("happy\tjoy\t0.8\nsad\tsadness\t0.6\nglad\tjoy\t0.3\n"), lex("sad\tneg\t1\n", "b")};
  std::vector<std::string> a = {"happy", "sad", "day."};
  std::vector<std::string> b = {"so", "glad", "not", "sad"};
  std::vector<std::string> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  auto fa = features(a, ls), fb = features(b, ls), fab = features(ab, ls);
  for (const auto& name : {"lex:joy:sum", "lex:sadness:sum", "b:neg:sum", "lex:joy:count", "global:tokens"}) {
    CHECK(feature(fab, ls, name) == doctest::Approx(feature(fa, ls, name) + feature(fb, ls, name)));
  }
}

TEST_CASE("global features and layout") {
  std::vector<Lexicon> ls = {lex("a\tx\t1\na\ty\t2\n"), lex("b\tz\t1\n", "second")};
  auto layout = lexicon_feature_layout(ls);
  CHECK(layout.size() == 3 * 3 + 6);
  CHECK(layout.names[0] == "lex:x:sum");
  CHECK(layout.names[3] == "lex:y:sum");
  CHECK(layout.names[6] == "second:z:sum");
  CHECK(layout.names.back() == "global:hashtags");
  CHECK(lexicon_feature_layout(ls).names == layout.names);

  const std::string raw = "SO cooool!! why? #fun #life LOL @x";
  auto tokens = tokenize_words(preprocess(raw));
  auto f = features(tokens, ls, raw);
  CHECK(feature(f, ls, "global:tokens") == static_cast<double>(tokens.size()));
  CHECK(feature(f, ls, "global:allcaps") == 2.0);
  CHECK(feature(f, ls, "global:elongated") == 1.0);
  CHECK(feature(f, ls, "global:exclaims") == 2.0);
  CHECK(feature(f, ls, "global:questions") == 1.0);
  CHECK(feature(f, ls, "global:hashtags") == 2.0);
  CHECK(feature(features(tokens, ls), ls, "global:allcaps") == 0.0);

  std::vector<Lexicon> none;
  CHECK(extract_lexicon_features({}, none, default_negators()).size() == 6);
}

TEST_CASE("negators") {
  auto d = default_negators();
  for (const char* w : {"not", "no", "never", "n't", "cannot", "nobody", "nothing", "neither", "nor"}) CHECK(d.count(w));
  std::istringstream in("nope\n\nNah\n");
  auto custom = load_negators(in);
  CHECK(custom == WordSet{"nah", "nope"});
  CHECK(is_negator("nope", custom));
  CHECK_FALSE(is_negator("not", custom));
  CHECK(is_negator("can't", d));
  CHECK_FALSE(is_negator("can't", custom));
}

TEST_CASE("hashed n-grams") {
  NgramConfig c;
  CHECK(extract_ngram_features({}, c).empty());

  std::vector<std::string> t = {"abab"};
  NgramConfig chars3{0, 0, 3, 3, 1024};
  chars3.word_max = 0;
  auto v = extract_ngram_features(t, chars3);
  double total = 0.0;
  for (const auto& [i, x] : v) total += x;
  CHECK(total == 2.0);
  std::map<std::uint32_t, double> want;
  want[static_cast<std::uint32_t>(fnv1a64("c:aba") % 1024)] += 1;
  want[static_cast<std::uint32_t>(fnv1a64("c:bab") % 1024)] += 1;
  CHECK(v == SparseVector(want.begin(), want.end()));

  std::vector<std::string> words = {"i", "am", "happy"};
  auto a = extract_ngram_features(words, c);
  CHECK(a == extract_ngram_features(words, c));
  double words_total = 0.0;
  for (const auto& [i, x] : a) words_total += x;
  // 3 unigrams + 2 bigrams + char 3/4-grams of "i am happy" (8 + 7)
  CHECK(words_total == 3 + 2 + 8 + 7);
  for (std::size_t k = 1; k < a.size(); ++k) CHECK(a[k - 1].first < a[k].first);

  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  auto dense = densify(a, 1024);
  CHECK(dense.sum() == words_total);
  CHECK_THROWS_AS(densify(a, 2), Error);
}
