#include <sstream>

#include "doctest.h"
#include "emoint/error.hpp"
#include "emoint/metrics.hpp"
#include "emoint/rnn.hpp"
#include "oracles.hpp"

using namespace emoint;

TEST_CASE("pearson examples") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y = {2, 1, 4, 3, 5};
  CHECK(*pearson(x, y) == 0.8);
  CHECK(*pearson(x, x) == 1.0);
  std::vector<double> neg = {-1, -2, -3, -4, -5};
  CHECK(*pearson(x, neg) == -1.0);
  CHECK_FALSE(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}));
  CHECK_FALSE(pearson(std::vector<double>{1}, std::vector<double>{2}));
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), Error);
}

TEST_CASE("spearman examples") {
  CHECK(average_ranks(std::vector<double>{1, 1, 2}) == std::vector<double>{1.5, 1.5, 3});
  CHECK(*spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == -1.0);
  std::vector<double> x = {0.1, 0.5, 0.2, 0.9, 0.3};
  std::vector<double> cubed;
  for (double v : x) cubed.push_back(v * v * v + 2.0);
  CHECK(*spearman(x, cubed) == 1.0);
  CHECK_FALSE(spearman(std::vector<double>{2, 2}, std::vector<double>{1, 3}));
}

TEST_CASE("correlations match the naive oracle") {
  nn::Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(nn::uniform(rng, 0, 40));
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      // coarse grid values inject ties
      x.push_back(std::floor(nn::uniform(rng, 0, 6)) / 5.0);
      y.push_back(nn::uniform(rng, 0, 1));
    }
    const double po = oracle::pearson(x, y);
    const double so = oracle::spearman(x, y);
    auto p = pearson(x, y);
    auto s = spearman(x, y);
    CHECK(p.has_value() == !std::isnan(po));
    CHECK(s.has_value() == !std::isnan(so));
    if (p) CHECK(std::abs(*p - po) <= 1e-12);
    if (s) CHECK(std::abs(*s - so) <= 1e-12);
    CHECK(average_ranks(x) == oracle::ranks(x));
    if (p) {
      CHECK(std::abs(*pearson(y, x) - *p) <= 1e-12);
      std::vector<double> ax;
      for (double v : x) ax.push_back(-3.0 * v + 1.0);
      CHECK(std::abs(*pearson(ax, y) + *p) <= 1e-12);
    }
  }
}

TEST_CASE("evaluate ranges") {
  SeriesByEmotion s;
  nn::Rng rng(4);
  for (auto& e : s) {
    for (int i = 0; i < 20; ++i) {
      e.gold.push_back(nn::uniform(rng, 0, 1));
      e.predicted.push_back(nn::uniform(rng, 0, 1));
    }
  }
  s[0].gold[0] = 0.5;
  auto r = evaluate(s);
  for (std::size_t e = 0; e < 4; ++e) {
    std::size_t want = 0;
    for (double g : s[e].gold) want += g >= 0.5 ? 1 : 0;
    CHECK(r.high.counts[e] == want);
    CHECK(r.full.counts[e] == 20);
  }
  double mean = 0;
  for (const auto& c : r.full.per_emotion) mean += *c.pearson / 4.0;
  CHECK(*r.full.avg_p == doctest::Approx(mean).epsilon(1e-15));

  // all gold in the high range: both ranges agree
  auto high = s;
  for (auto& e : high) {
    for (auto& g : e.gold) g = 0.5 + g / 2.0;
  }
  auto rh = evaluate(high);
  CHECK(*rh.full.avg_p == *rh.high.avg_p);
  CHECK(*rh.full.avg_s == *rh.high.avg_s);

  // perfect predictions
  auto perfect = s;
  for (auto& e : perfect) e.predicted = e.gold;
  auto rp = evaluate(perfect);
  for (const auto* range : {&rp.full, &rp.high}) {
    CHECK(*range->avg_p == doctest::Approx(1.0));
    CHECK(*range->avg_s == doctest::Approx(1.0));
  }

  // predictions high but gold low: the high range is keyed on gold
  auto keyed = s;
  for (auto& g : keyed[1].gold) g = 0.1 + g * 0.3;
  for (auto& p : keyed[1].predicted) p = 0.9;
  auto rk = evaluate(keyed);
  CHECK(rk.high.counts[1] == 0);
  CHECK_FALSE(rk.high.per_emotion[1].pearson);
  CHECK_FALSE(rk.high.avg_p);
}

TEST_CASE("report formats") {
  SeriesByEmotion s;
  for (auto& e : s) {
    e.gold = {0.1, 0.6, 0.8, 0.9};
    e.predicted = {0.2, 0.5, 0.9, 0.7};
  }
  s[3].gold = {0.1, 0.2, 0.3, 0.6};
  std::vector<NamedReport> rows = {{"ensemble", evaluate(s)}};
  std::ostringstream table;
  write_report_table(table, rows);
  const std::string t = table.str();
  CHECK(t.find("Intensity range: 0-1") != std::string::npos);
  CHECK(t.find("Intensity range: 0.5-1") != std::string::npos);
  CHECK(t.find("avg_p") != std::string::npos);
  CHECK(t.find("sad_s") != std::string::npos);
  CHECK(t.find("NA") != std::string::npos);

  std::ostringstream kv;
  write_report_kv(kv, rows);
  const std::string k = kv.str();
  CHECK(k.find("ensemble.0-1.avg_p ") != std::string::npos);
  CHECK(k.find("ensemble.0.5-1.sad_p NA") != std::string::npos);
  CHECK(k.find("ensemble.0.5-1.joy_n 3") != std::string::npos);
}
