#include "emoint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "emoint/error.hpp"

namespace emoint {

namespace {

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kShape, "correlation inputs differ in length (" + std::to_string(x.size()) +
                                       " vs " + std::to_string(y.size()) + ")");
  }
}

Correlation mean_of(const std::array<CorrelationPair, 4>& cells, Correlation CorrelationPair::*field) {
  double sum = 0.0;
  for (const auto& c : cells) {
    if (!(c.*field)) return std::nullopt;
    sum += *(c.*field);
  }
  return sum / 4.0;
}

RangeReport range_report(const SeriesByEmotion& series, bool high_only) {
  RangeReport r;
  for (std::size_t e = 0; e < 4; ++e) {
    const auto& s = series[e];
    require_same_length(s.predicted, s.gold);
    std::vector<double> p;
    std::vector<double> g;
    for (std::size_t i = 0; i < s.gold.size(); ++i) {
      if (high_only && !(s.gold[i] >= kHighRangeThreshold)) continue;
      p.push_back(s.predicted[i]);
      g.push_back(s.gold[i]);
    }
    r.counts[e] = g.size();
    r.per_emotion[e] = {pearson(p, g), spearman(p, g)};
  }
  r.avg_p = mean_of(r.per_emotion, &CorrelationPair::pearson);
  r.avg_s = mean_of(r.per_emotion, &CorrelationPair::spearman);
  return r;
}

std::string cell(const Correlation& c) {
  if (!c) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", *c);
  return buf;
}

std::string full_precision(const Correlation& c) {
  if (!c) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *c);
  return buf;
}

// Table column order: averages, then anger, fear, joy, sadness.
constexpr std::array<Emotion, 4> kColumnOrder = {Emotion::kAnger, Emotion::kFear, Emotion::kJoy,
                                                 Emotion::kSadness};

std::string column_prefix(Emotion e) {
  return e == Emotion::kSadness ? "sad" : std::string(emotion_name(e));
}

std::vector<std::pair<std::string, Correlation>> columns(const RangeReport& r) {
  std::vector<std::pair<std::string, Correlation>> out;
  out.emplace_back("avg_p", r.avg_p);
  out.emplace_back("avg_s", r.avg_s);
  for (auto e : kColumnOrder) {
    const auto& c = r.per_emotion[emotion_index(e)];
    out.emplace_back(column_prefix(e) + "_p", c.pearson);
    out.emplace_back(column_prefix(e) + "_s", c.spearman);
  }
  return out;
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    // positions i..j (0-based) share rank mean of (i+1)..(j+1)
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return pearson(rx, ry);
}

EvalReport evaluate(const SeriesByEmotion& series) {
  return {range_report(series, false), range_report(series, true)};
}

void write_report_table(std::ostream& out, std::span<const NamedReport> rows) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());

  auto emit_block = [&](const char* title, RangeReport EvalReport::*range) {
    out << "Intensity range: " << title << '\n';
    out << std::string(name_w, ' ');
    for (const auto& [name, _] : columns(RangeReport{})) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), " %8s", name.c_str());
      out << buf;
    }
    out << '\n';
    for (const auto& r : rows) {
      out << r.model << std::string(name_w - r.model.size(), ' ');
      for (const auto& [_, value] : columns(r.report.*range)) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), " %8s", cell(value).c_str());
        out << buf;
      }
      out << '\n';
    }
  };
  emit_block("0-1", &EvalReport::full);
  out << '\n';
  emit_block("0.5-1", &EvalReport::high);
}

void write_report_kv(std::ostream& out, std::span<const NamedReport> rows) {
  for (const auto& r : rows) {
    for (const auto& [range_name, range] :
         {std::pair{"0-1", &r.report.full}, std::pair{"0.5-1", &r.report.high}}) {
      for (const auto& [name, value] : columns(*range)) {
        out << r.model << '.' << range_name << '.' << name << ' ' << full_precision(value) << '\n';
      }
      for (auto e : kColumnOrder) {
        out << r.model << '.' << range_name << '.' << column_prefix(e) << "_n "
            << range->counts[emotion_index(e)] << '\n';
      }
    }
  }
}

}  // namespace emoint
