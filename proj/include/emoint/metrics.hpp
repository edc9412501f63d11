#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoint/data.hpp"

namespace emoint {

// A correlation that is undefined (zero variance, fewer than two points) is nullopt.
using Correlation = std::optional<double>;

// Throws Error(kShape) when the lengths differ.
Correlation pearson(std::span<const double> x, std::span<const double> y);
Correlation spearman(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the mean of the positions they occupy.
std::vector<double> average_ranks(std::span<const double> x);

inline constexpr double kHighRangeThreshold = 0.5;

struct CorrelationPair {
  Correlation pearson;
  Correlation spearman;
};

struct RangeReport {
  std::array<CorrelationPair, 4> per_emotion;  // indexed by emotion_index()
  std::array<std::size_t, 4> counts{};
  Correlation avg_p;  // null if any emotion's value is null
  Correlation avg_s;
};

struct EvalReport {
  RangeReport full;  // all records
  RangeReport high;  // records with gold >= 0.5
};

struct EmotionSeries {
  std::vector<double> predicted;
  std::vector<double> gold;
};

using SeriesByEmotion = std::array<EmotionSeries, 4>;

// The high range is selected on gold intensity only.
EvalReport evaluate(const SeriesByEmotion& series);

struct NamedReport {
  std::string model;
  EvalReport report;
};

/// Aligned text table: one block per intensity range, one row per model,
/// columns avg_p avg_s anger_p anger_s fear_p fear_s joy_p joy_s sad_p sad_s.
/// Undefined cells print as "NA".
void write_report_table(std::ostream& out, std::span<const NamedReport> rows);

// `<model>.<range>.<column> <value>` lines, range being "0-1" or "0.5-1".
void write_report_kv(std::ostream& out, std::span<const NamedReport> rows);

}  // namespace emoint
