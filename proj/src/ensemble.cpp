#include "emoint/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include "emoint/data.hpp"
#include "emoint/error.hpp"
#include "emoint/metrics.hpp"

namespace emoint {

bool EnsembleWeights::valid() const {
  for (double w : {baseline, word, charlm}) {
    if (!(w >= 0.0) || !std::isfinite(w)) return false;
  }
  return std::abs(baseline + word + charlm - 1.0) <= 1e-9;
}

void PredictionSet::validate() const {
  const std::size_t n = baseline.size();
  if (word.size() != n || charlm.size() != n || (!gold.empty() && gold.size() != n)) {
    throw Error(ErrorCode::kShape, "prediction legs differ in length");
  }
}

std::vector<double> combine(const PredictionSet& preds, const EnsembleWeights& w) {
  preds.validate();
  if (!w.valid()) throw Error(ErrorCode::kConfig, "ensemble weights must be non-negative and sum to 1");
  std::vector<double> out(preds.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = w.baseline * preds.baseline[i] + w.word * preds.word[i] + w.charlm * preds.charlm[i];
  }
  return out;
}

std::vector<EnsembleWeights> simplex_grid(double step) {
  if (!(step > 0.0 && step <= 0.5)) throw Error(ErrorCode::kConfig, "grid step must lie in (0, 0.5]");
  // Integer lattice so that 1 - w_b - w_c never drifts below zero.
  const long k = static_cast<long>(std::floor(1.0 / step + 1e-9));
  std::vector<EnsembleWeights> out;
  for (long i = 0; i <= k; ++i) {
    for (long j = 0; i + j <= k; ++j) {
      EnsembleWeights w;
      w.baseline = static_cast<double>(i) * step;
      w.charlm = static_cast<double>(j) * step;
      if (w.baseline > 1.0) w.baseline = 1.0;
      if (w.baseline + w.charlm > 1.0) w.charlm = 1.0 - w.baseline;
      w.word = std::max(0.0, 1.0 - w.baseline - w.charlm);
      out.push_back(w);
    }
  }
  return out;
}

double mean_pearson(std::span<const PredictionSet> by_emotion, const EnsembleWeights& w,
                    std::vector<std::string>* warnings) {
  if (by_emotion.empty()) throw Error(ErrorCode::kInput, "no prediction sets");
  double sum = 0.0;
  for (std::size_t e = 0; e < by_emotion.size(); ++e) {
    const auto& set = by_emotion[e];
    if (set.gold.size() != set.size()) throw Error(ErrorCode::kInput, "dev predictions lack gold labels");
    auto combined = combine(set, w);
    auto r = pearson(combined, set.gold);
    if (r) {
      sum += *r;
    } else if (warnings) {
      warnings->push_back("set " + std::to_string(e) + ": undefined Pearson, counted as 0");
    }
  }
  return sum / static_cast<double>(by_emotion.size());
}

GridSearchResult grid_search_weights(std::span<const PredictionSet> dev_by_emotion, double step) {
  GridSearchResult best;
  auto grid = simplex_grid(step);
  best.candidates = grid.size();
  bool first = true;
  for (const auto& w : grid) {
    std::vector<std::string> warnings;
    const double score = mean_pearson(dev_by_emotion, w, &warnings);
    if (first || score > best.score) {
      best.weights = w;
      best.score = score;
      first = false;
    }
    for (auto& msg : warnings) {
      if (best.warnings.size() < 16) best.warnings.push_back(std::move(msg));
    }
  }
  return best;
}

WeightTable WeightTable::uniform(const EnsembleWeights& w) {
  WeightTable t;
  t.by_emotion.fill(w);
  return t;
}

bool WeightTable::is_uniform() const {
  return std::all_of(by_emotion.begin(), by_emotion.end(), [&](const auto& w) { return w == by_emotion[0]; });
}

std::array<GridSearchResult, 4> grid_search_per_emotion(std::span<const PredictionSet> dev_by_emotion,
                                                        double step) {
  if (dev_by_emotion.size() != 4) throw Error(ErrorCode::kInput, "per-emotion search needs four prediction sets");
  std::array<GridSearchResult, 4> out;
  for (std::size_t e = 0; e < 4; ++e) out[e] = grid_search_weights(dev_by_emotion.subspan(e, 1), step);
  return out;
}

void write_weights(std::ostream& out, const WeightTable& table) {
  auto triple = [&](const std::string& prefix, const EnsembleWeights& w) {
    out << prefix << "w_b = " << format_decimal(w.baseline) << '\n'
        << prefix << "w_w = " << format_decimal(w.word) << '\n'
        << prefix << "w_c = " << format_decimal(w.charlm) << '\n';
  };
  if (table.is_uniform()) {
    triple("", table.by_emotion[0]);
    return;
  }
  for (auto e : kAllEmotions) triple(std::string(emotion_name(e)) + ".", table.by_emotion[emotion_index(e)]);
}

WeightTable read_weights(std::istream& in) {
  // slot 0..3: per emotion, slot 4: shared
  std::array<std::array<std::optional<double>, 3>, 5> seen{};
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "weights line " + std::to_string(line_no) + ": ";
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kParse, where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    double v = 0.0;
    auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || p != val.data() + val.size()) throw Error(ErrorCode::kParse, where + "bad number '" + val + "'");

    std::size_t slot = 4;
    if (auto dot = key.find('.'); dot != std::string::npos) {
      try {
        slot = emotion_index(parse_emotion(key.substr(0, dot)));
      } catch (const Error&) {
        throw Error(ErrorCode::kParse, where + "unknown key '" + key + "'");
      }
      key.erase(0, dot + 1);
    }
    std::size_t field = 0;
    if (key == "w_b") field = 0;
    else if (key == "w_w") field = 1;
    else if (key == "w_c") field = 2;
    else throw Error(ErrorCode::kParse, where + "unknown key '" + key + "'");
    if (seen[slot][field]) throw Error(ErrorCode::kParse, where + "repeated key");
    seen[slot][field] = v;
  }

  auto complete = [](const std::array<std::optional<double>, 3>& s) { return s[0] && s[1] && s[2]; };
  auto any = [](const std::array<std::optional<double>, 3>& s) { return s[0] || s[1] || s[2]; };
  auto triple = [](const std::array<std::optional<double>, 3>& s) { return EnsembleWeights{*s[0], *s[1], *s[2]}; };
  WeightTable table;
  const bool shared = any(seen[4]);
  const bool per = any(seen[0]) || any(seen[1]) || any(seen[2]) || any(seen[3]);
  if (shared == per) throw Error(ErrorCode::kParse, "weights file needs either w_b, w_w, w_c or per-emotion triples");
  if (shared) {
    if (!complete(seen[4])) throw Error(ErrorCode::kParse, "weights file needs w_b, w_w and w_c");
    table = WeightTable::uniform(triple(seen[4]));
  } else {
    for (std::size_t e = 0; e < 4; ++e) {
      if (!complete(seen[e])) {
        throw Error(ErrorCode::kParse, "weights file lacks a complete triple for " +
                                           std::string(emotion_name(kAllEmotions[e])));
      }
      table.by_emotion[e] = triple(seen[e]);
    }
  }
  for (const auto& w : table.by_emotion) {
    if (!w.valid()) throw Error(ErrorCode::kConfig, "weights must be non-negative and sum to 1");
  }
  return table;
}

WeightTable read_weights_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open weights file '" + path + "'");
  return read_weights(in);
}

void save_weights_file(const std::string& path, const WeightTable& w) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp + "'");
    write_weights(out, w);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error(ErrorCode::kIo, "cannot rename '" + tmp + "'");
}

}  // namespace emoint
