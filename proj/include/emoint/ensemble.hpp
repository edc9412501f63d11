#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoint/data.hpp"

namespace emoint {

// Convex weights for the baseline, word-level and character-level legs.
struct EnsembleWeights {
  double baseline = 1.0;
  double word = 0.0;
  double charlm = 0.0;

  // Non-negative and summing to 1 within 1e-9.
  bool valid() const;
  bool operator==(const EnsembleWeights&) const = default;
};

// Per-record predictions of the three legs over the same records.
struct PredictionSet {
  std::vector<double> baseline;
  std::vector<double> word;
  std::vector<double> charlm;
  std::vector<double> gold;  // empty when unlabeled

  std::size_t size() const { return baseline.size(); }
  void validate() const;
};

// w_b * baseline + w_w * word + w_c * charlm, elementwise.
std::vector<double> combine(const PredictionSet& preds, const EnsembleWeights& w);

// Lattice points (w_b, w_c) in {0, step, 2 step, ...} with w_b + w_c <= 1,
// lexicographic in (w_b, w_c); w_w takes the remainder.
std::vector<EnsembleWeights> simplex_grid(double step);

struct GridSearchResult {
  EnsembleWeights weights;
  double score = 0.0;  // mean dev Pearson over the four emotions
  std::size_t candidates = 0;
  std::vector<std::string> warnings;
};

/// Exhaustive search of simplex_grid(step) for the triple maximizing the
/// mean over emotions of Pearson(combined, gold); the first maximum in grid
/// order wins. An emotion whose correlation is undefined counts as 0 and
/// adds a warning.
GridSearchResult grid_search_weights(std::span<const PredictionSet> dev_by_emotion, double step);

// Mean over emotions of Pearson for fixed weights, undefined values counted as 0.
double mean_pearson(std::span<const PredictionSet> by_emotion, const EnsembleWeights& w,
                    std::vector<std::string>* warnings = nullptr);

// One triple per emotion, indexed by emotion_index().
struct WeightTable {
  std::array<EnsembleWeights, 4> by_emotion;

  static WeightTable uniform(const EnsembleWeights& w);
  bool is_uniform() const;
};

// Independent grid search for each emotion's dev set.
std::array<GridSearchResult, 4> grid_search_per_emotion(std::span<const PredictionSet> dev_by_emotion,
                                                        double step);

/// Weights file: `w_b = <value>`, `w_w = <value>`, `w_c = <value>` lines for
/// one shared triple, or `<emotion>.w_b = <value>` etc. for all four
/// emotions. `#` starts a comment.
void write_weights(std::ostream& out, const WeightTable& w);
WeightTable read_weights(std::istream& in);
WeightTable read_weights_file(const std::string& path);
void save_weights_file(const std::string& path, const WeightTable& w);

}  // namespace emoint
