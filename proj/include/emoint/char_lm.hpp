#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emoint/networks.hpp"

namespace emoint {

// Byte-level character vocabulary. Index 0 is <unk>, 1 is <eos>; the rest
// follow frequency (descending), then byte value.
class CharVocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kEos = 1;

  static CharVocab build(std::span<const std::string> corpus, int min_count);
  // `chars` lists the non-special symbols in index order.
  static CharVocab from_chars(std::string chars);

  int size() const { return static_cast<int>(chars_.size()) + 2; }
  int index_of(char c) const;
  std::optional<char> char_at(int index) const;
  const std::string& chars() const { return chars_; }
  std::vector<int> encode(std::string_view text) const;

  bool operator==(const CharVocab& other) const { return chars_ == other.chars_; }

 private:
  std::string chars_;
  std::vector<int> lookup_ = std::vector<int>(256, kUnk);
};

struct CharLmConfig {
  nn::CellKind cell = nn::CellKind::kLstm;
  int hidden_dim = 1024;
  int embed_dim = 32;  // 0 selects one-hot inputs
  double lr = 0.0005;
  double clip_norm = 1.0;
  int batch = 32;      // parallel lanes over the token stream
  int bptt_len = 64;
  int steps = 1000;
  int min_count = 1;
  std::uint64_t seed = 1;
};

struct CharLmModel {
  CharVocab vocab;
  nn::TokenLm net;

  int hidden_dim() const { return static_cast<int>(net.hidden_dim()); }
};

struct CharLmTrainingLog {
  std::vector<double> step_loss;  // mean cross-entropy (nats) of each update's batch
};

using StepCallback = std::function<void(int step, double loss)>;

/// Trains a next-character model on `corpus` (one preprocessed tweet per entry).
///
/// Tweets are encoded with a trailing <eos> and concatenated into one stream,
/// which is cut into `batch` contiguous lanes. Each step consumes the next
/// `bptt_len` tokens of every lane, carrying state across windows and
/// resetting it when a lane wraps. Gradients are clipped to `clip_norm`
/// before each Adam update. Throws Error(kNumeric) if the loss goes
/// non-finite.
CharLmModel train_char_lm(std::span<const std::string> corpus, const CharLmConfig& config,
                          CharLmTrainingLog* log = nullptr, const StepCallback& on_step = {});

// Mean next-character cross-entropy over the concatenated <eos>-terminated
// stream, evaluated from a zero state.
double char_lm_cross_entropy(const CharLmModel& model, std::span<const std::string> corpus);

enum class CharFeatureMode { kLastAndMean, kLastOnly };

/// Tweet representation from a frozen model.
///
/// The text is preprocessed, encoded without <eos>, and run from a zero
/// state. kLastAndMean yields concat(h_T, mean_t h_t) of length
/// 2 * hidden_dim; kLastOnly yields h_T. Throws Error(kInput) when nothing
/// remains after preprocessing.
nn::Vector extract_features(const CharLmModel& model, std::string_view text,
                            CharFeatureMode mode = CharFeatureMode::kLastAndMean);

void save_char_lm(const CharLmModel& model, const std::string& path, std::uint64_t seed);
// Loads any model written by save_char_lm; rejects version, kind and shape mismatches.
CharLmModel import_external_lm(const std::string& path);

// One line per tweet: id followed by the feature values, space-separated.
void write_feature_line(std::ostream& out, std::string_view id, const nn::Vector& features);

}  // namespace emoint
