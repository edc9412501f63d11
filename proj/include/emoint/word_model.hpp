#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emoint/data.hpp"
#include "emoint/networks.hpp"

namespace emoint {

// Whitespace split of already-preprocessed text.
std::vector<std::string> tokenize_words(std::string_view preprocessed_text);

struct PretrainedEmbeddings {
  std::vector<std::string> tokens;  // unique, in first-seen order
  nn::EmbeddingTable table;         // row k belongs to tokens[k]
  std::vector<std::string> warnings;

  std::optional<Eigen::Index> row_of(const std::string& token) const;

 private:
  friend PretrainedEmbeddings load_embeddings(std::istream& in, int dim);
  std::unordered_map<std::string, Eigen::Index> index_;
};

/// Reads GloVe-style text: `token v1 ... v_dim` per line, space-separated.
/// A repeated token keeps its first row position but takes the values of its
/// last occurrence, with a warning. Wrong field counts fail with the line number.
PretrainedEmbeddings load_embeddings(std::istream& in, int dim);
PretrainedEmbeddings load_embeddings_file(const std::string& path, int dim);

class WordVocab {
 public:
  static constexpr int kOov = 0;
  static constexpr std::string_view kOovToken = "OOV";

  // Tokens by frequency (descending), then lexicographically, after OOV.
  static WordVocab build(std::span<const std::vector<std::string>> token_lists);
  static WordVocab from_tokens(std::vector<std::string> tokens);  // excludes OOV

  int size() const { return static_cast<int>(tokens_.size()) + 1; }
  int index_of(const std::string& token) const;
  const std::string& token_at(int index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(std::span<const std::string> tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct VocabBuild {
  WordVocab vocab;
  nn::EmbeddingTable table;
  std::size_t pretrained_hits = 0;
};

inline constexpr double kEmbeddingInitScale = 0.05;

/// Vocabulary over the training tokens plus OOV. Rows of tokens found in
/// `pretrained` are copied verbatim; every other row, OOV included, is drawn
/// from uniform(-0.05, 0.05) in vocabulary order.
VocabBuild build_word_vocab(std::span<const std::vector<std::string>> token_lists,
                            const PretrainedEmbeddings* pretrained, int dim, nn::Rng& rng);

struct WordModelConfig {
  nn::CellKind cell = nn::CellKind::kGru;
  int hidden_dim = 32;
  int embed_dim = 50;
  double lr = 0.001;
  double clip_norm = 1.0;
  int epochs = 50;
  int batch = 16;
  int patience = 10;  // epochs without dev improvement; only with a dev set
  std::uint64_t seed = 1;
};

struct WordModel {
  WordVocab vocab;
  nn::BiRegressor net;
};

struct WordTrainingLog {
  std::vector<double> epoch_train_mse;
  std::vector<double> epoch_dev_pearson;  // empty without a dev set
  int best_epoch = 0;
};

using EpochCallback = std::function<void(int epoch, double train_mse)>;

/// Trains one per-emotion regressor with Adam on MSE against gold intensity.
///
/// All records must carry the same emotion and a gold intensity. Records
/// whose text tokenizes to nothing are skipped. With `dev`, training keeps
/// the parameters of the best dev-Pearson epoch and stops after `patience`
/// epochs without improvement.
WordModel train_word_model(std::span<const TweetRecord> train, const WordModelConfig& config,
                           const PretrainedEmbeddings* pretrained = nullptr,
                           std::span<const TweetRecord> dev = {}, WordTrainingLog* log = nullptr,
                           const EpochCallback& on_epoch = {});

// Intensity in [0,1]. Throws Error(kInput) if no tokens survive preprocessing.
double predict_word(const WordModel& model, std::string_view text);

void save_word_model(const WordModel& model, const std::string& path, std::uint64_t seed);
WordModel load_word_model(const std::string& path);

}  // namespace emoint
