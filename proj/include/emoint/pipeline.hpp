#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoint/char_lm.hpp"
#include "emoint/ensemble.hpp"
#include "emoint/lexicon.hpp"
#include "emoint/metrics.hpp"
#include "emoint/svr.hpp"
#include "emoint/word_model.hpp"

namespace emoint {

inline constexpr const char* kConfigEnvVar = "EMOINT_CONFIG";

/// Flat `key = value` configuration; `#` starts a comment. Relative paths
/// resolve against the directory of the config file. Unknown keys, repeated
/// keys and malformed values are errors.
///
///   train, dev, test          dataset TSVs
///   model_dir                 output directory for every artifact
///   lm_corpus                 plain text, one tweet per line (default: train texts)
///   embeddings                word vectors for the word leg (optional)
///   lexicons                  comma-separated lexicon TSVs (optional)
///   negators                  negator word list (optional; built-in list otherwise)
///   seed                      global seed
///   charlm.{cell,hidden_dim,embed_dim,lr,clip_norm,batch,bptt_len,steps,min_count,features}
///   word.{cell,hidden_dim,embed_dim,lr,clip_norm,epochs,batch,patience}
///   svr.{C,epsilon,tol,max_iter}
///   ngram.{word_min,word_max,char_min,char_max,hash_dim}
///   ensemble.{step,per_emotion}
struct PipelineConfig {
  std::filesystem::path train;
  std::filesystem::path dev;
  std::filesystem::path test;
  std::filesystem::path model_dir = "models";
  std::filesystem::path lm_corpus;
  std::filesystem::path embeddings;
  std::vector<std::filesystem::path> lexicons;
  std::filesystem::path negators;
  std::uint64_t seed = 1;
  CharLmConfig charlm;
  CharFeatureMode charlm_features = CharFeatureMode::kLastAndMean;
  WordModelConfig word;
  SvrConfig svr;
  NgramConfig ngram;
  double ensemble_step = 0.05;
  bool ensemble_per_emotion = false;

  static PipelineConfig parse(std::istream& in, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
};

void write_config(std::ostream& out, const PipelineConfig& config);

/// Per-component seed: splitmix64(global ^ fnv1a64(component)).
std::uint64_t component_seed(std::uint64_t global, std::string_view component);
std::uint64_t splitmix64(std::uint64_t x);

struct RunOptions {
  int jobs = 1;
  std::ostream* log = nullptr;  // progress messages; not part of any artifact
};

// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

/// Preprocesses the text field of a dataset TSV, or every line when `plain`.
/// A record whose text would become empty keeps its original text.
/// Returns the number of records written.
std::size_t cmd_preprocess(const std::filesystem::path& in, const std::filesystem::path& out, bool plain,
                           std::vector<std::string>* warnings = nullptr);

// Char-LM on the LM corpus, then one SVR per emotion on its features.
void cmd_train_charlm(const PipelineConfig& config, const RunOptions& options);
// One bidirectional regressor per emotion, early-stopped on dev when given.
void cmd_train_word(const PipelineConfig& config, const RunOptions& options);
// One SVR per emotion on lexicon + hashed n-gram features.
void cmd_train_baseline(const PipelineConfig& config, const RunOptions& options);

// `id` then 2H (or H) decimals per record of `input`, using the trained char-LM.
void cmd_extract_features(const PipelineConfig& config, const std::filesystem::path& input,
                          const std::filesystem::path& output);

struct TuneResult {
  WeightTable weights;
  double score = 0.0;                 // mean dev Pearson of the ensemble
  std::array<double, 3> leg_scores{};  // baseline, word, charlm alone
  bool dominates = false;
  std::vector<std::string> warnings;
};

/// Grid-searches ensemble weights on the dev split (one shared triple, or one
/// per emotion with ensemble.per_emotion) and writes them to
/// `<model_dir>/weights.txt`, with the per-leg and ensemble dev scores in
/// `<model_dir>/tune.log`.
TuneResult cmd_tune(const PipelineConfig& config, const RunOptions& options);

struct PredictRequest {
  std::filesystem::path input;       // default: config test split
  std::filesystem::path output;      // default: <model_dir>/predictions.tsv
  std::filesystem::path weights;     // default: <model_dir>/weights.txt
  bool per_leg = false;              // also write <stem>.{baseline,word,charlm}<ext> beside output
};

/// Writes `id \t emotion \t intensity` in input order. A neural leg whose
/// input is empty after preprocessing predicts 0.5.
void cmd_predict(const PipelineConfig& config, const PredictRequest& request, const RunOptions& options);

struct EvaluateRequest {
  std::vector<std::filesystem::path> predictions;  // one report row each, named by file stem
  std::filesystem::path gold;
  std::filesystem::path output_prefix;  // writes <prefix>.txt and <prefix>.kv
};

/// Predictions must list the gold records' ids in the same order; the first
/// mismatch is reported.
std::vector<NamedReport> cmd_evaluate(const EvaluateRequest& request);

struct LegPredictions {
  std::vector<double> baseline;
  std::vector<double> word;
  std::vector<double> charlm;
};

// Predictions of every trained leg for `records`, in order.
LegPredictions predict_legs(const PipelineConfig& config, const std::vector<TweetRecord>& records,
                            const RunOptions& options);

// Baseline feature vector for one raw tweet.
nn::Vector baseline_features(std::string_view raw_text, std::span<const Lexicon> lexicons,
                             const WordSet& negators, const NgramConfig& ngram);

}  // namespace emoint
