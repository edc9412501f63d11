#include "emoint/word_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>

#include "emoint/archive.hpp"
#include "emoint/error.hpp"
#include "emoint/metrics.hpp"
#include "emoint/optim.hpp"

namespace emoint {

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---- pre-trained embeddings ----

std::optional<Eigen::Index> PretrainedEmbeddings::row_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

PretrainedEmbeddings load_embeddings(std::istream& in, int dim) {
  if (dim <= 0) throw Error(ErrorCode::kConfig, "embedding dim must be positive");
  PretrainedEmbeddings out;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = tokenize_words(line);
    if (fields.empty()) continue;
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected token + " +
                                         std::to_string(dim) + " values, found " +
                                         std::to_string(fields.size() - 1));
    }
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      const auto& f = fields[static_cast<std::size_t>(k) + 1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), row[static_cast<std::size_t>(k)]);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(row[static_cast<std::size_t>(k)])) {
        throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": bad value '" + f + "'");
      }
    }
    auto [it, inserted] = out.index_.try_emplace(fields[0], static_cast<Eigen::Index>(rows.size()));
    if (inserted) {
      out.tokens.push_back(fields[0]);
      rows.push_back(std::move(row));
    } else {
      out.warnings.push_back("line " + std::to_string(line_no) + ": duplicate token '" + fields[0] +
                             "', keeping the last vector");
      rows[static_cast<std::size_t>(it->second)] = std::move(row);
    }
  }
  out.table = nn::EmbeddingTable::zeros(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < dim; ++c) {
      out.table.table(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
  }
  return out;
}

PretrainedEmbeddings load_embeddings_file(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open embedding file '" + path + "'");
  try {
    return load_embeddings(in, dim);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

// ---- vocabulary ----

WordVocab WordVocab::build(std::span<const std::vector<std::string>> token_lists) {
  std::map<std::string, std::size_t> counts;
  for (const auto& list : token_lists) {
    for (const auto& t : list) ++counts[t];
  }
  counts.erase(std::string(kOovToken));
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& [t, _] : items) tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

WordVocab WordVocab::from_tokens(std::vector<std::string> tokens) {
  WordVocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i] == kOovToken || !v.index_.emplace(v.tokens_[i], static_cast<int>(i) + 1).second) {
      throw Error(ErrorCode::kFormat, "duplicate or reserved token '" + v.tokens_[i] + "' in vocabulary");
    }
  }
  return v;
}

int WordVocab::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOov : it->second;
}

const std::string& WordVocab::token_at(int index) const {
  static const std::string oov(kOovToken);
  if (index <= 0 || index >= size()) return oov;
  return tokens_[static_cast<std::size_t>(index - 1)];
}

std::vector<int> WordVocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index_of(t));
  return ids;
}

VocabBuild build_word_vocab(std::span<const std::vector<std::string>> token_lists,
                            const PretrainedEmbeddings* pretrained, int dim, nn::Rng& rng) {
  if (pretrained && pretrained->table.dim() != dim && pretrained->table.vocab_size() > 0) {
    throw Error(ErrorCode::kShape, "pre-trained embeddings have dim " +
                                       std::to_string(pretrained->table.dim()) + ", expected " +
                                       std::to_string(dim));
  }
  VocabBuild out;
  out.vocab = WordVocab::build(token_lists);
  out.table = nn::EmbeddingTable::random(out.vocab.size(), dim, kEmbeddingInitScale, rng);
  if (pretrained) {
    for (int i = 1; i < out.vocab.size(); ++i) {
      if (auto row = pretrained->row_of(out.vocab.token_at(i))) {
        out.table.table.row(i) = pretrained->table.table.row(*row);
        ++out.pretrained_hits;
      }
    }
  }
  return out;
}

// ---- training ----

namespace {

std::vector<int> encode_text(const WordVocab& vocab, std::string_view text) {
  auto tokens = tokenize_words(preprocess(text));
  return vocab.encode(tokens);
}

double dev_pearson(const WordModel& m, std::span<const nn::RegressionExample> dev) {
  std::vector<double> p;
  std::vector<double> g;
  for (const auto& ex : dev) {
    p.push_back(m.net.predict(ex.tokens));
    g.push_back(ex.target);
  }
  return pearson(p, g).value_or(0.0);
}

std::vector<nn::RegressionExample> to_examples(const WordVocab& vocab, std::span<const TweetRecord> recs) {
  std::vector<nn::RegressionExample> out;
  for (const auto& r : recs) {
    if (!r.intensity) throw Error(ErrorCode::kInput, "record " + r.id + " has no gold intensity");
    auto ids = encode_text(vocab, r.raw_text);
    if (ids.empty()) continue;
    out.push_back({std::move(ids), *r.intensity});
  }
  return out;
}

}  // namespace

WordModel train_word_model(std::span<const TweetRecord> train, const WordModelConfig& config,
                           const PretrainedEmbeddings* pretrained, std::span<const TweetRecord> dev,
                           WordTrainingLog* log, const EpochCallback& on_epoch) {
  if (train.empty()) throw Error(ErrorCode::kInput, "empty training set for the word model");
  if (config.hidden_dim <= 0 || config.embed_dim <= 0 || config.batch <= 0 || config.epochs < 0) {
    throw Error(ErrorCode::kConfig, "invalid word-model configuration");
  }
  for (const auto& r : train) {
    if (r.emotion != train.front().emotion) {
      throw Error(ErrorCode::kInput, "word-model training records mix emotions");
    }
  }

  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(train.size());
  for (const auto& r : train) token_lists.push_back(tokenize_words(preprocess(r.raw_text)));

  nn::Rng rng(config.seed);
  WordModel model;
  VocabBuild vb = build_word_vocab(token_lists, pretrained, config.embed_dim, rng);
  model.vocab = std::move(vb.vocab);
  model.net = nn::BiRegressor::create(config.cell, model.vocab.size(), config.embed_dim,
                                      config.hidden_dim, rng);
  model.net.embedding = std::move(vb.table);

  auto examples = to_examples(model.vocab, train);
  if (examples.empty()) throw Error(ErrorCode::kInput, "no training record has any token");
  auto dev_examples = to_examples(model.vocab, dev);
  const bool early_stop = !dev_examples.empty();

  nn::BiRegressor grads = model.net.zeros_like();
  nn::TensorList params = model.net.tensors();
  nn::TensorList grad_list = grads.tensors();
  nn::AdamState adam(nn::AdamConfig{config.lr, 0.9, 0.999, 1e-8});

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<nn::RegressionExample> batch;

  double best_dev = -2.0;
  nn::BiRegressor best_net = model.net;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      nn::zero_tensors(grad_list);
      try {
        nn::regression_loss_and_gradients(model.net, batch, grads);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumeric) throw;
        throw Error(ErrorCode::kNumeric, "word model diverged in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      nn::clip_gradients_by_norm(grad_list, config.clip_norm);
      nn::adam_update(adam, params, grad_list);
    }

    const double train_mse = nn::regression_loss(model.net, examples);
    if (log) log->epoch_train_mse.push_back(train_mse);
    if (on_epoch) on_epoch(epoch, train_mse);

    if (early_stop) {
      const double score = dev_pearson(model, dev_examples);
      if (log) log->epoch_dev_pearson.push_back(score);
      if (score > best_dev) {
        best_dev = score;
        best_net = model.net;
        since_best = 0;
        if (log) log->best_epoch = epoch;
      } else if (++since_best >= config.patience) {
        break;
      }
    } else if (log) {
      log->best_epoch = epoch;
    }
  }
  if (early_stop) model.net = std::move(best_net);
  return model;
}

double predict_word(const WordModel& model, std::string_view text) {
  auto ids = encode_text(model.vocab, text);
  if (ids.empty()) throw Error(ErrorCode::kInput, "no tokens left after preprocessing");
  return model.net.predict(ids);
}

// ---- persistence ----

void save_word_model(const WordModel& model, const std::string& path, std::uint64_t seed) {
  WordModel copy = model;
  Archive a;
  a.kind = "word";
  a.seed = seed;
  a.put("cell", std::string(nn::cell_kind_name(nn::cell_kind(copy.net.forward))));
  a.put("hidden_dim", std::to_string(nn::hidden_dim(copy.net.forward)));
  a.put("embed_dim", std::to_string(copy.net.embedding.dim()));
  a.put("squash", copy.net.squash ? "1" : "0");
  a.put("vocab_size", std::to_string(copy.vocab.size()));
  std::string joined;
  for (const auto& t : copy.vocab.tokens()) {
    joined += t;
    joined.push_back('\n');
  }
  a.put("vocab_tokens", joined);
  a.put_tensors(copy.net.tensors());
  a.save(path);
}

WordModel load_word_model(const std::string& path) {
  Archive a = Archive::load(path);
  a.require_kind("word");
  WordModel m;
  std::vector<std::string> tokens;
  std::istringstream in(a.get("vocab_tokens"));
  for (std::string t; std::getline(in, t);) tokens.push_back(t);
  m.vocab = WordVocab::from_tokens(std::move(tokens));
  const long vocab_size = a.get_int("vocab_size");
  if (vocab_size != m.vocab.size()) {
    throw Error(ErrorCode::kShape, "vocabulary size mismatch: header says " + std::to_string(vocab_size) +
                                       ", vocabulary lists " + std::to_string(m.vocab.size()));
  }
  const auto kind = nn::parse_cell_kind(a.get("cell"));
  const long hidden = a.get_int("hidden_dim");
  const long embed = a.get_int("embed_dim");
  if (hidden <= 0 || embed <= 0) throw Error(ErrorCode::kFormat, "bad word-model dimensions");
  nn::Rng unused(0);
  m.net = nn::BiRegressor::create(kind, vocab_size, embed, hidden, unused);
  m.net.squash = a.get("squash") == "1";
  a.load_all(m.net.tensors());
  m.net.validate();
  return m;
}

}  // namespace emoint
