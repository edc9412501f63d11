#include "emoint/char_lm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "emoint/archive.hpp"
#include "emoint/data.hpp"
#include "emoint/error.hpp"
#include "emoint/optim.hpp"

namespace emoint {

// ---- vocabulary ----

CharVocab CharVocab::build(std::span<const std::string> corpus, int min_count) {
  if (min_count < 1) throw Error(ErrorCode::kConfig, "min_count must be >= 1");
  std::array<std::size_t, 256> counts{};
  std::size_t total = 0;
  for (const auto& line : corpus) {
    for (char c : line) {
      ++counts[static_cast<unsigned char>(c)];
      ++total;
    }
  }
  if (total == 0) throw Error(ErrorCode::kInput, "cannot build a character vocabulary from an empty corpus");

  std::vector<int> symbols;
  for (int b = 0; b < 256; ++b) {
    if (counts[b] >= static_cast<std::size_t>(min_count)) symbols.push_back(b);
  }
  std::stable_sort(symbols.begin(), symbols.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  std::string chars;
  for (int b : symbols) chars.push_back(static_cast<char>(b));
  return from_chars(std::move(chars));
}

CharVocab CharVocab::from_chars(std::string chars) {
  CharVocab v;
  v.chars_ = std::move(chars);
  for (std::size_t i = 0; i < v.chars_.size(); ++i) {
    auto b = static_cast<unsigned char>(v.chars_[i]);
    if (v.lookup_[b] != kUnk) throw Error(ErrorCode::kFormat, "duplicate character in vocabulary");
    v.lookup_[b] = static_cast<int>(i) + 2;
  }
  return v;
}

int CharVocab::index_of(char c) const { return lookup_[static_cast<unsigned char>(c)]; }

std::optional<char> CharVocab::char_at(int index) const {
  if (index < 2 || index >= size()) return std::nullopt;
  return chars_[static_cast<std::size_t>(index - 2)];
}

std::vector<int> CharVocab::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(index_of(c));
  return ids;
}

// ---- training ----

namespace {

std::vector<int> encode_stream(const CharVocab& vocab, std::span<const std::string> corpus) {
  std::vector<int> stream;
  for (const auto& line : corpus) {
    if (line.empty()) continue;
    auto ids = vocab.encode(line);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(CharVocab::kEos);
  }
  return stream;
}

}  // namespace

CharLmModel train_char_lm(std::span<const std::string> corpus, const CharLmConfig& config,
                          CharLmTrainingLog* log, const StepCallback& on_step) {
  if (config.hidden_dim <= 0 || config.embed_dim < 0 || config.batch <= 0 ||
      config.bptt_len <= 0 || config.steps < 0) {
    throw Error(ErrorCode::kConfig, "invalid char-LM configuration");
  }
  CharLmModel model;
  model.vocab = CharVocab::build(corpus, config.min_count);
  nn::Rng rng(config.seed);
  model.net = nn::TokenLm::create(config.cell, model.vocab.size(), config.embed_dim,
                                  config.hidden_dim, rng);

  const std::vector<int> stream = encode_stream(model.vocab, corpus);
  if (stream.size() < 2) throw Error(ErrorCode::kInput, "char-LM corpus is too short");

  // Lane k covers stream[k*lane_len, (k+1)*lane_len]; the extra token supplies the last target.
  const std::size_t predictable = stream.size() - 1;
  const std::size_t lanes = std::min<std::size_t>(static_cast<std::size_t>(config.batch), predictable);
  const std::size_t lane_len = predictable / lanes;
  std::vector<nn::CellState> states(lanes, nn::zero_state(model.net.cell));
  std::size_t pos = 0;

  nn::TokenLm grads = model.net.zeros_like();
  nn::TensorList params = model.net.tensors();
  nn::TensorList grad_list = grads.tensors();
  nn::AdamState adam(nn::AdamConfig{config.lr, 0.9, 0.999, 1e-8});

  std::vector<nn::LmWindow> batch(lanes);
  for (int step = 0; step < config.steps; ++step) {
    if (pos >= lane_len) {
      pos = 0;
      std::fill(states.begin(), states.end(), nn::zero_state(model.net.cell));
    }
    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(config.bptt_len), lane_len - pos);
    for (std::size_t k = 0; k < lanes; ++k) {
      const std::size_t start = k * lane_len + pos;
      batch[k].inputs.assign(stream.begin() + static_cast<long>(start),
                             stream.begin() + static_cast<long>(start + len));
      batch[k].targets.assign(stream.begin() + static_cast<long>(start + 1),
                              stream.begin() + static_cast<long>(start + len + 1));
      batch[k].init = states[k];
    }

    nn::zero_tensors(grad_list);
    nn::LmBatchResult r;
    try {
      r = nn::lm_loss_and_gradients(model.net, batch, grads);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      throw Error(ErrorCode::kNumeric, "char-LM diverged at step " + std::to_string(step + 1) + ": " + e.what());
    }
    nn::clip_gradients_by_norm(grad_list, config.clip_norm);
    nn::adam_update(adam, params, grad_list);

    states = std::move(r.final_states);
    pos += len;
    if (log) log->step_loss.push_back(r.loss);
    if (on_step) on_step(step + 1, r.loss);
  }
  return model;
}

double char_lm_cross_entropy(const CharLmModel& model, std::span<const std::string> corpus) {
  const std::vector<int> stream = encode_stream(model.vocab, corpus);
  if (stream.size() < 2) throw Error(ErrorCode::kInput, "corpus too short to evaluate");
  nn::LmWindow w;
  w.inputs.assign(stream.begin(), stream.end() - 1);
  w.targets.assign(stream.begin() + 1, stream.end());
  w.init = nn::zero_state(model.net.cell);
  return nn::lm_loss(model.net, std::span<const nn::LmWindow>(&w, 1)).loss;
}

// ---- features ----

nn::Vector extract_features(const CharLmModel& model, std::string_view text, CharFeatureMode mode) {
  const std::string clean = preprocess(text);
  if (clean.empty()) throw Error(ErrorCode::kInput, "tweet is empty after preprocessing");
  auto xs = model.net.input_vectors(model.vocab.encode(clean));
  auto states = nn::run_sequence(model.net.cell, xs);
  const Eigen::Index h = model.net.hidden_dim();
  if (mode == CharFeatureMode::kLastOnly) return states.back();

  nn::Vector mean = nn::Vector::Zero(h);
  for (const auto& s : states) mean += s;
  mean /= static_cast<double>(states.size());
  nn::Vector out(2 * h);
  out << states.back(), mean;
  return out;
}

// ---- persistence ----

void save_char_lm(const CharLmModel& model, const std::string& path, std::uint64_t seed) {
  CharLmModel copy = model;
  Archive a;
  a.kind = "charlm";
  a.seed = seed;
  a.put("cell", std::string(nn::cell_kind_name(nn::cell_kind(copy.net.cell))));
  a.put("hidden_dim", std::to_string(copy.net.hidden_dim()));
  a.put("embed_dim", std::to_string(copy.net.one_hot ? 0 : copy.net.embedding.dim()));
  a.put("vocab_size", std::to_string(copy.vocab.size()));
  a.put("vocab_chars", copy.vocab.chars());
  a.put_tensors(copy.net.tensors());
  a.save(path);
}

CharLmModel import_external_lm(const std::string& path) {
  Archive a = Archive::load(path);
  a.require_kind("charlm");
  CharLmModel m;
  m.vocab = CharVocab::from_chars(a.get("vocab_chars"));
  const long vocab_size = a.get_int("vocab_size");
  if (vocab_size != m.vocab.size()) {
    throw Error(ErrorCode::kShape, "vocabulary size mismatch: header says " + std::to_string(vocab_size) +
                                       ", vocabulary lists " + std::to_string(m.vocab.size()));
  }
  const auto kind = nn::parse_cell_kind(a.get("cell"));
  const long hidden = a.get_int("hidden_dim");
  const long embed = a.get_int("embed_dim");
  if (hidden <= 0 || embed < 0) throw Error(ErrorCode::kFormat, "bad char-LM dimensions");

  nn::Rng unused(0);
  m.net = nn::TokenLm::create(kind, vocab_size, embed, hidden, unused);
  a.load_all(m.net.tensors());
  m.net.validate();
  return m;
}

void write_feature_line(std::ostream& out, std::string_view id, const nn::Vector& features) {
  out << id;
  for (Eigen::Index i = 0; i < features.size(); ++i) out << ' ' << format_decimal(features(i));
  out << '\n';
}

}  // namespace emoint
