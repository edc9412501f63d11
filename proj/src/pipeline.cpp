#include "emoint/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "emoint/data.hpp"
#include "emoint/error.hpp"

namespace emoint {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw Error(ErrorCode::kConfig, "config key '" + key + "': " + what + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad_value(key, value, "expected a number");
  return v;
}

int parse_positive(const std::string& key, const std::string& value) {
  const int v = parse_number<int>(key, value);
  if (v <= 0) bad_value(key, value, "expected a positive integer");
  return v;
}

int parse_non_negative(const std::string& key, const std::string& value) {
  const int v = parse_number<int>(key, value);
  if (v < 0) bad_value(key, value, "expected a non-negative integer");
  return v;
}

double parse_positive_real(const std::string& key, const std::string& value) {
  const double v = parse_number<double>(key, value);
  if (!(v > 0.0)) bad_value(key, value, "expected a positive number");
  return v;
}

nn::CellKind parse_cell(const std::string& key, const std::string& value) {
  try {
    return nn::parse_cell_kind(value);
  } catch (const Error&) {
    bad_value(key, value, "expected lstm, mlstm or gru");
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::string path_text(const fs::path& p) { return p.string(); }

void require_file(const fs::path& p, const char* key) {
  if (p.empty()) throw Error(ErrorCode::kConfig, std::string("config key '") + key + "' is required");
  if (!fs::is_regular_file(p)) {
    throw Error(ErrorCode::kIo, std::string(key) + " file '" + p.string() + "' does not exist");
  }
}

void require_optional_files(const PipelineConfig& c, bool embeddings, bool lexicons) {
  if (embeddings && !c.embeddings.empty()) require_file(c.embeddings, "embeddings");
  if (lexicons) {
    for (const auto& p : c.lexicons) require_file(p, "lexicons");
    if (!c.negators.empty()) require_file(c.negators, "negators");
  }
}

fs::path charlm_dir(const PipelineConfig& c) { return c.model_dir / "charlm"; }
fs::path word_dir(const PipelineConfig& c) { return c.model_dir / "word"; }
fs::path baseline_dir(const PipelineConfig& c) { return c.model_dir / "baseline"; }

fs::path emotion_file(const fs::path& dir, Emotion e, const char* prefix = "") {
  return dir / (std::string(prefix) + std::string(emotion_name(e)) + ".bin");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory '" + dir.string() + "': " + ec.message());
}

void note(const RunOptions& o, const std::string& msg) {
  static std::mutex mu;
  if (!o.log) return;
  std::lock_guard<std::mutex> lock(mu);
  *o.log << msg << '\n';
  o.log->flush();
}

// Runs fn(0..3) on up to `jobs` threads; rethrows the first failure in emotion order.
void for_each_emotion(int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = static_cast<std::size_t>(std::clamp(jobs, 1, 4));
  std::array<std::exception_ptr, 4> errors;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t e = next++; e < 4; e = next++) {
      try {
        fn(e);
      } catch (...) {
        errors[e] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

std::vector<double> gold_of(const std::vector<TweetRecord>& records, const char* what) {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) {
    if (!r.intensity) throw Error(ErrorCode::kInput, std::string(what) + " record '" + r.id + "' has no gold intensity");
    y.push_back(*r.intensity);
  }
  return y;
}

nn::Matrix stack_rows(const std::vector<nn::Vector>& rows) {
  if (rows.empty()) return {};
  nn::Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

SvrConfig svr_config_for(const PipelineConfig& c, const std::string& component) {
  SvrConfig s = c.svr;
  s.seed = component_seed(c.seed, component);
  return s;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

struct BaselineResources {
  std::vector<Lexicon> lexicons;
  WordSet negators;
};

BaselineResources load_baseline_resources(const PipelineConfig& c) {
  BaselineResources r;
  for (const auto& p : c.lexicons) r.lexicons.push_back(load_lexicon_file(p.string()));
  if (c.negators.empty()) {
    r.negators = default_negators();
  } else {
    std::ifstream in(c.negators);
    if (!in) throw Error(ErrorCode::kIo, "cannot open negators '" + c.negators.string() + "'");
    r.negators = load_negators(in);
  }
  return r;
}

void write_series(std::ostream& out, const char* label, const std::vector<double>& values) {
  out << label;
  for (double v : values) out << ' ' << format_decimal(v);
  out << '\n';
}

double char_leg(const CharLmModel& lm, const SvrModel& svr, CharFeatureMode mode, const std::string& raw) {
  if (preprocess(raw).empty()) return 0.5;
  return predict_svr(svr, extract_features(lm, raw, mode));
}

double word_leg(const WordModel& model, const std::string& raw) {
  if (tokenize_words(preprocess(raw)).empty()) return 0.5;
  return predict_word(model, raw);
}

void write_predictions(const fs::path& path, const std::vector<TweetRecord>& records,
                       const std::vector<double>& values) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      out << records[i].id << '\t' << emotion_name(records[i].emotion) << '\t' << format_decimal(values[i]) << '\n';
    }
  });
}

}  // namespace

// ---- configuration ----

PipelineConfig PipelineConfig::parse(std::istream& in, const fs::path& base_dir) {
  PipelineConfig c;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    }
    try {
      if (key == "train") c.train = resolve(base_dir, value);
      else if (key == "dev") c.dev = resolve(base_dir, value);
      else if (key == "test") c.test = resolve(base_dir, value);
      else if (key == "model_dir") c.model_dir = resolve(base_dir, value);
      else if (key == "lm_corpus") c.lm_corpus = resolve(base_dir, value);
      else if (key == "embeddings") c.embeddings = resolve(base_dir, value);
      else if (key == "negators") c.negators = resolve(base_dir, value);
      else if (key == "lexicons") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          item = trim(item);
          if (!item.empty()) c.lexicons.push_back(resolve(base_dir, item));
        }
      }
      else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
      else if (key == "charlm.cell") c.charlm.cell = parse_cell(key, value);
      else if (key == "charlm.hidden_dim") c.charlm.hidden_dim = parse_positive(key, value);
      else if (key == "charlm.embed_dim") c.charlm.embed_dim = parse_non_negative(key, value);
      else if (key == "charlm.lr") c.charlm.lr = parse_positive_real(key, value);
      else if (key == "charlm.clip_norm") c.charlm.clip_norm = parse_positive_real(key, value);
      else if (key == "charlm.batch") c.charlm.batch = parse_positive(key, value);
      else if (key == "charlm.bptt_len") c.charlm.bptt_len = parse_positive(key, value);
      else if (key == "charlm.steps") c.charlm.steps = parse_non_negative(key, value);
      else if (key == "charlm.min_count") c.charlm.min_count = parse_positive(key, value);
      else if (key == "charlm.features") {
        if (value == "last_mean") c.charlm_features = CharFeatureMode::kLastAndMean;
        else if (value == "last") c.charlm_features = CharFeatureMode::kLastOnly;
        else bad_value(key, value, "expected last_mean or last");
      }
      else if (key == "word.cell") c.word.cell = parse_cell(key, value);
      else if (key == "word.hidden_dim") c.word.hidden_dim = parse_positive(key, value);
      else if (key == "word.embed_dim") c.word.embed_dim = parse_positive(key, value);
      else if (key == "word.lr") c.word.lr = parse_positive_real(key, value);
      else if (key == "word.clip_norm") c.word.clip_norm = parse_positive_real(key, value);
      else if (key == "word.epochs") c.word.epochs = parse_positive(key, value);
      else if (key == "word.batch") c.word.batch = parse_positive(key, value);
      else if (key == "word.patience") c.word.patience = parse_positive(key, value);
      else if (key == "svr.C") c.svr.C = parse_positive_real(key, value);
      else if (key == "svr.epsilon") {
        c.svr.epsilon = parse_number<double>(key, value);
        if (!(c.svr.epsilon >= 0.0)) bad_value(key, value, "expected a non-negative number");
      }
      else if (key == "svr.tol") c.svr.tol = parse_positive_real(key, value);
      else if (key == "svr.max_iter") c.svr.max_iter = parse_positive(key, value);
      else if (key == "ngram.word_min") c.ngram.word_min = parse_positive(key, value);
      else if (key == "ngram.word_max") c.ngram.word_max = parse_non_negative(key, value);
      else if (key == "ngram.char_min") c.ngram.char_min = parse_positive(key, value);
      else if (key == "ngram.char_max") c.ngram.char_max = parse_non_negative(key, value);
      else if (key == "ngram.hash_dim") c.ngram.hash_dim = static_cast<std::size_t>(parse_positive(key, value));
      else if (key == "ensemble.step") {
        c.ensemble_step = parse_number<double>(key, value);
        if (!(c.ensemble_step > 0.0 && c.ensemble_step <= 0.5)) bad_value(key, value, "expected a step in (0, 0.5]");
      }
      else if (key == "ensemble.per_emotion") {
        if (value == "true") c.ensemble_per_emotion = true;
        else if (value == "false") c.ensemble_per_emotion = false;
        else bad_value(key, value, "expected true or false");
      }
      else throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
    } catch (const Error& e) {
      throw Error(e.code(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  try {
    return parse(in, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_config(std::ostream& out, const PipelineConfig& c) {
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << '\n'; };
  kv("train", path_text(c.train));
  kv("dev", path_text(c.dev));
  kv("test", path_text(c.test));
  kv("model_dir", path_text(c.model_dir));
  kv("lm_corpus", path_text(c.lm_corpus));
  kv("embeddings", path_text(c.embeddings));
  std::string lex;
  for (const auto& p : c.lexicons) lex += (lex.empty() ? "" : ",") + p.string();
  kv("lexicons", lex);
  kv("negators", path_text(c.negators));
  kv("seed", std::to_string(c.seed));
  kv("charlm.cell", std::string(nn::cell_kind_name(c.charlm.cell)));
  kv("charlm.hidden_dim", std::to_string(c.charlm.hidden_dim));
  kv("charlm.embed_dim", std::to_string(c.charlm.embed_dim));
  kv("charlm.lr", format_decimal(c.charlm.lr));
  kv("charlm.clip_norm", format_decimal(c.charlm.clip_norm));
  kv("charlm.batch", std::to_string(c.charlm.batch));
  kv("charlm.bptt_len", std::to_string(c.charlm.bptt_len));
  kv("charlm.steps", std::to_string(c.charlm.steps));
  kv("charlm.min_count", std::to_string(c.charlm.min_count));
  kv("charlm.features", c.charlm_features == CharFeatureMode::kLastAndMean ? "last_mean" : "last");
  kv("word.cell", std::string(nn::cell_kind_name(c.word.cell)));
  kv("word.hidden_dim", std::to_string(c.word.hidden_dim));
  kv("word.embed_dim", std::to_string(c.word.embed_dim));
  kv("word.lr", format_decimal(c.word.lr));
  kv("word.clip_norm", format_decimal(c.word.clip_norm));
  kv("word.epochs", std::to_string(c.word.epochs));
  kv("word.batch", std::to_string(c.word.batch));
  kv("word.patience", std::to_string(c.word.patience));
  kv("svr.C", format_decimal(c.svr.C));
  kv("svr.epsilon", format_decimal(c.svr.epsilon));
  kv("svr.tol", format_decimal(c.svr.tol));
  kv("svr.max_iter", std::to_string(c.svr.max_iter));
  kv("ngram.word_min", std::to_string(c.ngram.word_min));
  kv("ngram.word_max", std::to_string(c.ngram.word_max));
  kv("ngram.char_min", std::to_string(c.ngram.char_min));
  kv("ngram.char_max", std::to_string(c.ngram.char_max));
  kv("ngram.hash_dim", std::to_string(c.ngram.hash_dim));
  kv("ensemble.step", format_decimal(c.ensemble_step));
  kv("ensemble.per_emotion", c.ensemble_per_emotion ? "true" : "false");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t component_seed(std::uint64_t global, std::string_view component) {
  return splitmix64(global ^ fnv1a64(component));
}

void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) make_dir(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    body(out);
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename '" + tmp.string() + "': " + ec.message());
}

// ---- preprocess ----

std::size_t cmd_preprocess(const fs::path& in_path, const fs::path& out_path, bool plain,
                           std::vector<std::string>* warnings) {
  if (plain) {
    auto lines = read_lines(in_path);
    write_file_atomic(out_path, [&](std::ostream& out) {
      for (const auto& l : lines) out << preprocess(l) << '\n';
    });
    return lines.size();
  }
  DatasetSplit split;
  try {
    split = read_dataset(in_path.string(), SplitName::kTrain);
  } catch (const Error& e) {
    throw Error(e.code(), in_path.string() + ": " + e.what());
  }
  for (auto& r : split.records) {
    std::string text = preprocess(r.raw_text);
    if (text.empty()) {
      if (warnings) warnings->push_back("record '" + r.id + "' is empty after preprocessing; text kept as is");
      continue;
    }
    r.raw_text = std::move(text);
  }
  write_file_atomic(out_path, [&](std::ostream& out) { write_dataset(out, split); });
  return split.records.size();
}

// ---- training ----

void cmd_train_charlm(const PipelineConfig& config, const RunOptions& options) {
  require_file(config.train, "train");
  if (!config.lm_corpus.empty()) require_file(config.lm_corpus, "lm_corpus");
  const auto train = read_dataset(config.train.string(), SplitName::kTrain);

  std::vector<std::string> corpus;
  if (config.lm_corpus.empty()) {
    for (const auto& r : train.records) corpus.push_back(preprocess(r.raw_text));
  } else {
    for (const auto& l : read_lines(config.lm_corpus)) corpus.push_back(preprocess(l));
  }
  std::erase_if(corpus, [](const std::string& s) { return s.empty(); });
  if (corpus.empty()) throw Error(ErrorCode::kInput, "char-LM corpus is empty after preprocessing");

  const fs::path dir = charlm_dir(config);
  make_dir(dir);
  CharLmConfig lm_config = config.charlm;
  lm_config.seed = component_seed(config.seed, "charlm");
  note(options, "train-charlm: " + std::to_string(corpus.size()) + " lines, " + std::to_string(lm_config.steps) +
                    " steps");
  CharLmTrainingLog log;
  const int every = std::max(1, lm_config.steps / 20);
  auto model = train_char_lm(corpus, lm_config, &log, [&](int step, double loss) {
    if ((step + 1) % every == 0) note(options, "  step " + std::to_string(step + 1) + " loss " + format_decimal(loss));
  });
  save_char_lm(model, (dir / "lm.bin").string(), lm_config.seed);

  const auto buckets = split_by_emotion(train);
  std::array<std::string, 4> svr_logs;
  for_each_emotion(options.jobs, [&](std::size_t e) {
    const Emotion emo = kAllEmotions[e];
    std::vector<nn::Vector> rows;
    std::vector<TweetRecord> used;
    for (const auto& r : buckets[e]) {
      if (preprocess(r.raw_text).empty()) continue;
      rows.push_back(extract_features(model, r.raw_text, config.charlm_features));
      used.push_back(r);
    }
    if (rows.empty()) throw Error(ErrorCode::kInput, "no usable " + std::string(emotion_name(emo)) + " training tweets");
    const auto svr_cfg = svr_config_for(config, "charlm.svr." + std::string(emotion_name(emo)));
    SvrTrainingTrace trace;
    auto svr = train_svr(stack_rows(rows), gold_of(used, "train"), svr_cfg, &trace);
    save_svr(svr, emotion_file(dir, emo, "svr_").string(), svr_cfg.seed);
    svr_logs[e] = std::string(emotion_name(emo)) + " svr sweeps " + std::to_string(trace.sweeps) + " violation " +
                  format_decimal(trace.final_violation) + (trace.converged ? " converged" : " max_iter");
    note(options, "  " + svr_logs[e]);
  });

  write_file_atomic(dir / "train.log", [&](std::ostream& out) {
    write_series(out, "lm_step_loss", log.step_loss);
    for (const auto& s : svr_logs) out << s << '\n';
  });
}

void cmd_train_word(const PipelineConfig& config, const RunOptions& options) {
  require_file(config.train, "train");
  if (!config.dev.empty()) require_file(config.dev, "dev");
  require_optional_files(config, true, false);

  std::optional<PretrainedEmbeddings> pretrained;
  if (!config.embeddings.empty()) {
    pretrained = load_embeddings_file(config.embeddings.string(), config.word.embed_dim);
    for (const auto& w : pretrained->warnings) note(options, "warning: " + w);
  }
  const auto train = split_by_emotion(read_dataset(config.train.string(), SplitName::kTrain));
  EmotionBuckets dev;
  if (!config.dev.empty()) dev = split_by_emotion(read_dataset(config.dev.string(), SplitName::kDev));

  const fs::path dir = word_dir(config);
  make_dir(dir);
  std::array<WordTrainingLog, 4> logs;
  for_each_emotion(options.jobs, [&](std::size_t e) {
    const Emotion emo = kAllEmotions[e];
    WordModelConfig wc = config.word;
    wc.seed = component_seed(config.seed, "word." + std::string(emotion_name(emo)));
    auto model = train_word_model(train[e], wc, pretrained ? &*pretrained : nullptr, dev[e], &logs[e]);
    save_word_model(model, emotion_file(dir, emo).string(), wc.seed);
    note(options, "train-word: " + std::string(emotion_name(emo)) + " best epoch " +
                      std::to_string(logs[e].best_epoch) + " of " + std::to_string(logs[e].epoch_train_mse.size()));
  });

  write_file_atomic(dir / "train.log", [&](std::ostream& out) {
    for (std::size_t e = 0; e < 4; ++e) {
      const std::string name(emotion_name(kAllEmotions[e]));
      write_series(out, (name + "_train_mse").c_str(), logs[e].epoch_train_mse);
      write_series(out, (name + "_dev_pearson").c_str(), logs[e].epoch_dev_pearson);
      out << name << "_best_epoch " << logs[e].best_epoch << '\n';
    }
  });
}

nn::Vector baseline_features(std::string_view raw_text, std::span<const Lexicon> lexicons, const WordSet& negators,
                             const NgramConfig& ngram) {
  const auto tokens = tokenize_words(preprocess(raw_text));
  const nn::Vector lex = extract_lexicon_features(tokens, lexicons, negators, raw_text);
  const nn::Vector grams = densify(extract_ngram_features(tokens, ngram), ngram.hash_dim);
  nn::Vector out(lex.size() + grams.size());
  out << lex, grams;
  return out;
}

void cmd_train_baseline(const PipelineConfig& config, const RunOptions& options) {
  require_file(config.train, "train");
  require_optional_files(config, false, true);
  const auto res = load_baseline_resources(config);
  for (const auto& lex : res.lexicons) {
    for (const auto& w : lex.warnings) note(options, "warning: " + lex.name + ": " + w);
  }
  const auto train = split_by_emotion(read_dataset(config.train.string(), SplitName::kTrain));
  const fs::path dir = baseline_dir(config);
  make_dir(dir);
  std::array<std::string, 4> svr_logs;
  for_each_emotion(options.jobs, [&](std::size_t e) {
    const Emotion emo = kAllEmotions[e];
    if (train[e].empty()) throw Error(ErrorCode::kInput, "no " + std::string(emotion_name(emo)) + " training tweets");
    std::vector<nn::Vector> rows;
    for (const auto& r : train[e]) rows.push_back(baseline_features(r.raw_text, res.lexicons, res.negators, config.ngram));
    const auto svr_cfg = svr_config_for(config, "baseline.svr." + std::string(emotion_name(emo)));
    SvrTrainingTrace trace;
    auto svr = train_svr(stack_rows(rows), gold_of(train[e], "train"), svr_cfg, &trace);
    save_svr(svr, emotion_file(dir, emo, "svr_").string(), svr_cfg.seed);
    svr_logs[e] = std::string(emotion_name(emo)) + " svr sweeps " + std::to_string(trace.sweeps) + " violation " +
                  format_decimal(trace.final_violation) + (trace.converged ? " converged" : " max_iter");
    note(options, "train-baseline: " + svr_logs[e]);
  });
  const auto layout = lexicon_feature_layout(res.lexicons);
  write_file_atomic(dir / "train.log", [&](std::ostream& out) {
    out << "lexicon_layout_version " << kLexiconLayoutVersion << '\n';
    out << "features " << layout.size() << " lexicon + " << config.ngram.hash_dim << " hashed\n";
    for (const auto& n : layout.names) out << "feature " << n << '\n';
    for (const auto& s : svr_logs) out << s << '\n';
  });
}

// ---- features, prediction, tuning ----

void cmd_extract_features(const PipelineConfig& config, const fs::path& input, const fs::path& output) {
  require_file(input, "input");
  const auto lm = import_external_lm((charlm_dir(config) / "lm.bin").string());
  const auto split = read_dataset(input.string(), SplitName::kTest);
  write_file_atomic(output, [&](std::ostream& out) {
    for (const auto& r : split.records) {
      if (preprocess(r.raw_text).empty()) {
        throw Error(ErrorCode::kInput, "record '" + r.id + "' is empty after preprocessing");
      }
      write_feature_line(out, r.id, extract_features(lm, r.raw_text, config.charlm_features));
    }
  });
}

LegPredictions predict_legs(const PipelineConfig& config, const std::vector<TweetRecord>& records,
                            const RunOptions& options) {
  require_optional_files(config, false, true);
  const auto lm = import_external_lm((charlm_dir(config) / "lm.bin").string());
  const auto res = load_baseline_resources(config);
  std::array<SvrModel, 4> char_svr, base_svr;
  std::array<WordModel, 4> word;
  for (std::size_t e = 0; e < 4; ++e) {
    const Emotion emo = kAllEmotions[e];
    char_svr[e] = load_svr(emotion_file(charlm_dir(config), emo, "svr_").string());
    base_svr[e] = load_svr(emotion_file(baseline_dir(config), emo, "svr_").string());
    word[e] = load_word_model(emotion_file(word_dir(config), emo).string());
  }

  LegPredictions p;
  const std::size_t n = records.size();
  p.baseline.assign(n, 0.0);
  p.word.assign(n, 0.0);
  p.charlm.assign(n, 0.0);
  const std::size_t workers = static_cast<std::size_t>(std::max(1, options.jobs));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < n; i += workers) {
        const auto& r = records[i];
        const std::size_t e = emotion_index(r.emotion);
        p.baseline[i] = predict_svr(base_svr[e], baseline_features(r.raw_text, res.lexicons, res.negators, config.ngram));
        p.word[i] = word_leg(word[e], r.raw_text);
        p.charlm[i] = char_leg(lm, char_svr[e], config.charlm_features, r.raw_text);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return p;
}

TuneResult cmd_tune(const PipelineConfig& config, const RunOptions& options) {
  require_file(config.dev, "dev");
  const auto dev = read_dataset(config.dev.string(), SplitName::kDev);
  const auto legs = predict_legs(config, dev.records, options);
  std::array<PredictionSet, 4> sets;
  for (std::size_t i = 0; i < dev.records.size(); ++i) {
    const auto& r = dev.records[i];
    if (!r.intensity) throw Error(ErrorCode::kInput, "dev record '" + r.id + "' has no gold intensity");
    auto& s = sets[emotion_index(r.emotion)];
    s.baseline.push_back(legs.baseline[i]);
    s.word.push_back(legs.word[i]);
    s.charlm.push_back(legs.charlm[i]);
    s.gold.push_back(*r.intensity);
  }
  for (std::size_t e = 0; e < 4; ++e) {
    if (sets[e].gold.empty()) {
      throw Error(ErrorCode::kInput, "dev split has no " + std::string(emotion_name(kAllEmotions[e])) + " records");
    }
  }

  TuneResult result;
  std::size_t candidates = 0;
  if (config.ensemble_per_emotion) {
    auto per = grid_search_per_emotion(sets, config.ensemble_step);
    for (std::size_t e = 0; e < 4; ++e) {
      result.weights.by_emotion[e] = per[e].weights;
      result.score += per[e].score / 4.0;
      candidates = per[e].candidates;
      for (auto& w : per[e].warnings) result.warnings.push_back(std::string(emotion_name(kAllEmotions[e])) + ": " + w);
    }
  } else {
    auto best = grid_search_weights(sets, config.ensemble_step);
    result.weights = WeightTable::uniform(best.weights);
    result.score = best.score;
    candidates = best.candidates;
    result.warnings = best.warnings;
  }
  result.leg_scores = {mean_pearson(sets, {1.0, 0.0, 0.0}), mean_pearson(sets, {0.0, 1.0, 0.0}),
                       mean_pearson(sets, {0.0, 0.0, 1.0})};
  const double best_leg = *std::max_element(result.leg_scores.begin(), result.leg_scores.end());
  result.dominates = result.score >= best_leg;

  save_weights_file((config.model_dir / "weights.txt").string(), result.weights);
  write_file_atomic(config.model_dir / "tune.log", [&](std::ostream& out) {
    out << "mode " << (config.ensemble_per_emotion ? "per_emotion" : "shared") << '\n';
    out << "candidates " << candidates << '\n';
    out << "dev_pearson.baseline " << format_decimal(result.leg_scores[0]) << '\n';
    out << "dev_pearson.word " << format_decimal(result.leg_scores[1]) << '\n';
    out << "dev_pearson.charlm " << format_decimal(result.leg_scores[2]) << '\n';
    out << "dev_pearson.ensemble " << format_decimal(result.score) << '\n';
    out << "dominance " << (result.dominates ? "holds" : "VIOLATED") << '\n';
    for (const auto& msg : result.warnings) out << "warning " << msg << '\n';
  });
  std::ostringstream summary;
  write_weights(summary, result.weights);
  std::string flat = summary.str();
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  note(options, "tune: " + flat + "| dev avg Pearson " + format_decimal(result.score) + " (best single leg " +
                    format_decimal(best_leg) + ")");
  if (!result.dominates) throw Error(ErrorCode::kNumeric, "ensemble dev score fell below a single leg");
  return result;
}

void cmd_predict(const PipelineConfig& config, const PredictRequest& request, const RunOptions& options) {
  const fs::path input = request.input.empty() ? config.test : request.input;
  require_file(input, "input");
  const fs::path output = request.output.empty() ? config.model_dir / "predictions.tsv" : request.output;
  const fs::path weights_path = request.weights.empty() ? config.model_dir / "weights.txt" : request.weights;
  require_file(weights_path, "weights");
  const auto weights = read_weights_file(weights_path.string());
  const auto split = read_dataset(input.string(), SplitName::kTest);
  const auto legs = predict_legs(config, split.records, options);
  std::vector<double> combined(split.records.size());
  for (std::size_t i = 0; i < combined.size(); ++i) {
    const auto& w = weights.by_emotion[emotion_index(split.records[i].emotion)];
    PredictionSet one{{legs.baseline[i]}, {legs.word[i]}, {legs.charlm[i]}, {}};
    combined[i] = std::clamp(combine(one, w)[0], 0.0, 1.0);
  }
  write_predictions(output, split.records, combined);
  if (request.per_leg) {
    auto leg_path = [&](const char* leg) {
      return output.parent_path() / (output.stem().string() + "." + leg + output.extension().string());
    };
    write_predictions(leg_path("baseline"), split.records, legs.baseline);
    write_predictions(leg_path("word"), split.records, legs.word);
    write_predictions(leg_path("charlm"), split.records, legs.charlm);
  }
  note(options, "predict: " + std::to_string(split.records.size()) + " records -> " + output.string());
}

// ---- evaluation ----

namespace {

struct PredictionLine {
  std::string id;
  Emotion emotion;
  double value;
};

std::vector<PredictionLine> read_predictions(const fs::path& path) {
  std::vector<PredictionLine> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& msg) -> void {
      throw Error(ErrorCode::kParse, path.string() + ": line " + std::to_string(line_no) + ": " + msg);
    };
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) fail("expected id, emotion, intensity");
    PredictionLine p;
    p.id = line.substr(0, t1);
    try {
      p.emotion = parse_emotion(line.substr(t1 + 1, t2 - t1 - 1));
    } catch (const Error& e) {
      fail(e.what());
    }
    const std::string v = trim(std::string_view(line).substr(t2 + 1));
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), p.value);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(p.value)) fail("bad intensity '" + v + "'");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<NamedReport> cmd_evaluate(const EvaluateRequest& request) {
  require_file(request.gold, "gold");
  if (request.predictions.empty()) throw Error(ErrorCode::kConfig, "no prediction files given");
  const auto gold = read_dataset(request.gold.string(), SplitName::kTest);
  for (const auto& r : gold.records) {
    if (!r.intensity) throw Error(ErrorCode::kInput, "gold record '" + r.id + "' has no intensity");
  }
  std::vector<NamedReport> rows;
  for (const auto& path : request.predictions) {
    require_file(path, "predictions");
    const auto preds = read_predictions(path);
    const std::size_t n = std::min(preds.size(), gold.records.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& g = gold.records[i];
      if (preds[i].id != g.id || preds[i].emotion != g.emotion) {
        throw Error(ErrorCode::kInput, path.string() + ": record " + std::to_string(i + 1) + " is '" + preds[i].id +
                                           "' (" + std::string(emotion_name(preds[i].emotion)) + "), gold has '" +
                                           g.id + "' (" + std::string(emotion_name(g.emotion)) + ")");
      }
    }
    if (preds.size() != gold.records.size()) {
      const std::string first = preds.size() > n ? "extra prediction '" + preds[n].id + "'"
                                                 : "missing prediction for '" + gold.records[n].id + "'";
      throw Error(ErrorCode::kInput, path.string() + ": " + first);
    }
    SeriesByEmotion series;
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = series[emotion_index(preds[i].emotion)];
      s.predicted.push_back(preds[i].value);
      s.gold.push_back(*gold.records[i].intensity);
    }
    std::string name = path.filename().string();
    if (auto dot = name.rfind(".tsv"); dot != std::string::npos && dot + 4 == name.size()) name.erase(dot);
    rows.push_back({name, evaluate(series)});
  }
  const fs::path prefix = request.output_prefix.empty() ? fs::path("report") : request.output_prefix;
  write_file_atomic(prefix.string() + ".txt", [&](std::ostream& out) { write_report_table(out, rows); });
  write_file_atomic(prefix.string() + ".kv", [&](std::ostream& out) { write_report_kv(out, rows); });
  return rows;
}

}  // namespace emoint
