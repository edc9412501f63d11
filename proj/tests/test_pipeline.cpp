#include <fstream>
#include <sstream>

#include "doctest.h"
#include "emoint/data.hpp"
#include "emoint/error.hpp"
#include "emoint/pipeline.hpp"

using namespace emoint;
namespace fs = std::filesystem;

namespace {

const fs::path kData = EMOINT_DATA_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("emoint_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

PipelineConfig synthetic_config(const fs::path& model_dir) {
  auto c = PipelineConfig::load(kData / "config.txt");
  c.model_dir = model_dir;
  return c;
}

void run_all(const PipelineConfig& c) {
  RunOptions o;
  cmd_train_baseline(c, o);
  cmd_train_word(c, o);
  cmd_train_charlm(c, o);
  cmd_tune(c, o);
  PredictRequest req;
  req.per_leg = true;
  cmd_predict(c, req, o);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInput;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in(
      "# comment\n"
      "train = a/train.tsv\n"
      "dev = /abs/dev.tsv\n"
      "seed = 42\n"
      "lexicons = x.tsv, y.tsv\n"
      "charlm.cell = mlstm\n"
      "word.hidden_dim = 12   # trailing\n"
      "ensemble.step = 0.25\n"
      "ensemble.per_emotion = true\n");
  auto c = PipelineConfig::parse(in, "/base");
  CHECK(c.train == fs::path("/base/a/train.tsv"));
  CHECK(c.dev == fs::path("/abs/dev.tsv"));
  CHECK(c.seed == 42);
  REQUIRE(c.lexicons.size() == 2);
  CHECK(c.lexicons[1] == fs::path("/base/y.tsv"));
  CHECK(c.charlm.cell == nn::CellKind::kMlstm);
  CHECK(c.word.hidden_dim == 12);
  CHECK(c.ensemble_step == 0.25);
  CHECK(c.ensemble_per_emotion);

  auto parse = [](const std::string& text) {
    std::istringstream s(text);
    return PipelineConfig::parse(s);
  };
  CHECK(code_of([&] { parse("nonsense = 1\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parse("seed = 1\nseed = 2\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parse("seed = many\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parse("just words\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parse("ensemble.step = 0.7\n"); }) == ErrorCode::kConfig);

  // write_config round trip
  std::ostringstream out;
  write_config(out, c);
  std::istringstream back(out.str());
  auto c2 = PipelineConfig::parse(back, "/elsewhere");
  CHECK(c2.train == c.train);
  CHECK(c2.word.hidden_dim == 12);
  CHECK(c2.charlm.cell == nn::CellKind::kMlstm);
}

TEST_CASE("component seeds") {
  CHECK(component_seed(7, "charlm") == component_seed(7, "charlm"));
  CHECK(component_seed(7, "charlm") != component_seed(8, "charlm"));
  CHECK(component_seed(7, "word.joy") != component_seed(7, "word.fear"));
  // splitmix64 reference output for state 0 after one increment
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("preprocess command") {
  TempDir tmp("pre");
  const auto once = tmp.path / "once.tsv";
  const auto twice = tmp.path / "twice.tsv";
  const auto n = cmd_preprocess(kData / "train.tsv", once, false);
  CHECK(n == read_dataset((kData / "train.tsv").string(), SplitName::kTrain).records.size());
  CHECK(cmd_preprocess(once, twice, false) == n);
  CHECK(slurp(once) == slurp(twice));
  for (const auto& r : read_dataset(once.string(), SplitName::kTrain).records) {
    CHECK(r.raw_text == preprocess(r.raw_text));
    CHECK(r.raw_text.find("http") == std::string::npos);
  }

  spit(tmp.path / "plain.txt", "Hello @bob WORLD!!\nhttp://x.co\n");
  std::vector<std::string> warnings;
  CHECK(cmd_preprocess(tmp.path / "plain.txt", tmp.path / "plain.out", true, &warnings) == 2);
  CHECK(slurp(tmp.path / "plain.out") == "hello world!!\n\n");
  CHECK(warnings.empty());

  spit(tmp.path / "url_only.tsv", "1\thttp://x.co\tjoy\t0.5\n2\tGood @a\tjoy\t0.25\n");
  CHECK(cmd_preprocess(tmp.path / "url_only.tsv", tmp.path / "url_only.out", false, &warnings) == 2);
  CHECK(slurp(tmp.path / "url_only.out") == "1\thttp://x.co\tjoy\t0.5\n2\tgood\tjoy\t0.25\n");
  CHECK(warnings.size() == 1);
}

TEST_CASE("missing inputs fail before training") {
  TempDir tmp("missing");
  auto c = synthetic_config(tmp.path / "m");
  c.embeddings = tmp.path / "no_such_vectors.txt";
  CHECK(code_of([&] { cmd_train_word(c, {}); }) == ErrorCode::kIo);
  CHECK_FALSE(fs::exists(tmp.path / "m" / "word"));

  auto c2 = synthetic_config(tmp.path / "m2");
  c2.train = tmp.path / "absent.tsv";
  CHECK(code_of([&] { cmd_train_baseline(c2, {}); }) == ErrorCode::kIo);

  auto c3 = synthetic_config(tmp.path / "m3");
  CHECK(code_of([&] { cmd_tune(c3, {}); }) == ErrorCode::kIo);
}

TEST_CASE("pipeline runs end to end and reproduces") {
  TempDir a("runa");
  TempDir b("runb");
  const auto ca = synthetic_config(a.path / "models");
  const auto cb = synthetic_config(b.path / "models");
  run_all(ca);
  run_all(cb);

  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(ca.model_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), ca.model_dir);
    CHECK_MESSAGE(slurp(entry.path()) == slurp(cb.model_dir / rel), rel.string());
    ++files;
  }
  CHECK(files >= 20);

  const auto test = read_dataset(ca.test.string(), SplitName::kTest);
  std::istringstream pred(slurp(ca.model_dir / "predictions.tsv"));
  std::string line;
  std::size_t i = 0;
  while (std::getline(pred, line)) {
    REQUIRE(i < test.records.size());
    std::istringstream fields(line);
    std::string id, emo;
    double v = -1;
    std::getline(fields, id, '\t');
    std::getline(fields, emo, '\t');
    fields >> v;
    CHECK(id == test.records[i].id);
    CHECK(emo == emotion_name(test.records[i].emotion));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    ++i;
  }
  CHECK(i == test.records.size());

  // baseline-only weights reproduce the baseline leg file
  spit(a.path / "w.txt", "w_b = 1\nw_w = 0\nw_c = 0\n");
  PredictRequest req;
  req.weights = a.path / "w.txt";
  req.output = a.path / "only_baseline.tsv";
  cmd_predict(ca, req, {});
  CHECK(slurp(req.output) == slurp(ca.model_dir / "predictions.baseline.tsv"));

  // jobs do not change results
  RunOptions four;
  four.jobs = 4;
  PredictRequest par;
  par.output = a.path / "par.tsv";
  cmd_predict(ca, par, four);
  CHECK(slurp(par.output) == slurp(ca.model_dir / "predictions.tsv"));

  // evaluation against itself and against a reordered file
  std::string gold_pred;
  for (const auto& r : test.records) {
    gold_pred += r.id + "\t" + std::string(emotion_name(r.emotion)) + "\t" + format_decimal(*r.intensity) + "\n";
  }
  spit(a.path / "gold_pred.tsv", gold_pred);
  EvaluateRequest ev;
  ev.predictions = {a.path / "gold_pred.tsv"};
  ev.gold = ca.test;
  ev.output_prefix = a.path / "self";
  auto rows = cmd_evaluate(ev);
  REQUIRE(rows.size() == 1);
  CHECK(*rows[0].report.full.avg_p == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*rows[0].report.high.avg_s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fs::exists(a.path / "self.txt"));
  CHECK(fs::exists(a.path / "self.kv"));

  auto lines = slurp(ca.model_dir / "predictions.tsv");
  auto first_nl = lines.find('\n');
  auto second_nl = lines.find('\n', first_nl + 1);
  std::string swapped = lines.substr(first_nl + 1, second_nl - first_nl) + lines.substr(0, first_nl + 1) +
                        lines.substr(second_nl + 1);
  spit(a.path / "swapped.tsv", swapped);
  ev.predictions = {a.path / "swapped.tsv"};
  try {
    cmd_evaluate(ev);
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInput);
    CHECK(std::string(e.what()).find(test.records[0].id) != std::string::npos);
  }

  // per-emotion tuning writes qualified keys
  auto cp = ca;
  cp.ensemble_per_emotion = true;
  auto tuned = cmd_tune(cp, {});
  CHECK(slurp(ca.model_dir / "weights.txt").find("joy.w_b") != std::string::npos);
  CHECK(tuned.score >= std::max({tuned.leg_scores[0], tuned.leg_scores[1], tuned.leg_scores[2]}) - 1e-12);
}
