#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emoint/error.hpp"
#include "emoint/pipeline.hpp"

namespace {

constexpr int kUsageStatus = 2;

void fail(std::string_view code, const std::string& message) {
  std::string line = message;
  for (auto& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error[" << code << "]: " << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tweet emotion intensity: three-leg regression with a tuned ensemble"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  app.add_option("--config", config_path, "pipeline config file (default: $EMOINT_CONFIG)");
  app.add_option("--seed", seed, "global seed, overrides the config");
  app.add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

  auto* pre = app.add_subcommand("preprocess", "clean the text field of a dataset TSV");
  std::string pre_in, pre_out;
  bool pre_plain = false;
  pre->add_option("input", pre_in, "input file")->required();
  pre->add_option("output", pre_out, "output file")->required();
  pre->add_flag("--plain", pre_plain, "treat every line as one tweet");

  auto* tr_char = app.add_subcommand("train-charlm", "train the character LM and its per-emotion SVRs");
  auto* tr_word = app.add_subcommand("train-word", "train the per-emotion word-level regressors");
  auto* tr_base = app.add_subcommand("train-baseline", "train the per-emotion lexicon/n-gram SVRs");

  auto* feat = app.add_subcommand("extract-features", "dump char-LM features for a dataset TSV");
  std::string feat_in, feat_out;
  feat->add_option("input", feat_in, "dataset TSV")->required();
  feat->add_option("output", feat_out, "feature file")->required();

  auto* tune = app.add_subcommand("tune", "grid-search ensemble weights on the dev split");

  auto* pred = app.add_subcommand("predict", "write ensemble predictions");
  emoint::PredictRequest pred_req;
  std::string pred_in, pred_out, pred_weights;
  pred->add_option("--input", pred_in, "dataset TSV (default: test split)");
  pred->add_option("--output", pred_out, "predictions TSV (default: <model_dir>/predictions.tsv)");
  pred->add_option("--weights", pred_weights, "weights file (default: <model_dir>/weights.txt)");
  pred->add_flag("--per-leg", pred_req.per_leg, "also write each leg's predictions");

  auto* eval = app.add_subcommand("evaluate", "score predictions against gold on both intensity ranges");
  std::vector<std::string> eval_preds;
  std::string eval_gold, eval_out = "report";
  eval->add_option("predictions", eval_preds, "predictions TSV files, one report row each")->required();
  eval->add_option("--gold", eval_gold, "gold dataset TSV")->required();
  eval->add_option("--output", eval_out, "report prefix; writes <prefix>.txt and <prefix>.kv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("E_USAGE", e.what());
    return kUsageStatus;
  }

  emoint::RunOptions options;
  options.jobs = jobs;
  options.log = &std::cerr;

  auto load_config = [&]() {
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv(emoint::kConfigEnvVar)) path = env;
    }
    if (path.empty()) {
      throw emoint::Error(emoint::ErrorCode::kConfig,
                          std::string("no config: pass --config or set ") + emoint::kConfigEnvVar);
    }
    auto c = emoint::PipelineConfig::load(path);
    if (seed) c.seed = *seed;
    return c;
  };

  try {
    if (*pre) {
      std::vector<std::string> warnings;
      const auto n = emoint::cmd_preprocess(pre_in, pre_out, pre_plain, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      std::cerr << "preprocess: " << n << " records\n";
    } else if (*tr_char) {
      emoint::cmd_train_charlm(load_config(), options);
    } else if (*tr_word) {
      emoint::cmd_train_word(load_config(), options);
    } else if (*tr_base) {
      emoint::cmd_train_baseline(load_config(), options);
    } else if (*feat) {
      emoint::cmd_extract_features(load_config(), feat_in, feat_out);
    } else if (*tune) {
      emoint::cmd_tune(load_config(), options);
    } else if (*pred) {
      pred_req.input = pred_in;
      pred_req.output = pred_out;
      pred_req.weights = pred_weights;
      emoint::cmd_predict(load_config(), pred_req, options);
    } else if (*eval) {
      emoint::EvaluateRequest req;
      for (const auto& p : eval_preds) req.predictions.emplace_back(p);
      req.gold = eval_gold;
      req.output_prefix = eval_out;
      const auto rows = emoint::cmd_evaluate(req);
      emoint::write_report_table(std::cout, rows);
    }
  } catch (const emoint::Error& e) {
    fail(emoint::error_code_name(e.code()), e.what());
    return emoint::exit_status(e.code());
  } catch (const std::exception& e) {
    fail("E_INTERNAL", e.what());
    return 1;
  }
  return 0;
}
