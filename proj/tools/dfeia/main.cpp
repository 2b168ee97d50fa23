// dfeia: batch CLI for training, evaluating and inspecting the network.
// Exit codes: 0 success, 1 usage error, 2 runtime/ingestion error,
// 3 selftest failure. Results go to stdout as JSON; diagnostics to stderr.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfeia/config_io.hpp"
#include "dfeia/counting.hpp"
#include "dfeia/dataset.hpp"
#include "dfeia/image.hpp"
#include "dfeia/metrics.hpp"
#include "dfeia/network.hpp"
#include "dfeia/selftest.hpp"
#include "dfeia/serialize.hpp"
#include "dfeia/train.hpp"

namespace {

using nlohmann::json;

dfeia::NetworkConfig resolve_config(const std::string& config_path) {
  if (config_path.empty()) return dfeia::NetworkConfig{};
  return dfeia::load_config_file(config_path);
}

struct TrainArgs {
  std::string data, config, out = "weights.dfew", log, schedule = "cosine";
  int epochs = 400;
  int batch_size = 16;
  double lr = 0.0005;
  double weight_decay = 0.05;
  uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  dfeia::NetworkConfig cfg = resolve_config(a.config);
  dfeia::Dataset ds = dfeia::load_image_folder(a.data, a.seed);
  if (static_cast<int64_t>(ds.num_classes()) != cfg.num_classes) {
    throw dfeia::ConfigError("dataset has " + std::to_string(ds.num_classes()) +
                             " classes but config expects " + std::to_string(cfg.num_classes));
  }

  dfeia::Model<float> model = dfeia::build<float>(cfg, a.seed);

  dfeia::TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch_size;
  opts.lr = a.lr;
  opts.weight_decay = a.weight_decay;
  opts.seed = a.seed;
  opts.schedule = a.schedule == "constant" ? dfeia::LrSchedule::constant : dfeia::LrSchedule::cosine;

  std::ofstream log_stream;
  if (!a.log.empty()) {
    log_stream.open(a.log, std::ios::app);
    if (!log_stream) throw dfeia::IngestError("cannot open log file " + a.log);
  }

  auto on_epoch = [&](const dfeia::EpochLog& e) {
    json line = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"test_acc", e.test_acc}};
    if (log_stream.is_open()) log_stream << line.dump() << "\n" << std::flush;
    std::cerr << "epoch " << e.epoch << "/" << a.epochs << " train_loss=" << e.train_loss
              << " test_acc=" << e.test_acc << "\n";
  };

  auto log = dfeia::train(model, ds, opts, on_epoch);
  dfeia::save_weights(model, a.out);

  json out = {{"epochs", static_cast<int>(log.size())}, {"weights", a.out}};
  if (!log.empty()) {
    out["final_train_loss"] = log.back().train_loss;
    out["final_test_acc"] = log.back().test_acc;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& weights, const std::string& config,
             const std::string& split, uint64_t seed) {
  dfeia::NetworkConfig cfg = resolve_config(config);
  dfeia::Model<float> model = dfeia::load_weights(weights, cfg);
  dfeia::Dataset ds = dfeia::load_image_folder(data, seed);
  if (static_cast<int64_t>(ds.num_classes()) != cfg.num_classes) {
    throw dfeia::ConfigError("dataset has " + std::to_string(ds.num_classes()) +
                             " classes but config expects " + std::to_string(cfg.num_classes));
  }
  dfeia::MetricsReport rep =
      dfeia::evaluate(model, ds, split == "train" ? dfeia::Split::train : dfeia::Split::test);
  std::cout << dfeia::metrics_to_json(rep).dump(2) << "\n";
  return 0;
}

int cmd_predict(const std::string& image, const std::string& weights, const std::string& config,
                int topk) {
  dfeia::NetworkConfig cfg = resolve_config(config);
  dfeia::Model<float> model = dfeia::load_weights(weights, cfg);

  dfeia::ImageU8 img = dfeia::decode_image(image);
  dfeia::Rng rng(0);
  dfeia::Tensor<float> x = dfeia::preprocess(img, cfg.input_size, false, rng);
  dfeia::Tensor<float> logits =
      model.forward(x.reshaped({1, 3, cfg.input_size, cfg.input_size}));
  dfeia::Tensor<float> probs = dfeia::kernels::softmax(logits, 1);

  const int64_t k = probs.dim(1);
  if (topk > k) {
    std::cerr << "warning: --topk " << topk << " clamped to " << k << " classes\n";
    topk = static_cast<int>(k);
  }
  std::vector<int> order(k);
  for (int64_t i = 0; i < k; ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs.data()[a] > probs.data()[b]; });

  json top = json::array();
  for (int i = 0; i < topk; ++i) {
    top.push_back({{"class", order[i]}, {"prob", probs.data()[order[i]]}});
  }
  json out = {{"class", order[0]}, {"prob", probs.data()[order[0]]}, {"topk", top}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_count(const std::string& config, int64_t input_size) {
  dfeia::NetworkConfig cfg = resolve_config(config);
  dfeia::Model<float> model(cfg);
  dfeia::CountReport rep = dfeia::count_report(model, input_size);

  json stages = json::array();
  for (const auto& row : rep.per_stage) {
    stages.push_back({{"name", row.name}, {"params", row.params}, {"macs", row.macs}});
  }
  json out = {{"params", rep.params},
              {"macs", rep.macs},
              {"params_m", static_cast<double>(rep.params) / 1e6},
              {"macs_m", static_cast<double>(rep.macs) / 1e6},
              {"input_size", input_size},
              {"per_stage", stages}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_selftest(bool thorough) {
  dfeia::selftest::SelftestOptions opts;
  opts.thorough = thorough;

  bool all_passed = true;
  int64_t assertions = 0;
  json suites = json::array();
  for (const auto& suite : dfeia::selftest::run_all(opts)) {
    all_passed = all_passed && suite.passed;
    assertions += suite.assertions;
    std::cerr << (suite.passed ? "PASS" : "FAIL") << " " << suite.name << " ("
              << suite.assertions << " assertions)\n";
    for (const auto& f : suite.failures) std::cerr << "  " << f << "\n";
    suites.push_back({{"name", suite.name},
                      {"passed", suite.passed},
                      {"assertions", suite.assertions},
                      {"failures", suite.failures}});
  }
  json out = {{"passed", all_passed}, {"assertions", assertions}, {"suites", suites}};
  std::cout << out.dump(2) << "\n";
  return all_passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DFE-IANet tensor library CLI"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train on an image-folder dataset");
  train->add_option("--data", ta.data, "dataset root directory")->required();
  train->add_option("--config", ta.config, "network config JSON file");
  train->add_option("--epochs", ta.epochs, "training epochs");
  train->add_option("--batch-size", ta.batch_size, "mini-batch size");
  train->add_option("--lr", ta.lr, "initial learning rate");
  train->add_option("--weight-decay", ta.weight_decay, "decoupled weight decay");
  train->add_option("--seed", ta.seed, "seed for split, init and shuffling");
  train->add_option("--out", ta.out, "output weight file");
  train->add_option("--log", ta.log, "per-epoch JSON-lines log file");
  train->add_option("--lr-schedule", ta.schedule, "cosine or constant")
      ->check(CLI::IsMember({"cosine", "constant"}));

  std::string ev_data, ev_weights, ev_config, ev_split = "test";
  uint64_t ev_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a weight file on a dataset split");
  eval->add_option("--data", ev_data, "dataset root directory")->required();
  eval->add_option("--weights", ev_weights, "weight file")->required();
  eval->add_option("--config", ev_config, "network config JSON file");
  eval->add_option("--split", ev_split, "test or train")->check(CLI::IsMember({"test", "train"}));
  eval->add_option("--seed", ev_seed, "dataset split seed");

  std::string pr_image, pr_weights, pr_config;
  int pr_topk = 3;
  auto* predict = app.add_subcommand("predict", "Classify a single image");
  predict->add_option("--image", pr_image, "image file")->required();
  predict->add_option("--weights", pr_weights, "weight file")->required();
  predict->add_option("--config", pr_config, "network config JSON file");
  predict->add_option("--topk", pr_topk, "number of classes to report");

  std::string ct_config;
  int64_t ct_input = 224;
  auto* count = app.add_subcommand("count", "Report parameter and MAC counts");
  count->add_option("--config", ct_config, "network config JSON file");
  count->add_option("--input-size", ct_input, "input resolution");

  bool st_thorough = false;
  auto* selftest = app.add_subcommand("selftest", "Run the built-in verification suites");
  selftest->add_flag("--thorough", st_thorough, "wider shapes and more repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(ta);
    if (eval->parsed()) return cmd_eval(ev_data, ev_weights, ev_config, ev_split, ev_seed);
    if (predict->parsed()) return cmd_predict(pr_image, pr_weights, pr_config, pr_topk);
    if (count->parsed()) return cmd_count(ct_config, ct_input);
    if (selftest->parsed()) return cmd_selftest(st_thorough);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
