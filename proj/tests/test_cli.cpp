#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dfeia/config_io.hpp"
#include "support.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr interleaved
};

CliResult run_cli(const std::string& args, bool merge_stderr = true) {
  const std::string cmd =
      std::string(DFEIA_CLI_PATH) + " " + args + (merge_stderr ? " 2>&1" : " 2> /dev/null");
  std::array<char, 4096> buf{};
  CliResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), got);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

// stdout carries only the JSON result; pick the object out of mixed capture.
json parse_json_tail(const std::string& mixed) {
  const size_t start = mixed.find('{');
  REQUIRE(start != std::string::npos);
  return json::parse(mixed.substr(start));
}

std::string write_tiny_config(const std::filesystem::path& dir, int classes) {
  dfeia::NetworkConfig cfg = testsupport::tiny_config(classes);
  const auto path = dir / "config.json";
  std::ofstream(path) << dfeia::config_to_json(cfg).dump(2);
  return path.string();
}

}  // namespace

TEST_CASE("cli usage errors exit 1") {
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("train").exit_code == 1);             // missing --data
  CHECK(run_cli("launch-missiles").exit_code == 1);   // unknown subcommand
  CHECK(run_cli("count --no-such-flag 3").exit_code == 1);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("cli count reports parameters, macs and a per-stage breakdown") {
  CliResult res = run_cli("count");
  CHECK(res.exit_code == 0);
  json j = parse_json_tail(res.output);

  // stdout carries only the JSON result: with stderr dropped the capture must
  // parse as a single JSON document.
  CliResult pure = run_cli("count", /*merge_stderr=*/false);
  CHECK(json::parse(pure.output) == j);
  CHECK(j["params"].get<int64_t>() == 4517720);
  CHECK(j["macs"].get<int64_t>() == 867441856);
  CHECK(j["params_m"].get<double>() == doctest::Approx(4.51772));
  CHECK(j["per_stage"].size() == 9);  // stem, 4 stages, 3 downsamplers, head

  // adw kernel ordering through the CLI config path.
  testsupport::ScratchDir dir("cli_count");
  int64_t prev = 0;
  for (int k : {7, 9, 11}) {
    dfeia::NetworkConfig cfg;
    cfg.adw_kernel = k;
    const auto cfg_path = dir.path() / ("k" + std::to_string(k) + ".json");
    std::ofstream(cfg_path) << dfeia::config_to_json(cfg).dump();
    json jk = parse_json_tail(run_cli("count --config " + cfg_path.string()).output);
    CHECK(jk["params"].get<int64_t>() > prev);
    prev = jk["params"].get<int64_t>();
  }

  CHECK(run_cli("count --config /nonexistent.json").exit_code == 2);
  CHECK(run_cli("count --input-size 100").exit_code == 2);  // not a multiple of 32
}

TEST_CASE("cli selftest --thorough executes strictly more assertions") {
  json fast = parse_json_tail(run_cli("selftest", false).output);
  json thorough = parse_json_tail(run_cli("selftest --thorough", false).output);
  CHECK(fast["passed"].get<bool>());
  CHECK(thorough["passed"].get<bool>());
  CHECK(thorough["assertions"].get<int64_t>() > fast["assertions"].get<int64_t>());
}

TEST_CASE("cli train/eval/predict round trip on a synthetic dataset") {
  testsupport::ScratchDir dir("cli_train");
  testsupport::write_synthetic_dataset(dir.path() / "data", 8, 4, 48, 7);
  const std::string config = write_tiny_config(dir.path(), 8);
  const std::string weights = (dir.path() / "model.dfew").string();
  const std::string log = (dir.path() / "train.log").string();

  // Missing dataset directory: runtime error naming the path.
  CliResult missing = run_cli("train --data /no/such/dir --out " + weights);
  CHECK(missing.exit_code == 2);
  CHECK(missing.output.find("/no/such/dir") != std::string::npos);

  // Short training run: exits 0, writes weights, logs JSON lines.
  CliResult tr = run_cli("train --data " + (dir.path() / "data").string() + " --config " + config +
                         " --epochs 4 --batch-size 8 --lr 0.002 --seed 3 --out " + weights +
                         " --log " + log);
  CHECK(tr.exit_code == 0);
  CHECK(std::filesystem::exists(weights));
  {
    std::ifstream ls(log);
    std::string line;
    int lines = 0;
    while (std::getline(ls, line)) {
      if (line.empty()) continue;
      json entry = json::parse(line);
      CHECK(entry["epoch"].get<int>() == ++lines);
      CHECK(entry.contains("train_loss"));
      CHECK(entry.contains("test_acc"));
    }
    CHECK(lines == 4);
  }

  // Determinism: identical invocation gives a byte-identical weight file.
  const std::string weights2 = (dir.path() / "model2.dfew").string();
  CliResult tr2 = run_cli("train --data " + (dir.path() / "data").string() + " --config " + config +
                          " --epochs 4 --batch-size 8 --lr 0.002 --seed 3 --out " + weights2);
  CHECK(tr2.exit_code == 0);
  {
    std::ifstream fa(weights, std::ios::binary), fb(weights2, std::ios::binary);
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
  }

  // eval prints the metrics report; an untrained-ish model sits near chance,
  // far from 1.0.
  CliResult ev = run_cli("eval --data " + (dir.path() / "data").string() + " --weights " + weights +
                         " --config " + config + " --split test --seed 3");
  CHECK(ev.exit_code == 0);
  json em = parse_json_tail(ev.output);
  CHECK(em["accuracy"].is_number());
  CHECK(em["per_class"].size() == 8);
  CHECK(em["confusion"].size() == 8);

  // predict: probabilities sorted descending, summing to <= 1 + 1e-6.
  const std::string sample = (dir.path() / "data" / "class0" / "img0.ppm").string();
  CliResult pr = run_cli("predict --image " + sample + " --weights " + weights + " --config " +
                         config + " --topk 3");
  CHECK(pr.exit_code == 0);
  json pj = parse_json_tail(pr.output);
  CHECK(pj["topk"].size() == 3);
  double sum = 0, prev = 1.0;
  for (const auto& entry : pj["topk"]) {
    const double p = entry["prob"].get<double>();
    CHECK(p <= prev + 1e-9);
    prev = p;
    sum += p;
  }
  CHECK(sum <= 1.0 + 1e-6);
  CHECK(pj["class"].get<int>() == pj["topk"][0]["class"].get<int>());

  // --topk larger than the class count is clamped with a warning.
  CliResult big = run_cli("predict --image " + sample + " --weights " + weights + " --config " +
                          config + " --topk 99");
  CHECK(big.exit_code == 0);
  CHECK(big.output.find("clamped") != std::string::npos);
  json bj = parse_json_tail(big.output);
  CHECK(bj["topk"].size() == 8);
  double full_sum = 0;
  for (const auto& entry : bj["topk"]) full_sum += entry["prob"].get<double>();
  CHECK(full_sum == doctest::Approx(1.0).epsilon(1e-6));

  // Corrupted weight file: exit 2 with the EOF message.
  const std::string corrupt = (dir.path() / "broken.dfew").string();
  {
    std::ifstream fa(weights, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() * 2 / 3);
    std::ofstream os(corrupt, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CliResult bad = run_cli("eval --data " + (dir.path() / "data").string() + " --weights " + corrupt +
                          " --config " + config);
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("unexpected end of file") != std::string::npos);

  // predict on an undecodable file: exit 2.
  const std::string garbage = (dir.path() / "garbage.ppm").string();
  std::ofstream(garbage) << "XX";
  CHECK(run_cli("predict --image " + garbage + " --weights " + weights + " --config " + config)
            .exit_code == 2);
}

TEST_CASE("cli selftest runs green and reports assertion counts") {
  CliResult res = run_cli("selftest");
  CHECK(res.exit_code == 0);
  json j = parse_json_tail(res.output);
  CHECK(j["passed"].get<bool>());
  CHECK(j["suites"].size() == 6);
  CHECK(j["assertions"].get<int64_t>() > 0);
}
