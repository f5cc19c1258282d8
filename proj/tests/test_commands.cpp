#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sei/commands.hpp"
#include "sei/error.hpp"
#include "sei/influence.hpp"
#include "sei/mock_server.hpp"

using namespace sei;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sei_test_commands" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_sts_task(const fs::path& path, const std::string& id) {
  json task;
  task["id"] = id;
  task["category"] = "sts";
  task["pairs"] = json::array({
      {{"text_a", "alpha doc one"}, {"text_b", "alpha doc two"}, {"score", 5.0}},
      {{"text_a", "alpha doc one"}, {"text_b", "beta doc two"}, {"score", 3.0}},
      {{"text_a", "gamma doc one"}, {"text_b", "delta doc two"}, {"score", 1.0}},
  });
  std::ofstream(path) << task.dump(2);
}

void write_cls_task(const fs::path& path, const std::string& id) {
  json task;
  task["id"] = id;
  task["category"] = "classification";
  json train = json::array();
  json test = json::array();
  for (int i = 0; i < 6; ++i) {
    train.push_back({{"text", "alpha marker sample " + std::to_string(i)}, {"label", 0}});
    train.push_back({{"text", "beta marker sample " + std::to_string(i)}, {"label", 1}});
  }
  test.push_back({{"text", "alpha marker held out"}, {"label", 0}});
  test.push_back({{"text", "beta marker held out"}, {"label", 1}});
  task["train"] = train;
  task["test"] = test;
  std::ofstream(path) << task.dump(2);
}

void write_clu_task(const fs::path& path, const std::string& id) {
  json task;
  task["id"] = id;
  task["category"] = "clustering";
  json items = json::array();
  for (int i = 0; i < 5; ++i) {
    items.push_back({{"text", "alpha marker item " + std::to_string(i)}, {"label", 0}});
    items.push_back({{"text", "beta marker item " + std::to_string(i)}, {"label", 1}});
  }
  task["items"] = items;
  std::ofstream(path) << task.dump(2);
}

void write_base_dataset(const fs::path& path) {
  std::ofstream out(path);
  for (int i = 0; i < 6; ++i) {
    json line;
    line["instruction"] = "";
    line["query"] = "neutral query " + std::to_string(i);
    line["positive"] = "neutral doc " + std::to_string(i);
    line["negative"] = "other doc " + std::to_string(i);
    line["category"] = "sts";
    line["task_id"] = "base";
    line["generator"] = "fixture";
    line["negative_origin"] = "generated";
    out << line.dump() << "\n";
  }
}

// Manifest fixture wired to an in-process mock server.
fs::path write_manifest(const fs::path& dir, const std::string& base_url,
                        bool with_generation = true) {
  json m;
  m["name"] = "cmd-test";
  m["seed"] = 21;
  m["output_dir"] = "out";
  m["gateway"] = {{"base_url", base_url}, {"max_concurrent", 1}, {"max_retries", 1},
                  {"backoff_base_ms", 1}, {"request_timeout_ms", 3000}};
  m["model"] = "mock-llm";
  m["template_dir"] = std::string(SEI_SOURCE_DIR) + "/assets/prompts";
  if (with_generation) {
    m["generation"] = json::array({
        {{"category", "short-short"}, {"n_tasks", 1}, {"n_instances_per_task", 5},
         {"seed_base", 100}},
        {{"category", "sts"}, {"n_tasks", 1}, {"n_instances_per_task", 5}, {"seed_base", 200}},
    });
  }
  m["embedder"] = {{"hash_buckets", 512}, {"dim", 16}, {"min_n", 2}, {"max_n", 3}};
  m["train"] = {{"batch_size", 4}, {"epochs", 1}, {"warmup_steps", 2}, {"learning_rate", 0.02}};
  m["eval_tasks"] = json::array({(dir / "sts_task.json").string(),
                                 (dir / "cls_task.json").string(),
                                 (dir / "clu_task.json").string()});
  m["influence_categories"] = json::array({"short-short", "sts"});
  m["alpha"] = 0.05;
  m["base_dataset"] = (dir / "base.jsonl").string();
  m["jobs"] = 2;

  write_sts_task(dir / "sts_task.json", "sts-demo");
  write_cls_task(dir / "cls_task.json", "cls-demo");
  write_clu_task(dir / "clu_task.json", "clu-demo");
  write_base_dataset(dir / "base.jsonl");

  const fs::path path = dir / "manifest.json";
  std::ofstream(path) << m.dump(2);
  return path;
}

std::vector<MockResponse> generation_script() {
  std::vector<MockResponse> script;
  script.push_back(chat_text_response(R"(["Match alpha phrases with alpha documents."])"));
  for (int i = 0; i < 5; ++i) {
    script.push_back(chat_text_response(
        R"({"query":"alpha phrase )" + std::to_string(i) + R"(","positive":"alpha doc )" +
        std::to_string(i) + R"(","negative":"beta doc )" + std::to_string(i) + R"("})"));
  }
  script.push_back(chat_text_response(R"(["Judge similarity of gamma sentences."])"));
  for (int i = 0; i < 5; ++i) {
    script.push_back(chat_text_response(
        R"({"query":"gamma sentence )" + std::to_string(i) + R"(","positive":"gamma variant )" +
        std::to_string(i) + R"(","negative":"delta sentence )" + std::to_string(i) + R"("})"));
  }
  return script;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cmd_generate writes per-category files and a composition report") {
  const fs::path dir = fresh_dir("generate");
  MockServer mock(generation_script());
  const fs::path manifest_path = write_manifest(dir, mock.base_url());
  const ExperimentManifest manifest = load_manifest(manifest_path);

  cmd_generate(manifest);

  const Dataset ss = read_jsonl(dir / "out/data/short-short.jsonl");
  const Dataset sts = read_jsonl(dir / "out/data/sts.jsonl");
  CHECK(ss.size() == 5);
  CHECK(sts.size() == 5);
  CHECK(fs::exists(dir / "out/composition.csv"));
  const std::string csv = slurp(dir / "out/composition.csv");
  CHECK(csv.find("short-short,5") != std::string::npos);
  CHECK(csv.find("sts,5") != std::string::npos);
  CHECK(csv.find("total,10") != std::string::npos);
}

TEST_CASE("cmd_generate reruns byte-identically under the same script and seed") {
  const fs::path dir_a = fresh_dir("gen_a");
  const fs::path dir_b = fresh_dir("gen_b");
  std::string bytes_a, bytes_b;
  {
    MockServer mock(generation_script());
    const ExperimentManifest m = load_manifest(write_manifest(dir_a, mock.base_url()));
    cmd_generate(m);
    bytes_a = slurp(dir_a / "out/data/short-short.jsonl") + slurp(dir_a / "out/data/sts.jsonl");
  }
  {
    MockServer mock(generation_script());
    const ExperimentManifest m = load_manifest(write_manifest(dir_b, mock.base_url()));
    cmd_generate(m);
    bytes_b = slurp(dir_b / "out/data/short-short.jsonl") + slurp(dir_b / "out/data/sts.jsonl");
  }
  CHECK(!bytes_a.empty());
  CHECK(bytes_a == bytes_b);
}

TEST_CASE("generate against a dead gateway exits with code 2") {
  const fs::path dir = fresh_dir("dead_gateway");
  const fs::path manifest_path = write_manifest(dir, "http://127.0.0.1:1");
  CHECK(run_cli("generate " + manifest_path.string()) == 2);
}

TEST_CASE("cmd_train writes a checkpoint that reloads to identical params") {
  const fs::path dir = fresh_dir("train");
  MockServer mock(generation_script());
  const ExperimentManifest manifest = load_manifest(write_manifest(dir, mock.base_url()));
  cmd_generate(manifest);
  cmd_train(manifest);

  const fs::path ckpt = dir / "out/checkpoints/full.json";
  REQUIRE(fs::exists(ckpt));
  const EmbedderParams params = load_params(ckpt);
  const EmbedderParams again = load_params(ckpt);
  CHECK(params_equal(params, again));
  CHECK(fs::exists(dir / "out/train_report.json"));
}

TEST_CASE("cmd_eval produces one score per task") {
  const fs::path dir = fresh_dir("eval");
  MockServer mock(generation_script());
  const ExperimentManifest manifest = load_manifest(write_manifest(dir, mock.base_url()));
  cmd_generate(manifest);
  cmd_train(manifest);
  cmd_eval(manifest);

  const json scores = json::parse(slurp(dir / "out/scores.json"));
  CHECK(scores.at("per_task").size() == 3);
  CHECK(scores.at("per_task").contains("sts-demo"));
  CHECK(scores.at("per_task").contains("cls-demo"));
  CHECK(scores.at("per_task").contains("clu-demo"));
  CHECK(fs::exists(dir / "out/scores.csv"));
}

TEST_CASE("eval with a missing task file exits with code 2 naming the path") {
  const fs::path dir = fresh_dir("missing_task");
  MockServer mock({chat_text_response("unused")});
  const fs::path manifest_path = write_manifest(dir, mock.base_url());
  fs::remove(dir / "sts_task.json");

  try {
    load_manifest(manifest_path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("sts_task.json") != std::string::npos);
    CHECK(exit_code_for(e) == 2);
  }
  CHECK(run_cli("eval " + manifest_path.string()) == 2);
}

TEST_CASE("cmd_influence runs the grid and writes csvs plus the heatmap") {
  const fs::path dir = fresh_dir("influence");
  MockServer mock(generation_script());
  const ExperimentManifest manifest = load_manifest(write_manifest(dir, mock.base_url()));
  cmd_generate(manifest);
  cmd_influence(manifest);

  for (const char* name : {"influence.csv", "pvalues.csv", "significant.csv", "heatmap.svg"}) {
    CHECK(fs::exists(dir / "out" / name));
  }
  const std::string inf = slurp(dir / "out/influence.csv");
  CHECK(inf.find("category,overall,classification,clustering,sts,cls-demo,clu-demo,sts-demo\n") == 0);
  CHECK(inf.find("short-short,") != std::string::npos);

  // 4 run records + registry manifest
  CHECK(fs::exists(dir / "out/registry/manifest.json"));
  int run_records = 0;
  for (const auto& entry : fs::directory_iterator(dir / "out/registry")) {
    run_records += entry.path().filename().string().rfind("run-", 0) == 0;
  }
  CHECK(run_records == 4);

  // csv cells must match a literal re-partition of the registry runs
  const auto subsets = enumerate_subsets(manifest.influence_categories);
  const auto runs = RunRegistry(dir / "out/registry").load_all(subsets);
  REQUIRE(runs.size() == 4);
  std::istringstream csv_in(inf);
  std::string header, line;
  std::getline(csv_in, header);
  std::vector<std::string> cols;
  {
    std::stringstream hs(header);
    std::string tok;
    while (std::getline(hs, tok, ',')) cols.push_back(tok);
  }
  while (std::getline(csv_in, line)) {
    std::stringstream ls(line);
    std::string row_name, tok;
    std::getline(ls, row_name, ',');
    const Category row = category_from_string(row_name);
    for (std::size_t c = 1; c < cols.size() && std::getline(ls, tok, ','); ++c) {
      double plus = 0.0, minus = 0.0;
      int n_plus = 0, n_minus = 0;
      for (const auto& run : runs) {
        const bool in = std::find(run.subset.included.begin(), run.subset.included.end(), row) !=
                        run.subset.included.end();
        const double v = score_for(*run.scores, cols[c]);
        (in ? plus : minus) += v;
        (in ? n_plus : n_minus) += 1;
      }
      const double oracle = plus / n_plus - minus / n_minus;
      CHECK(std::abs(std::stod(tok) - oracle) <= 1e-9);  // CSV cells carry 10 digits
    }
  }

  // report re-renders from the registry without retraining
  fs::remove(dir / "out/influence.csv");
  cmd_report(manifest);
  CHECK(fs::exists(dir / "out/influence.csv"));
}

TEST_CASE("influence grid and outputs are byte-identical across reruns") {
  auto run_once = [](const fs::path& dir) {
    MockServer mock(generation_script());
    const ExperimentManifest m = load_manifest(write_manifest(dir, mock.base_url()));
    cmd_generate(m);
    cmd_influence(m);
    std::string all;
    all += slurp(dir / "out/influence.csv");
    all += slurp(dir / "out/pvalues.csv");
    all += slurp(dir / "out/significant.csv");
    all += slurp(dir / "out/heatmap.svg");
    std::vector<fs::path> records;
    for (const auto& entry : fs::directory_iterator(dir / "out/registry")) {
      records.push_back(entry.path());
    }
    std::sort(records.begin(), records.end());
    for (const auto& r : records) {
      if (r.filename() != ".lock") all += slurp(r);
    }
    return all;
  };
  const std::string a = run_once(fresh_dir("inf_a"));
  const std::string b = run_once(fresh_dir("inf_b"));
  CHECK(!a.empty());
  CHECK(a == b);
}

TEST_CASE("cli binary runs the generate-train-eval chain end to end") {
  const fs::path dir = fresh_dir("cli_happy");
  MockServer mock(generation_script());
  const fs::path manifest_path = write_manifest(dir, mock.base_url());

  CHECK(run_cli("generate " + manifest_path.string()) == 0);
  CHECK(fs::exists(dir / "out/data/short-short.jsonl"));
  CHECK(run_cli("train " + manifest_path.string()) == 0);
  CHECK(fs::exists(dir / "out/checkpoints/full.json"));
  CHECK(run_cli("eval " + manifest_path.string()) == 0);
  CHECK(fs::exists(dir / "out/scores.json"));
}

TEST_CASE("cli rejects a bad manifest with exit code 2 and help with 0") {
  const fs::path dir = fresh_dir("cli_misc");
  std::ofstream(dir / "broken.json") << "{not json";
  CHECK(run_cli("train " + (dir / "broken.json").string()) == 2);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("train " + (dir / "nonexistent.json").string()) == 2);
}
