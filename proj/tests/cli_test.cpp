// End-to-end checks of the salm binary (path injected via SALM_CLI_PATH).
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "salm/corpus.hpp"
#include "salm/synthgen.hpp"
#include "test_support.hpp"

using namespace salm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SALM_CLI_PATH) + " " + args + " >" + log.string() +
                          ".out 2>" + log.string() + ".err";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliFixture {
  testsupport::TempDir dir{"cli"};
  fs::path dataset;
  fs::path config;
  Corpus corpus;

  CliFixture() {
    synthgen::GenSpec spec = synthgen::genspec_for_classes(
        synthgen::default_genspec(), {"Injection", "XSS", "Dir-traversal"});
    spec.samples_per_class = 20;
    spec.seed = 13;
    corpus = synthgen::generate_template_corpus(spec);
    dataset = dir.path() / "data.jsonl";
    save_corpus_jsonl(corpus, dataset);
    config = dir.path() / "exp.json";
    write_config();
  }

  void write_config() {
    const json cfg = {
        {"dataset", {{"path", dataset.string()}, {"format", "jsonl"}}},
        {"output_dir", (dir.path() / "out").string()},
        {"split", {{"mode", "stratified"}, {"test_fraction", 0.25}, {"seed", 7}}},
        {"featurizer",
         {{"text", {{"dim", 512}}},
          {"payload", {{"dim_per_half", 256}, {"ngram_min", 3}, {"ngram_max", 4}}}}},
        {"encoder",
         {{"text", {{"hidden_dims", {32}}, {"embed_dim", 16}, {"seed", 1}}},
          {"payload", {{"hidden_dims", {32}}, {"embed_dim", 16}, {"seed", 2}}}}},
        {"stage1",
         {{"epochs", 3},
          {"lr", 0.002},
          {"effective_batch", 32},
          {"micro_batch", 16},
          {"triplet_count", 128},
          {"seed", 11}}},
        {"stage2", {{"epochs", 3}, {"lr", 0.002}, {"batch", 16}, {"seed", 12}}},
        {"baselines",
         {{"forest", {{"n_trees", 5}, {"max_depth", 6}, {"seed", 3}}},
          {"tfidf", {{"max_features", 512}}},
          {"supervised", {{"epochs", 2}, {"seed", 4}}},
          {"knn", {{"k", 3}, {"seed", 5}}}}}};
    std::ofstream out(config);
    out << cfg.dump(2);
  }

  fs::path out() const { return dir.path() / "out"; }
  fs::path log(const std::string& tag) const { return dir.path() / tag; }
};

}  // namespace

TEST_CASE("cli: missing dataset path fails with a message naming the path") {
  testsupport::TempDir dir("cli_missing");
  const fs::path config = dir.path() / "exp.json";
  {
    std::ofstream out(config);
    out << json{{"dataset", {{"path", "/nonexistent/data.jsonl"}}},
                {"output_dir", (dir.path() / "out").string()}}
               .dump();
  }
  const int code = run("prepare --config " + config.string(), dir.path() / "log");
  CHECK(code != 0);
  CHECK(slurp(dir.path() / "log.err").find("/nonexistent/data.jsonl") != std::string::npos);
}

TEST_CASE("cli: stage 2 without a stage-1 checkpoint is an explicit error") {
  CliFixture fx;
  const int code = run("train --config " + fx.config.string() + " --stage 2 --out " +
                           (fx.dir.path() / "fresh").string(),
                       fx.log("s2"));
  CHECK(code != 0);
  CHECK(slurp(fx.log("s2").string() + ".err").find("stage-1 checkpoint") != std::string::npos);
}

TEST_CASE("cli: unknown baseline method is a usage error") {
  CliFixture fx;
  const int code = run("baseline --config " + fx.config.string() + " --method nonsense --out " +
                           (fx.dir.path() / "b").string(),
                       fx.log("bad"));
  CHECK(code != 0);
  CHECK(slurp(fx.log("bad").string() + ".err").find("nonsense") != std::string::npos);
}

TEST_CASE("cli: prepare is deterministic and matches the date-filter oracle") {
  CliFixture fx;

  REQUIRE(run("prepare --config " + fx.config.string() + " --out " +
                  (fx.dir.path() / "p1").string(),
              fx.log("p1")) == 0);
  REQUIRE(run("prepare --config " + fx.config.string() + " --out " +
                  (fx.dir.path() / "p2").string(),
              fx.log("p2")) == 0);
  CHECK(slurp(fx.dir.path() / "p1" / "train_manifest.jsonl") ==
        slurp(fx.dir.path() / "p2" / "train_manifest.jsonl"));
  CHECK(slurp(fx.dir.path() / "p1" / "test_manifest.jsonl") ==
        slurp(fx.dir.path() / "p2" / "test_manifest.jsonl"));

  // temporal mode against an independent date filter
  json cfg = json::parse(slurp(fx.config));
  cfg["split"] = {{"mode", "temporal"}, {"cutoff", "2023-01-01"}};
  const fs::path tconfig = fx.dir.path() / "exp_temporal.json";
  {
    std::ofstream out(tconfig);
    out << cfg.dump();
  }
  REQUIRE(run("prepare --config " + tconfig.string() + " --out " +
                  (fx.dir.path() / "pt").string(),
              fx.log("pt")) == 0);
  const auto train_ids = read_manifest(fx.dir.path() / "pt" / "train_manifest.jsonl");
  size_t expected = 0;
  const Date cutoff = Date::parse("2023-01-01");
  for (const auto& s : fx.corpus.samples) {
    if (*s.published < cutoff) ++expected;
  }
  CHECK(train_ids.size() == expected);
}

TEST_CASE("cli: full two-stage flow with classification, evaluation and comparison") {
  CliFixture fx;
  const std::string out = fx.out().string();

  REQUIRE(run("train --config " + fx.config.string() + " --stage 1", fx.log("t1")) == 0);
  REQUIRE(fs::exists(fx.out() / "stage1.ckpt"));
  REQUIRE(fs::exists(fx.out() / "history_stage1.csv"));
  REQUIRE(fs::exists(fx.out() / "train1_manifest.json"));

  REQUIRE(run("train --config " + fx.config.string() + " --stage 2", fx.log("t2")) == 0);
  REQUIRE(fs::exists(fx.out() / "stage2.ckpt"));

  const fs::path preds = fx.out() / "predictions.jsonl";
  REQUIRE(run("classify --teacher " + out + "/stage1.ckpt --student " + out +
                  "/stage2.ckpt --input " + fx.dataset.string() + " --out " + preds.string(),
              fx.log("cl")) == 0);
  REQUIRE(fs::exists(preds));

  REQUIRE(run("evaluate --config " + fx.config.string() + " --predictions " + preds.string() +
                  " --method-name salm",
              fx.log("ev")) == 0);
  REQUIRE(fs::exists(fx.out() / "report_salm.json"));

  REQUIRE(run("baseline --config " + fx.config.string() + " --method knn", fx.log("bk")) == 0);
  REQUIRE(fs::exists(fx.out() / "report_knn.json"));

  REQUIRE(run("evaluate --compare " + (fx.out() / "report_salm.json").string() + " " +
                  (fx.out() / "report_knn.json").string() + " --designated salm --out " +
                  (fx.out() / "cmp").string(),
              fx.log("cmp")) == 0);
  CHECK(fs::exists(fx.out() / "cmp" / "comparison.csv"));

  // zero-shot flag: adding a class keeps the command line usable end to end
  REQUIRE(run("classify --teacher " + out + "/stage1.ckpt --student " + out +
                  "/stage2.ckpt --input " + fx.dataset.string() + " --out " +
                  (fx.out() / "preds_zs.jsonl").string() +
                  " --add-class \"Cryptojacking=Unauthorized mining of currency on victims.\"",
              fx.log("zs")) == 0);

  // export + projection
  REQUIRE(run("project --teacher " + out + "/stage1.ckpt --student " + out +
                  "/stage2.ckpt --input " + fx.dataset.string() + " --embeddings " +
                  (fx.out() / "emb.csv").string() + " --out " + (fx.out() / "proj.csv").string(),
              fx.log("pj")) == 0);
  CHECK(fs::exists(fx.out() / "emb.csv"));
  CHECK(fs::exists(fx.out() / "proj.csv"));
}

TEST_CASE("cli: synthgen template mode is deterministic and loads back cleanly") {
  testsupport::TempDir dir("cli_synth");
  const fs::path a = dir.path() / "a.json";
  const fs::path b = dir.path() / "b.json";
  REQUIRE(run("synthgen --mode template --samples 5 --seed 3 --out " + a.string(),
              dir.path() / "sa") == 0);
  REQUIRE(run("synthgen --mode template --samples 5 --seed 3 --out " + b.string(),
              dir.path() / "sb") == 0);
  CHECK(slurp(a) == slurp(b));

  const auto loaded = load_corpus(a, CorpusFormat::JsonArray);
  CHECK(loaded.rejections.empty());
  CHECK(loaded.corpus.samples.size() == 55);  // 11 classes x 5
}

TEST_CASE("cli: synthgen llm mode without a credential is a configuration error") {
  testsupport::TempDir dir("cli_llm");
  ::unsetenv("SALM_LLM_API_KEY");
  const int code = run("synthgen --mode llm --endpoint http://x.test/v1 --model m --out " +
                           (dir.path() / "x.json").string(),
                       dir.path() / "log");
  CHECK(code != 0);
  CHECK(slurp(dir.path() / "log.err").find("SALM_LLM_API_KEY") != std::string::npos);
}
