#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cbgen/corpus.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace cbgen;
using nlohmann::json;

namespace {

std::string cli_binary() {
  const char* bin = std::getenv("CBGEN_BIN");
  if (bin) return bin;
  // Fallback for running the test binary by hand from the build directory.
  if (std::filesystem::exists("tools/cbgen")) return "tools/cbgen";
  REQUIRE_MESSAGE(false,
                  "CBGEN_BIN must point at the cbgen binary (set by ctest)");
  return "";
}

int run_cli(const std::string& args, const std::string& log_path) {
  std::string cmd = cli_binary() + " " + args + " >" + log_path + " 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("end-to-end smoke on a planted-feature fixture") {
  auto dir = testing::write_temp_dir("cli_smoke");
  testing::SyntheticTask task =
      testing::make_synthetic_task(testing::smoke_spec());
  REQUIRE(task.train.size() == 200);
  save_matrix(task.matrix, dir + "/matrix.tsv");
  save_corpus(task.train, dir + "/train.jsonl");
  save_corpus(task.dev, dir + "/dev.jsonl");
  save_corpus(task.test, dir + "/test.jsonl");

  // build-vectorizer, twice: identical bytes.
  std::string bv_args = "build-vectorizer --matrix " + dir +
                        "/matrix.tsv --train " + dir +
                        "/train.jsonl --out " + dir + "/vec.json";
  CHECK(run_cli(bv_args, dir + "/bv.log") == 0);
  std::string first = slurp(dir + "/vec.json");
  CHECK(run_cli(bv_args, dir + "/bv2.log") == 0);
  CHECK(first == slurp(dir + "/vec.json"));

  // train a cbc model.
  CHECK(run_cli("train --kind cbc --train " + dir + "/train.jsonl --dev " +
                    dir + "/dev.jsonl --vectorizer " + dir +
                    "/vec.json --matrix " + dir +
                    "/matrix.tsv --model-out " + dir +
                    "/model.json --log-out " + dir +
                    "/train_log.jsonl --hidden-sizes 64 --patience 200",
                dir + "/train.log") == 0);
  CHECK(slurp(dir + "/train_log.jsonl").find("dev_macro_f1") !=
        std::string::npos);

  // evaluate on the held-out lexicon.
  CHECK(run_cli("evaluate --model " + dir + "/model.json --test " + dir +
                    "/test.jsonl --vectorizer " + dir +
                    "/vec.json --matrix " + dir + "/matrix.tsv --out " + dir
                    + "/metrics.json",
                dir + "/eval.log") == 0);
  json metrics = json::parse(slurp(dir + "/metrics.json"));
  CHECK(metrics.at("macro_f1").get<double>() > 0.9);
  CHECK(metrics.contains("rarest_class_recall"));
  CHECK(metrics.at("degenerate").is_boolean());

  // vectorize writes one line per document, id first.
  CHECK(run_cli("vectorize --vectorizer " + dir + "/vec.json --matrix " +
                    dir + "/matrix.tsv --input " + dir +
                    "/test.jsonl --out " + dir + "/vectors.tsv",
                dir + "/vec.log") == 0);
  std::string vectors = slurp(dir + "/vectors.tsv");
  CHECK(vectors.substr(0, 2) == "te");

  // predictions carry the label distribution.
  CHECK(run_cli("predict --model " + dir + "/model.json --input " + dir +
                    "/test.jsonl --vectorizer " + dir +
                    "/vec.json --matrix " + dir + "/matrix.tsv --out " + dir +
                    "/preds.tsv",
                dir + "/pred.log") == 0);
  CHECK(slurp(dir + "/preds.tsv").find("p_topic_a") != std::string::npos);
}

TEST_CASE("joint model trains and predicts through the cli") {
  auto dir = testing::write_temp_dir("cli_cbcnn");
  testing::SyntheticSpec spec = testing::smoke_spec();
  spec.train_per_class = 30;
  spec.dev_per_class = 8;
  spec.test_per_class = 8;
  testing::SyntheticTask task = testing::make_synthetic_task(spec);
  save_matrix(task.matrix, dir + "/matrix.tsv");
  save_corpus(task.train, dir + "/train.jsonl");
  save_corpus(task.dev, dir + "/dev.jsonl");
  save_corpus(task.test, dir + "/test.jsonl");

  CHECK(run_cli("build-vectorizer --matrix " + dir + "/matrix.tsv --train " +
                    dir + "/train.jsonl --out " + dir + "/vec.json",
                dir + "/bv.log") == 0);
  std::string small_net =
      " --filter-sizes 2,3 --filters-per-size 4 --cnn-hidden 8 "
      "--embedding-dim 6 --combine-hidden 8 --hidden-sizes 8 "
      "--patience 80 --max-steps 400 --learning-rate 0.3 --dropout-c 2.0";
  CHECK(run_cli("train --kind cbcnn --train " + dir + "/train.jsonl --dev " +
                    dir + "/dev.jsonl --vectorizer " + dir +
                    "/vec.json --matrix " + dir +
                    "/matrix.tsv --model-out " + dir + "/model.json" +
                    small_net,
                dir + "/train.log") == 0);
  CHECK(run_cli("evaluate --model " + dir + "/model.json --test " + dir +
                    "/test.jsonl --vectorizer " + dir +
                    "/vec.json --matrix " + dir + "/matrix.tsv --out " + dir +
                    "/metrics.json",
                dir + "/eval.log") == 0);
  json metrics = json::parse(slurp(dir + "/metrics.json"));
  CHECK(metrics.at("model") == "cbcnn");
  // The embedding branch carries the class signal across the lexicon split.
  CHECK(metrics.at("macro_f1").get<double>() > 0.8);

  // Predicting without the vectorizer is a usage error surfaced as data
  // error (the model declares what it needs).
  CHECK(run_cli("predict --model " + dir + "/model.json --input " + dir +
                    "/test.jsonl --out " + dir + "/p.tsv",
                dir + "/pred_fail.log") == 1);
}

TEST_CASE("inspect-feature reproduces the worked example's table") {
  auto dir = testing::write_temp_dir("cli_inspect");
  save_matrix(testing::saturn_matrix(), dir + "/matrix.tsv");
  save_corpus(testing::saturn_corpus(), dir + "/train.jsonl");

  CHECK(run_cli("inspect-feature --matrix " + dir + "/matrix.tsv --train " +
                    dir + "/train.jsonl --feature C:saturn_v --class-label "
                    "sci.space --max-ngram-order 2 --out " +
                    dir + "/table.tsv",
                dir + "/inspect.log") == 0);
  std::string table = slurp(dir + "/table.tsv");
  CHECK(table.find("rocket\t7.32\t3\t1") != std::string::npos);
  CHECK(table.find("kennedy\t2.3\t1\t0") != std::string::npos);
  CHECK(table.find("capacity\t1.95\t0\t1") != std::string::npos);
  CHECK(table.find("# threshold\t2.3") != std::string::npos);
  CHECK(table.find("# support_size\t5") != std::string::npos);
}

TEST_CASE("usage and data errors use distinct exit codes") {
  auto dir = testing::write_temp_dir("cli_errors");
  // Missing required --matrix: usage error.
  CHECK(run_cli("build-vectorizer --train nope.jsonl --out x.json",
                dir + "/e1.log") == 2);
  CHECK(run_cli("no-such-command", dir + "/e2.log") == 2);

  // Single-class corpus: a data error surfaced from selection.
  {
    std::ofstream out(dir + "/single.jsonl");
    out << R"({"id":"1","label":"only","text":"rocket"})" << "\n";
    out << R"({"id":"2","label":"only","text":"shuttle"})" << "\n";
  }
  save_matrix(testing::saturn_matrix(), dir + "/matrix.tsv");
  CHECK(run_cli("build-vectorizer --matrix " + dir + "/matrix.tsv --train " +
                    dir + "/single.jsonl --out " + dir + "/v.json",
                dir + "/e3.log") == 1);

  // Unreadable matrix path: data error.
  CHECK(run_cli("build-vectorizer --matrix " + dir +
                    "/missing.tsv --train " + dir +
                    "/single.jsonl --out " + dir + "/v.json",
                dir + "/e4.log") == 1);
}

TEST_CASE("merge-matrix grafts a transposed block") {
  auto dir = testing::write_temp_dir("cli_merge");
  {
    std::ofstream fs(dir + "/base.tsv");
    fs << "milk\tS:liter_of_X\t3\n";
    std::ofstream fc(dir + "/fc.tsv");
    fc << "C:cow\tmilk\t2\nC:cow\tpasture\t1.5\n";
  }
  CHECK(run_cli("merge-matrix --base " + dir + "/base.tsv --fc-transpose " +
                    dir + "/fc.tsv --out " + dir + "/merged.tsv",
                dir + "/merge.log") == 0);
  std::string merged = slurp(dir + "/merged.tsv");
  CHECK(merged.find("milk\tC:cow\t2") != std::string::npos);
  CHECK(merged.find("milk\tS:liter_of_X\t3") != std::string::npos);
  CHECK(merged.find("pasture\tC:cow\t1.5") != std::string::npos);
}

TEST_CASE("options load from a config file, flags win") {
  auto dir = testing::write_temp_dir("cli_config");
  save_matrix(testing::saturn_matrix(), dir + "/matrix.tsv");
  save_corpus(testing::saturn_corpus(), dir + "/train.jsonl");
  {
    std::ofstream cfg(dir + "/run.cfg");
    cfg << "[inspect-feature]\n";
    cfg << "matrix=" << dir << "/matrix.tsv\n";
    cfg << "train=" << dir << "/train.jsonl\n";
    cfg << "feature=C:saturn_v\n";
    cfg << "class-label=sci.space\n";
    cfg << "max-ngram-order=2\n";
  }
  CHECK(run_cli("--config " + dir + "/run.cfg inspect-feature --out " + dir +
                    "/t1.tsv",
                dir + "/c1.log") == 0);
  CHECK(slurp(dir + "/t1.tsv").find("rocket\t7.32\t3\t1") !=
        std::string::npos);

  // A flag on the command line overrides the file: restricting to unigrams
  // drops the bigram rows but keeps unigram counts identical.
  CHECK(run_cli("--config " + dir + "/run.cfg inspect-feature "
                    "--max-ngram-order 1 --out " +
                    dir + "/t2.tsv",
                dir + "/c2.log") == 0);
  CHECK(slurp(dir + "/t2.tsv").find("rocket\t7.32\t3\t1") !=
        std::string::npos);
}

}  // TEST_SUITE
