// End-to-end tests driving the installed binary as a subprocess.
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ohd/corpus.hpp"
#include "ohd/encoder.hpp"
#include "ohd/ioutil.hpp"
#include "testutil.hpp"

using namespace ohd;
using namespace ohd::testutil;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

std::string cli_bin() {
  const char* bin = std::getenv("OHD_CLI_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "OHD_CLI_BIN must point at the binary");
  return bin;
}

RunResult run(const std::string& args) {
  const std::string cmd = cli_bin() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) {
    result.out.append(buf, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "ohd_cli_test";
  fs::create_directories(dir);
  return dir;
}

// Annotation JSONL in the loader's input schema.
void write_annotations(const fs::path& path,
                       const std::vector<ImageRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["image_uri"] = r.image_uri;
    auto objs = nlohmann::ordered_json::array();
    for (const auto& o : r.objects) {
      objs.push_back({{"name", o.name}});
    }
    j["objects"] = std::move(objs);
    j["captions"] = r.captions;
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

}  // namespace

TEST_CASE("build is deterministic and produces a loadable benchmark") {
  const auto dir = work_dir();
  const auto ann = dir / "ann.jsonl";
  write_annotations(ann, make_toy_corpus(6, 3));
  const auto out1 = dir / "bench1.jsonl";
  const auto out2 = dir / "bench2.jsonl";

  auto r1 = run("build --annotations " + ann.string() + " --out " +
                out1.string() + " --seed 11 --name demo");
  CHECK(r1.exit_code == 0);
  auto r2 = run("build --annotations " + ann.string() + " --out " +
                out2.string() + " --seed 11 --name demo");
  CHECK(r2.exit_code == 0);
  CHECK(read_file(out1) == read_file(out2));

  const auto set = load_benchmark(out1);
  CHECK(set.name == "demo");
  CHECK(set.seed == 11);
  CHECK(set.samples.size() == 6);
  for (const auto& s : set.samples) CHECK(s.negatives.size() == 27);

  const auto out3 = dir / "bench3.jsonl";
  auto r3 = run("build --annotations " + ann.string() + " --out " +
                out3.string() + " --seed 12 --name demo");
  CHECK(r3.exit_code == 0);
  CHECK(read_file(out1) != read_file(out3));  // seed changes the output
}

TEST_CASE("train then eval round-trips through checkpoints") {
  const auto dir = work_dir();
  const auto ann = dir / "ann_train.jsonl";
  write_annotations(ann, make_toy_corpus(8, 9));
  const auto bench = dir / "bench_train.jsonl";
  REQUIRE(run("build --annotations " + ann.string() + " --out " +
              bench.string() + " --seed 2")
              .exit_code == 0);

  const auto params = dir / "params.txt";
  const auto log = dir / "train_log.jsonl";
  auto t = run("train --benchmark " + bench.string() + " --annotations " +
               ann.string() + " --params-out " + params.string() + " --log " +
               log.string() +
               " --epochs 1 --batch-size 4 --lr 0.01 --vocab-hash-size 256"
               " --embed-dim 16");
  CHECK(t.exit_code == 0);
  CHECK(fs::exists(params));
  const auto loaded = load_params(params);
  CHECK(loaded.vocab_hash_size == 256);
  CHECK(loaded.embed_dim == 16);

  // log: provenance line then one epoch line
  std::istringstream log_in(read_file(log));
  std::string line;
  REQUIRE(std::getline(log_in, line));
  const auto prov = nlohmann::json::parse(line);
  CHECK(prov.contains("seed"));
  CHECK(prov.contains("config_hash"));
  REQUIRE(std::getline(log_in, line));
  CHECK(nlohmann::json::parse(line).contains("total"));

  auto e = run("eval --benchmark " + bench.string() + " --annotations " +
               ann.string() + " --params " + params.string() + " --report " +
               (dir / "eval.json").string());
  CHECK(e.exit_code == 0);
  CHECK(e.out.find("Avg.") != std::string::npos);
  const auto report = nlohmann::json::parse(read_file(dir / "eval.json"));
  CHECK(report["report"]["n"] == 8);
}

TEST_CASE("chair metrics reproduce the hand fixture") {
  const auto dir = work_dir();
  const auto gold = dir / "gold.jsonl";
  write_annotations(gold, {make_record("i1", {"dog", "cat"}, {"x"}),
                           make_record("i2", {"bus", "car"}, {"x"})});
  const auto captions = dir / "caps.tsv";
  atomic_write_file(captions, "i1\ta dog and a cat.\ni2\ta bird.\n");

  auto r = run("metrics chair --captions " + captions.string() + " --gold " +
               gold.string() + " --out " + (dir / "chair.json").string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("CHAIR_S 0.333333") != std::string::npos);
  CHECK(r.out.find("Cover 0.5") != std::string::npos);
  const auto j = nlohmann::json::parse(read_file(dir / "chair.json"));
  CHECK(j["report"]["hallucinated_mentions"] == 1);
  CHECK(j["report"]["total_mentions"] == 3);

  auto audit = run("metrics chair --captions " + captions.string() +
                   " --gold " + gold.string() + " --cover-formula paper");
  CHECK(audit.exit_code == 0);
  CHECK(audit.out.find("Cover 0.25") != std::string::npos);
}

TEST_CASE("pope question build and scoring round-trip") {
  const auto dir = work_dir();
  const auto ann = dir / "ann_pope.jsonl";
  write_annotations(ann, make_toy_corpus(5, 21));
  const auto questions = dir / "pope_q.jsonl";
  REQUIRE(run("metrics pope --annotations " + ann.string() +
              " --per-image 4 --seed 3 --questions-out " + questions.string())
              .exit_code == 0);

  std::istringstream in(read_file(questions));
  std::string line, answers;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++n;
    answers += "yes\n";
  }
  CHECK(n == 20);  // 5 images x 4 questions
  const auto answers_path = dir / "answers.txt";
  atomic_write_file(answers_path, answers);

  auto r = run("metrics pope --questions " + questions.string() +
               " --answers " + answers_path.string());
  CHECK(r.exit_code == 0);
  // always-yes on a balanced set: accuracy 0.5, recall 1, yes_ratio 1
  CHECK(r.out.find("accuracy 0.5") != std::string::npos);
  CHECK(r.out.find("yes_ratio 1") != std::string::npos);
}

TEST_CASE("report formats a csv") {
  const auto dir = work_dir();
  const auto csv = dir / "results.csv";
  atomic_write_file(csv, "model,coco,flickr,avg\ntoy,50,70,60\n");
  auto table = run("report --in " + csv.string());
  CHECK(table.exit_code == 0);
  CHECK(table.out.find("Avg.") != std::string::npos);
  CHECK(table.out.find("60") != std::string::npos);
  auto plot = run("report --in " + csv.string() + " --format plotdata");
  CHECK(plot.exit_code == 0);
  CHECK(plot.out.find("# toy") != std::string::npos);
}

TEST_CASE("exit codes distinguish io, parse and usage failures") {
  const auto dir = work_dir();
  // missing input file -> io error
  auto io = run("build --annotations " + (dir / "nope.jsonl").string() +
                " --out " + (dir / "x.jsonl").string());
  CHECK(io.exit_code == 2);

  // malformed annotation line -> parse error
  const auto bad = dir / "bad.jsonl";
  atomic_write_file(bad, "{broken\n");
  auto parse = run("build --annotations " + bad.string() + " --out " +
                   (dir / "y.jsonl").string());
  CHECK(parse.exit_code == 1);

  // unknown subcommand -> CLI11 usage failure, nonzero
  CHECK(run("frobnicate").exit_code != 0);
  // missing required option
  CHECK(run("eval").exit_code != 0);
}
