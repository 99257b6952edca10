// Copyright 2026 The OHD Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line surface: build benchmarks, fine-tune the toy encoder,
// evaluate selection accuracy, compute CHAIR/POPE metrics, format reports.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ohd/corpus.hpp"
#include "ohd/countergen.hpp"
#include "ohd/encoder.hpp"
#include "ohd/errors.hpp"
#include "ohd/evalhall.hpp"
#include "ohd/ioutil.hpp"
#include "ohd/objective.hpp"
#include "ohd/report.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kToolVersion = ohd::kGeneratorVersion;

// Stamp carried by every JSON output file.
ordered_json provenance(std::int64_t seed, const std::string& config_repr) {
  ordered_json j;
  j["seed"] = seed;
  j["version"] = kToolVersion;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(ohd::fnv1a(config_repr)));
  j["config_hash"] = buf;
  return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  ohd::atomic_write_file(path, j.dump(2) + "\n");
}

ordered_json selection_report_json(const ohd::SelectionReport& r) {
  ordered_json j;
  j["accuracy"] = r.accuracy;
  j["n"] = r.n;
  j["wins"] = r.wins;
  j["ties"] = r.ties;
  ordered_json confusion;
  for (const auto& [kind, count] : r.confusion) {
    confusion[ohd::to_string(kind)] = count;
  }
  j["confusion"] = std::move(confusion);
  return j;
}

// Loss-config resolution: config file overrides defaults, flags override the
// config file. CLI11's count() tells us whether a flag was given.
struct LossFlags {
  double tau1, tau2, lambda1, lambda2, learning_rate;
  int epochs, batch_size, negatives_per_image;
  bool freeze_logit_scale = false;
  std::uint64_t seed;
};

void add_loss_flags(CLI::App* cmd, LossFlags& f) {
  cmd->add_option("--tau1", f.tau1, "positive-vs-negative margin");
  cmd->add_option("--tau2", f.tau2, "enhanced-vs-in-batch margin");
  cmd->add_option("--lambda1", f.lambda1, "weight of the L1 margin loss");
  cmd->add_option("--lambda2", f.lambda2, "weight of the L2 margin loss");
  cmd->add_option("--lr", f.learning_rate, "SGD learning rate");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
  cmd->add_option("--negatives-per-image", f.negatives_per_image,
                  "enhanced negatives per image (-1 = all)");
  cmd->add_flag("--freeze-logit-scale", f.freeze_logit_scale,
                "do not update the logit scale during training");
  cmd->add_option("--seed", f.seed, "training seed");
}

ohd::LossConfig resolve_loss_config(const CLI::App* cmd, const LossFlags& f,
                                    const std::string& config_path) {
  ohd::LossConfig cfg;
  if (!config_path.empty()) {
    const auto j = ordered_json::parse(ohd::read_file(config_path));
    cfg.tau1 = j.value("tau1", cfg.tau1);
    cfg.tau2 = j.value("tau2", cfg.tau2);
    cfg.lambda1 = j.value("lambda1", cfg.lambda1);
    cfg.lambda2 = j.value("lambda2", cfg.lambda2);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.negatives_per_image =
        j.value("negatives_per_image", cfg.negatives_per_image);
    cfg.learn_logit_scale = j.value("learn_logit_scale", cfg.learn_logit_scale);
    cfg.seed = j.value("seed", cfg.seed);
  }
  auto given = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (given("--tau1")) cfg.tau1 = f.tau1;
  if (given("--tau2")) cfg.tau2 = f.tau2;
  if (given("--lambda1")) cfg.lambda1 = f.lambda1;
  if (given("--lambda2")) cfg.lambda2 = f.lambda2;
  if (given("--lr")) cfg.learning_rate = f.learning_rate;
  if (given("--epochs")) cfg.epochs = f.epochs;
  if (given("--batch-size")) cfg.batch_size = f.batch_size;
  if (given("--negatives-per-image")) {
    cfg.negatives_per_image = f.negatives_per_image;
  }
  if (given("--freeze-logit-scale")) cfg.learn_logit_scale = false;
  if (given("--seed")) cfg.seed = f.seed;
  cfg.validate();
  return cfg;
}

std::string loss_config_repr(const ohd::LossConfig& cfg) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "tau1=%g tau2=%g l1=%g l2=%g lr=%g ep=%d bs=%d npi=%d ls=%d "
                "seed=%llu",
                cfg.tau1, cfg.tau2, cfg.lambda1, cfg.lambda2,
                cfg.learning_rate, cfg.epochs, cfg.batch_size,
                cfg.negatives_per_image, cfg.learn_logit_scale ? 1 : 0,
                static_cast<unsigned long long>(cfg.seed));
  return buf;
}

// (image_id, text) per line, tab-separated.
std::vector<std::pair<std::string, std::string>> load_captions(
    const std::filesystem::path& path) {
  std::istringstream in(ohd::read_file(path));
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ohd::ParseError(path.string() + ":" + std::to_string(lineno) +
                            ": expected image_id<TAB>caption");
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

// surface<TAB>canonical per line.
ohd::Lexicon load_lexicon(const std::filesystem::path& path) {
  std::istringstream in(ohd::read_file(path));
  ohd::Lexicon lexicon;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ohd::ParseError(path.string() + ":" + std::to_string(lineno) +
                            ": expected surface<TAB>canonical");
    }
    lexicon[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return lexicon;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"object-hallucination benchmark toolkit"};
  app.require_subcommand(1);

  // ---- build ----
  auto* build = app.add_subcommand("build", "generate a benchmark from annotations");
  std::string b_annotations, b_out, b_llm = "template", b_name = "benchmark";
  std::string b_source = "", b_endpoint, b_model = "gpt-4";
  std::int64_t b_seed = 0;
  int b_jobs = 1;
  build->add_option("--annotations", b_annotations)->required();
  build->add_option("--out", b_out)->required();
  build->add_option("--llm", b_llm)->check(CLI::IsMember({"template", "api"}));
  build->add_option("--seed", b_seed);
  build->add_option("--name", b_name);
  build->add_option("--source-corpus", b_source);
  build->add_option("--jobs", b_jobs);
  build->add_option("--endpoint", b_endpoint, "llm endpoint (api mode)");
  build->add_option("--model-id", b_model);

  // ---- train ----
  auto* train = app.add_subcommand("train", "fine-tune the toy encoder");
  std::string t_benchmark, t_annotations, t_params_in, t_params_out, t_log;
  std::string t_config, t_dev_benchmark;
  std::size_t t_vocab = 4096, t_dim = 32;
  std::uint64_t t_init_seed = 0;
  LossFlags t_flags{};
  train->add_option("--benchmark", t_benchmark)->required();
  train->add_option("--annotations", t_annotations)->required();
  train->add_option("--params-in", t_params_in);
  train->add_option("--params-out", t_params_out)->required();
  train->add_option("--log", t_log, "per-epoch loss log file");
  train->add_option("--config", t_config, "loss config JSON file");
  train->add_option("--dev-benchmark", t_dev_benchmark);
  train->add_option("--vocab-hash-size", t_vocab);
  train->add_option("--embed-dim", t_dim);
  train->add_option("--init-seed", t_init_seed);
  add_loss_flags(train, t_flags);

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "selection accuracy of an encoder");
  std::string e_benchmark, e_annotations, e_encoder = "toy", e_params, e_report;
  eval->add_option("--benchmark", e_benchmark)->required();
  eval->add_option("--annotations", e_annotations)->required();
  eval->add_option("--encoder", e_encoder)->check(CLI::IsMember({"toy"}));
  eval->add_option("--params", e_params)->required();
  eval->add_option("--report", e_report, "selection report JSON output");

  // ---- metrics ----
  auto* metrics = app.add_subcommand("metrics", "hallucination metrics");
  metrics->require_subcommand(1);

  auto* chair_cmd = metrics->add_subcommand("chair", "CHAIR / Cover metrics");
  std::string c_captions, c_gold, c_lexicon, c_out, c_formula = "textual";
  chair_cmd->add_option("--captions", c_captions)->required();
  chair_cmd->add_option("--gold", c_gold)->required();
  chair_cmd->add_option("--lexicon", c_lexicon);
  chair_cmd->add_option("--cover-formula", c_formula)
      ->check(CLI::IsMember({"textual", "paper"}));
  chair_cmd->add_option("--out", c_out);

  auto* pope_cmd = metrics->add_subcommand("pope", "POPE-style yes/no probing");
  std::string p_annotations, p_questions, p_questions_out, p_answers, p_out;
  std::string p_sampler = "random";
  std::size_t p_per_image = 6;
  std::uint64_t p_seed = 0;
  pope_cmd->add_option("--annotations", p_annotations,
                       "build questions from this annotation file");
  pope_cmd->add_option("--per-image", p_per_image);
  pope_cmd->add_option("--sampler", p_sampler)
      ->check(CLI::IsMember({"random", "popular", "adversarial"}));
  pope_cmd->add_option("--seed", p_seed);
  pope_cmd->add_option("--questions-out", p_questions_out);
  pope_cmd->add_option("--questions", p_questions, "existing question file");
  pope_cmd->add_option("--answers", p_answers, "one yes/no per line");
  pope_cmd->add_option("--out", p_out);

  auto* select_cmd = metrics->add_subcommand("select", "selection report");
  std::string s_benchmark, s_annotations, s_params, s_out;
  select_cmd->add_option("--benchmark", s_benchmark)->required();
  select_cmd->add_option("--annotations", s_annotations)->required();
  select_cmd->add_option("--params", s_params)->required();
  select_cmd->add_option("--out", s_out);

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "format result tables");
  std::string r_in, r_format = "table", r_out;
  report_cmd->add_option("--in", r_in, "result csv")->required();
  report_cmd->add_option("--format", r_format)
      ->check(CLI::IsMember({"table", "csv", "plotdata"}));
  report_cmd->add_option("--out", r_out);

  CLI11_PARSE(app, argc, argv);

  if (*build) {
    const auto records = ohd::load_annotations(b_annotations);
    std::unique_ptr<ohd::LlmClient> client;
    ohd::GeneratorOptions options;
    if (b_llm == "api") {
      if (b_endpoint.empty()) {
        throw ohd::ValidationError("--endpoint is required with --llm api");
      }
      client = ohd::make_http_llm_client({b_endpoint, b_model});
      options.client = client.get();
    }
    if (b_source.empty()) b_source = b_annotations;
    const auto set = ohd::generate_benchmark(records, b_name, b_seed, options,
                                             b_source, b_jobs);
    ohd::persist_benchmark(set, b_out);
    std::cerr << "wrote " << set.samples.size() << " samples to " << b_out
              << "\n";
    return 0;
  }

  if (*train) {
    const auto cfg = resolve_loss_config(train, t_flags, t_config);
    const auto records = ohd::load_annotations(t_annotations);
    const auto set = ohd::load_benchmark(t_benchmark);
    ohd::ToyEncoderParams params =
        t_params_in.empty()
            ? ohd::ToyEncoderParams::random_init(t_vocab, t_dim, t_init_seed)
            : ohd::load_params(t_params_in);
    ohd::TrainOptions options;
    std::optional<ohd::BenchmarkSet> dev_set;
    if (!t_dev_benchmark.empty()) {
      dev_set = ohd::load_benchmark(t_dev_benchmark);
      options.dev_eval = [&](const ohd::ToyEncoderParams& p) {
        return ohd::benchmark_accuracy(*dev_set, records, ohd::ToyEncoder(p))
            .accuracy;
      };
    }
    const auto result = ohd::train(records, set, params, cfg, options);
    ohd::save_params(params, t_params_out);
    if (!t_log.empty()) {
      std::string log = provenance(static_cast<std::int64_t>(cfg.seed),
                                   loss_config_repr(cfg))
                            .dump() +
                        "\n" + ohd::loss_log_to_string(result);
      ohd::atomic_write_file(t_log, log);
    }
    std::cerr << "trained " << result.steps_run << " steps over "
              << result.log.size() << " epochs\n";
    return 0;
  }

  if (*eval || *select_cmd) {
    const bool is_eval = static_cast<bool>(*eval);
    const auto records =
        ohd::load_annotations(is_eval ? e_annotations : s_annotations);
    const auto set = ohd::load_benchmark(is_eval ? e_benchmark : s_benchmark);
    const auto params = ohd::load_params(is_eval ? e_params : s_params);
    const auto report =
        ohd::benchmark_accuracy(set, records, ohd::ToyEncoder(params));
    ordered_json j = provenance(set.seed, "eval " + set.name);
    j["report"] = selection_report_json(report);
    const std::string& out = is_eval ? e_report : s_out;
    if (!out.empty()) write_json(out, j);
    ohd::ResultTable table;
    table.row_names = {"toy"};
    table.col_names = {set.name};
    table.values = {{report.accuracy * 100.0}};
    std::cout << ohd::format_table(table);
    return 0;
  }

  if (*chair_cmd) {
    const auto captions = load_captions(c_captions);
    const auto gold_records = ohd::load_annotations(c_gold);
    std::map<std::string, std::set<std::string>> gold;
    for (const auto& rec : gold_records) {
      auto& objs = gold[rec.image_id];
      for (const auto& o : rec.objects) objs.insert(o.name);
    }
    const ohd::Lexicon lexicon =
        c_lexicon.empty() ? ohd::default_lexicon() : load_lexicon(c_lexicon);
    const auto report =
        ohd::chair(captions, gold, lexicon,
                   c_formula == "paper" ? ohd::CoverFormula::paper
                                        : ohd::CoverFormula::textual);
    ordered_json j = provenance(0, "chair " + c_formula);
    ordered_json r;
    r["c_s"] = report.c_s;
    r["c_i"] = report.c_i;
    r["cover"] = report.cover;
    r["hallucinated_mentions"] = report.hallucinated_mentions;
    r["total_mentions"] = report.total_mentions;
    r["captions_with_hallucination"] = report.captions_with_hallucination;
    r["total_captions"] = report.total_captions;
    r["covered_gt"] = report.covered_gt;
    r["total_gt"] = report.total_gt;
    j["report"] = std::move(r);
    if (!c_out.empty()) write_json(c_out, j);
    std::cout << "CHAIR_S " << report.c_s << "  CHAIR_I " << report.c_i
              << "  Cover " << report.cover << "\n";
    return 0;
  }

  if (*pope_cmd) {
    std::vector<ohd::PopeQuestion> questions;
    if (!p_annotations.empty()) {
      const auto records = ohd::load_annotations(p_annotations);
      const auto freq = ohd::build_frequency_table(records);
      const auto cooc = ohd::build_cooccurrence_table(records);
      ohd::Rng rng(p_seed);
      const ohd::NegativeKind sampler =
          p_sampler == "popular"      ? ohd::NegativeKind::insert_popular
          : p_sampler == "adversarial" ? ohd::NegativeKind::insert_adversarial
                                       : ohd::NegativeKind::insert_random;
      auto built =
          ohd::build_pope_questions(records, p_per_image, sampler, freq, cooc, rng);
      if (built.skipped_images > 0) {
        std::cerr << "skipped " << built.skipped_images
                  << " images with too few objects\n";
      }
      questions = std::move(built.questions);
      if (!p_questions_out.empty()) {
        std::string out;
        for (const auto& q : questions) {
          ordered_json jq;
          jq["image_id"] = q.image_id;
          jq["object"] = q.object;
          jq["label"] = q.label_yes ? "yes" : "no";
          jq["text"] = q.text;
          out += jq.dump();
          out += '\n';
        }
        ohd::atomic_write_file(p_questions_out, out);
      }
    } else if (!p_questions.empty()) {
      std::istringstream in(ohd::read_file(p_questions));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto jq = ordered_json::parse(line);
        ohd::PopeQuestion q;
        q.image_id = jq.at("image_id").get<std::string>();
        q.object = jq.at("object").get<std::string>();
        q.label_yes = jq.at("label").get<std::string>() == "yes";
        q.text = jq.value("text", "Is there a " + q.object + " in the image?");
        questions.push_back(std::move(q));
      }
    } else {
      throw ohd::ValidationError("pope needs --annotations or --questions");
    }
    if (!p_answers.empty()) {
      std::istringstream in(ohd::read_file(p_answers));
      std::vector<char> answers;  // span<const bool> needs contiguous storage
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line != "yes" && line != "no") {
          throw ohd::ParseError("answer lines must be yes or no, got: " + line);
        }
        answers.push_back(line == "yes" ? 1 : 0);
      }
      std::unique_ptr<bool[]> buf(new bool[answers.size()]);
      for (std::size_t i = 0; i < answers.size(); ++i) buf[i] = answers[i] != 0;
      const auto report = ohd::pope_metrics(
          questions, std::span<const bool>(buf.get(), answers.size()));
      ordered_json j = provenance(static_cast<std::int64_t>(p_seed),
                                  "pope " + p_sampler);
      ordered_json r;
      r["accuracy"] = report.accuracy;
      r["precision"] = report.precision;
      r["recall"] = report.recall;
      r["f1"] = report.f1;
      r["yes_ratio"] = report.yes_ratio;
      r["n"] = report.n;
      j["report"] = std::move(r);
      if (!p_out.empty()) write_json(p_out, j);
      std::cout << "accuracy " << report.accuracy << "  f1 " << report.f1
                << "  yes_ratio " << report.yes_ratio << "\n";
    }
    return 0;
  }

  if (*report_cmd) {
    const auto table = ohd::result_table_from_csv(ohd::read_file(r_in));
    std::string rendered;
    switch (ohd::report_format_from_string(r_format)) {
      case ohd::ReportFormat::table:
        rendered = ohd::format_table(table);
        break;
      case ohd::ReportFormat::csv:
        rendered = ohd::format_csv(table);
        break;
      case ohd::ReportFormat::plotdata: {
        std::vector<ohd::Series> series;
        for (std::size_t r = 0; r < table.row_names.size(); ++r) {
          ohd::Series s;
          s.name = table.row_names[r];
          for (std::size_t c = 0; c < table.col_names.size(); ++c) {
            s.points.emplace_back(static_cast<double>(c), table.values[r][c]);
          }
          series.push_back(std::move(s));
        }
        rendered = ohd::format_plotdata(series);
        break;
      }
    }
    if (!r_out.empty()) {
      ohd::atomic_write_file(r_out, rendered);
    } else {
      std::cout << rendered;
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ohd::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const ohd::GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return 3;
  } catch (const ohd::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const ohd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
