// Copyright 2026 The PULI Authors. All Rights Reserved.
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

// Command-line entry point: forge, train, eval, stream, judge, stats.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "puli/config.hpp"
#include "puli/corpus.hpp"
#include "puli/error.hpp"
#include "puli/forge.hpp"
#include "puli/gateway.hpp"
#include "puli/memory.hpp"
#include "puli/prompt.hpp"
#include "puli/remote.hpp"
#include "puli/runtime.hpp"
#include "puli/trainloop.hpp"

namespace fs = std::filesystem;
using namespace puli;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Run seed (overrides the config)");
  cmd->add_option("--config", common.config, "Config file (INI)");
  cmd->add_option("--out", common.out, "Output path");
}

RunConfig resolve_config(const Common& common, const fs::path& fallback = {}) {
  RunConfig config;
  if (!common.config.empty()) {
    config = load_config(common.config);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    config = load_config(fallback);
  }
  if (common.seed) config.seed = *common.seed;
  config.apply_seed();
  return config;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trim_text(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

// Manifests sit next to file outputs and inside directory outputs.
fs::path manifest_for(const fs::path& out, bool is_dir) {
  if (is_dir) return out / "manifest.ini";
  return fs::path(out.string() + ".manifest.ini");
}

std::unique_ptr<GatewayClient> make_client(const RunConfig& config) {
  return std::make_unique<GatewayClient>(config.gateway, std::make_shared<HttpTransport>());
}

PromptTemplate prompt(const RunConfig& config, const std::string& name) {
  return PromptTemplate::load(config.prompts_path() / (name + ".txt"));
}

std::string percent(double x) { return fmt::format("{:.1f}", 100.0 * x); }

// --- forge -----------------------------------------------------------------

int run_forge_synth(const RunConfig& config, const fs::path& out, const std::string& command) {
  const auto corpus = synth_corpus(config.synth);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_corpus(corpus, out);
  write_manifest(manifest_for(out, false), config, command, {});
  std::cout << format_stats(corpus_stats(corpus, config.train.k_unlabeled));
  return 0;
}

int run_forge_llm(const RunConfig& config, const fs::path& papers_dir, const fs::path& out,
                  const std::string& command) {
  if (!fs::is_directory(papers_dir)) {
    throw InvalidArgument(fmt::format("papers directory {} not found", papers_dir.string()));
  }
  // <id>.txt is a paper; an optional <id>.conclusion.txt holds its golden conclusion.
  std::vector<PaperText> papers;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(papers_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && entry.path().extension() == ".txt" &&
        name.find(".conclusion.") == std::string::npos) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    PaperText paper{f.stem().string(), read_file(f), std::nullopt};
    const auto golden = f.parent_path() / (f.stem().string() + ".conclusion.txt");
    if (fs::exists(golden)) paper.golden_conclusion = trim_text(read_file(golden));
    papers.push_back(std::move(paper));
  }
  if (papers.empty()) throw InvalidArgument("no papers (*.txt) found");

  const auto prompts = ForgePrompts::load(config.prompts_path());
  auto client = make_client(config);
  const auto corpus = llm_forge(papers, prompts, *client, config.forge);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_corpus(corpus, out);
  write_manifest(manifest_for(out, false), config, command,
                 {{"papers", papers_dir}, {"prompts", config.prompts_path()}});
  std::cout << format_stats(corpus_stats(corpus, config.train.k_unlabeled));
  return 0;
}

// --- train -----------------------------------------------------------------

std::string few_shot_examples(const Corpus& corpus, const MemoryBuilder& builder, std::size_t n) {
  std::string out;
  std::size_t used = 0;
  for (std::size_t d = 0; d < corpus.dialogues().size() && used < n; ++d) {
    const auto& dialogue = corpus.dialogues()[d];
    if (dialogue.split != Split::kTrain) continue;
    for (auto t : dialogue.steps_with(LabelKind::kPositive)) {
      const auto& content = dialogue.rounds[t].label.intervention->content;
      out += fmt::format("Example {}:\n{}\nIntervention Content: {}\n\n", used + 1,
                         render(builder.memory({d, t})), content);
      ++used;
      break;
    }
  }
  return out;
}

void print_epoch(const EpochReport& r) {
  std::cout << fmt::format("epoch {:>3}  |P+|={:<5} |N|={:<5} z={:.4f} l={:.4f} r_total={:+.4f}\n",
                           r.epoch, r.selected.size(), r.silent.size(), r.z, r.l, r.r_total);
}

int run_train(const RunConfig& config, const fs::path& corpus_path, const fs::path& out,
              const std::string& command) {
  const auto corpus = load_corpus(corpus_path);
  fs::create_directories(out);
  validate(config.train);
  write_manifest(manifest_for(out, true), config, command, {{"corpus", corpus_path}});

  if (!config.train.lambda_sweep.empty()) {
    std::cout << fmt::format("{:>8} {:>10} {:>10} {:>10} {:>10}\n", "lambda", "final_z", "final_l",
                             "best_z", "best_l");
    for (const auto& p : lambda_sweep(corpus, config.train, out)) {
      std::cout << fmt::format("{:>8.2f} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f}\n", p.lambda,
                               p.final_z, p.final_l, p.best_z, p.best_l);
    }
    return 0;
  }

  if (config.train.backend == BackendKind::kSurrogate) {
    const auto artifacts = train(corpus, config.train, out, print_epoch);
    std::cout << fmt::format("pretrain z0={:.4f} l0={:.4f}; artifacts in {}\n", artifacts.z0,
                             artifacts.l0, out.string());
    return 0;
  }

  auto client = make_client(config);
  LlmSummarizer summarizer(*client, prompt(config, "summarizer"), config.train.max_summary_tokens);
  ExtractiveSummarizer example_summarizer(config.train.max_summary_tokens);
  MemoryBuilder example_builder(corpus, example_summarizer);
  auto observer = std::make_unique<RemoteObserver>(*client, prompt(config, "icl_baseline"),
                                                   few_shot_examples(corpus, example_builder, 3),
                                                   config.train.dims.observer_dim);
  auto presenter = std::make_unique<RemotePresenter>(*client, prompt(config, "presenter"),
                                                     config.train.dims.presenter_dim);
  Trainer trainer(corpus, config.train, std::move(observer), std::move(presenter), summarizer);
  const auto artifacts = train(trainer, out, print_epoch);
  std::cout << fmt::format("pretrain z0={:.4f} l0={:.4f}; artifacts in {}\n", artifacts.z0,
                           artifacts.l0, out.string());
  return 0;
}

// --- eval ------------------------------------------------------------------

void print_table(const std::vector<std::pair<std::string, EvalReport>>& rows,
                 const std::vector<std::pair<std::string, std::pair<double, double>>>& content_rows) {
  std::cout << fmt::format("{:<22}| {:^39} | {:^17}\n", "", "Timing", "Content");
  std::cout << fmt::format("{:<22}| {:>9}{:>9}{:>11}{:>9}  | {:>8}{:>8}\n", "Method", "Accuracy",
                           "Recall", "Precision", "F1", "ROUGE-1", "BLEU-1");
  std::cout << std::string(22, '-') << "+" << std::string(41, '-') << "+" << std::string(18, '-')
            << "\n";
  for (const auto& [name, r] : rows) {
    std::cout << fmt::format("{:<22}| {:>9}{:>9}{:>11}{:>9}  | {:>8}{:>8}\n", name,
                             percent(r.timing.accuracy), percent(r.timing.recall),
                             percent(r.timing.precision), percent(r.timing.f1), percent(r.rouge1),
                             percent(r.bleu1));
  }
  for (const auto& [name, scores] : content_rows) {
    std::cout << fmt::format("{:<22}| {:>9}{:>9}{:>11}{:>9}  | {:>8}{:>8}\n", name, "-", "-", "-",
                             "-", percent(scores.first), percent(scores.second));
  }
}

int run_eval(const RunConfig& config, const fs::path& corpus_path, const fs::path& artifacts_dir,
             const std::string& split_name, bool conclusions, const fs::path& out,
             const std::string& command) {
  const auto corpus = load_corpus(corpus_path);
  const auto split = parse_split(split_name);
  auto art = load_artifacts(artifacts_dir);
  ExtractiveSummarizer summarizer(config.train.max_summary_tokens);
  const auto report = evaluate(corpus, split, art.observer, art.presenter, summarizer);

  // The never-intervene baseline has nothing to say, so its content columns stay empty.
  EvalReport standard = report;
  {
    std::vector<int> preds(report.positives + report.negatives, 0);
    std::vector<int> labels(report.positives, 1);
    labels.resize(preds.size(), 0);
    standard.timing = classify_metrics(preds, labels);
    standard.rouge1 = standard.bleu1 = 0.0;
  }

  std::vector<std::pair<std::string, std::pair<double, double>>> content_rows;
  if (conclusions) {
    auto client = make_client(config);
    const auto conclude_prompt = prompt(config, "conclusion");
    double r_plain = 0, b_plain = 0, r_aug = 0, b_aug = 0;
    std::size_t n = 0;
    for (const auto& dialogue : corpus.dialogues()) {
      if (dialogue.split != split) continue;
      const auto& proposal = corpus.proposal_of(dialogue);
      if (!proposal.golden_conclusion) continue;
      const auto plain = regenerate_conclusion(*client, conclude_prompt, proposal, dialogue.rounds);
      const auto result = replay(proposal, dialogue, art.observer, art.presenter, summarizer,
                                 [&](const ProjectProposal& p, std::span<const DialogueRound> tr) {
                                   return regenerate_conclusion(*client, conclude_prompt, p, tr);
                                 });
      r_plain += rouge1(plain, *proposal.golden_conclusion);
      b_plain += bleu1(plain, *proposal.golden_conclusion);
      r_aug += result.rouge1.value_or(0.0);
      b_aug += result.bleu1.value_or(0.0);
      ++n;
    }
    if (n == 0) throw InvalidArgument("no dialogues with a golden conclusion in this split");
    const auto k = static_cast<double>(n);
    content_rows.push_back({"Standard (conclusion)", {r_plain / k, b_plain / k}});
    content_rows.push_back({"PULI (conclusion)", {r_aug / k, b_aug / k}});
  }

  std::cout << fmt::format("split={} positives={} negatives={}\n", to_string(split),
                           report.positives, report.negatives);
  print_table({{"Standard", standard}, {"PULI", report}}, content_rows);
  std::cout << fmt::format("accuracy={:.17g} rouge1={:.17g}\n", report.timing.accuracy,
                           report.rouge1);

  const fs::path manifest =
      out.empty() ? artifacts_dir / "eval.manifest.ini" : manifest_for(out, true);
  if (!out.empty()) fs::create_directories(out);
  write_manifest(manifest, config, command, {{"corpus", corpus_path}, {"artifacts", artifacts_dir}});
  return 0;
}

// --- stream ----------------------------------------------------------------

int run_stream(const RunConfig& config, const fs::path& dialogue_path, const std::string& id,
               const fs::path& artifacts_dir, bool conclude, bool timings, const fs::path& out,
               const std::string& command) {
  const auto corpus = load_corpus(dialogue_path);
  if (corpus.dialogues().empty()) throw InvalidArgument("the dialogue file holds no dialogue");
  std::size_t index = 0;
  if (!id.empty()) {
    const auto found = corpus.find_dialogue(id);
    if (!found) throw InvalidArgument(fmt::format("dialogue {} not found", id));
    index = *found;
  }
  const auto& dialogue = corpus.dialogues()[index];
  const auto& proposal = corpus.proposal_of(dialogue);
  auto art = load_artifacts(artifacts_dir);
  ExtractiveSummarizer summarizer(config.train.max_summary_tokens);

  std::unique_ptr<GatewayClient> client;
  Concluder concluder;
  PromptTemplate conclude_prompt;
  if (conclude) {
    client = make_client(config);
    conclude_prompt = prompt(config, "conclusion");
    concluder = [&](const ProjectProposal& p, std::span<const DialogueRound> transcript) {
      return regenerate_conclusion(*client, conclude_prompt, p, transcript);
    };
  }
  const auto result = replay(proposal, dialogue, art.observer, art.presenter, summarizer, concluder);

  std::ofstream file;
  if (!out.empty()) {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    file.open(out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(fmt::format("cannot write {}", out.string()));
  }
  std::ostream& sink = out.empty() ? std::cout : file;
  // Latencies vary run to run; they stay out of the transcript unless asked for.
  for (const auto& event : result.events) {
    if (event.kind == EventKind::kLatency && !timings) continue;
    sink << event.to_jsonl() << '\n';
  }
  sink.flush();
  if (!out.empty()) {
    write_manifest(manifest_for(out, false), config, command,
                   {{"dialogue", dialogue_path}, {"artifacts", artifacts_dir}});
  }
  return 0;
}

// --- judge -----------------------------------------------------------------

std::map<std::string, std::string> read_candidates(const fs::path& dir, const std::string& id) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (id.empty()) {
      if (entry.is_regular_file()) out[entry.path().stem().string()] = read_file(entry.path());
    } else if (entry.is_directory()) {
      const auto file = entry.path() / (id + ".txt");
      if (fs::exists(file)) out[entry.path().filename().string()] = read_file(file);
    }
  }
  return out;
}

int run_judge(const RunConfig& config, const fs::path& golden, const fs::path& candidates,
              const fs::path& out, const std::string& command) {
  auto client = make_client(config);
  const auto judge_prompt = prompt(config, "judge");
  JudgeTally tally;

  // A single golden file pairs with <dir>/<method>.txt; a golden directory of
  // <id>.txt files pairs with <dir>/<method>/<id>.txt.
  std::vector<std::pair<std::string, fs::path>> items;
  if (fs::is_directory(golden)) {
    for (const auto& entry : fs::directory_iterator(golden)) {
      if (entry.is_regular_file()) items.emplace_back(entry.path().stem().string(), entry.path());
    }
    std::sort(items.begin(), items.end());
  } else {
    items.emplace_back("", golden);
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& [id, path] = items[i];
    const auto cands = read_candidates(candidates, id);
    for (const auto& [method, text] : cands) tally.add_method(method);
    const auto verdict =
        judge(*client, judge_prompt, read_file(path), cands, Rng::derive(config.seed, i));
    tally.record(verdict);
    std::cout << fmt::format("{}: {}\n", id.empty() ? path.filename().string() : id,
                             verdict.winner.value_or("abstain"));
  }
  std::cout << fmt::format("decided={} abstained={}\n", tally.decided(), tally.abstentions());
  if (tally.decided() > 0) {
    for (const auto& [method, rate] : tally.win_rates()) {
      std::cout << fmt::format("{:<20} {:>6}%\n", method, percent(rate));
    }
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_manifest(manifest_for(out, true), config, command,
                   {{"golden", golden}, {"candidates", candidates}});
  }
  return 0;
}

std::string join_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("puli"));
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("PULI_LOG")) spdlog::set_level(spdlog::level::from_str(level));

  CLI::App app{"PULI: proactive intervention from positive-unlabeled dialogue data"};
  app.require_subcommand(1);

  Common common;
  std::string corpus_path, artifacts, split = "test", papers, dialogue, dialogue_id, golden,
                                      candidates;
  std::string lambdas;
  bool conclude = false, timings = false, conclusions = false;

  auto* forge = app.add_subcommand("forge", "Build a corpus");
  forge->require_subcommand(1);
  auto* synth = forge->add_subcommand("synth", "Synthetic corpus with planted drift");
  add_common(synth, common);
  auto* llm = forge->add_subcommand("llm", "Role-play corpus forged from papers via the gateway");
  add_common(llm, common);
  llm->add_option("--papers", papers, "Directory of <id>.txt papers")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the coordinator, observer and presenter");
  add_common(train_cmd, common);
  train_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  train_cmd->add_option("--lambdas", lambdas, "Comma-separated lambda sweep");

  auto* eval_cmd = app.add_subcommand("eval", "Score trained artifacts on a held-out split");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  eval_cmd->add_option("--artifacts", artifacts, "Training output directory")->required();
  eval_cmd->add_option("--split", split, "validation or test");
  eval_cmd->add_flag("--conclusions", conclusions,
                     "Also score regenerated conclusions against golden ones (gateway)");

  auto* stream_cmd = app.add_subcommand("stream", "Replay a dialogue through the live session");
  add_common(stream_cmd, common);
  stream_cmd->add_option("--dialogue", dialogue, "Corpus JSONL holding the dialogue")->required();
  stream_cmd->add_option("--id", dialogue_id, "Dialogue id (default: the first)");
  stream_cmd->add_option("--artifacts", artifacts, "Training output directory")->required();
  stream_cmd->add_flag("--conclude", conclude, "Generate a conclusion at the end (gateway)");
  stream_cmd->add_flag("--timings", timings, "Include latency events");

  auto* judge_cmd = app.add_subcommand("judge", "Pick the best candidate per golden conclusion");
  add_common(judge_cmd, common);
  judge_cmd->add_option("--golden", golden, "Golden conclusion file or directory")->required();
  judge_cmd->add_option("--candidates", candidates, "Candidate directory")->required();

  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  add_common(stats_cmd, common);
  stats_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "puli: error: " << e.what() << '\n';
    return 2;
  }

  const auto command = join_argv(argc, argv);
  try {
    if (synth->parsed()) {
      if (common.out.empty()) throw InvalidArgument("--out is required");
      return run_forge_synth(resolve_config(common), common.out, command);
    }
    if (llm->parsed()) {
      if (common.out.empty()) throw InvalidArgument("--out is required");
      return run_forge_llm(resolve_config(common), papers, common.out, command);
    }
    if (train_cmd->parsed()) {
      if (common.out.empty()) throw InvalidArgument("--out is required");
      auto config = resolve_config(common);
      if (!lambdas.empty()) {
        std::istringstream in(lambdas);
        std::string item;
        config.train.lambda_sweep.clear();
        while (std::getline(in, item, ',')) config.train.lambda_sweep.push_back(std::stod(item));
      }
      return run_train(config, corpus_path, common.out, command);
    }
    if (eval_cmd->parsed()) {
      return run_eval(resolve_config(common, fs::path(artifacts) / "manifest.ini"), corpus_path,
                      artifacts, split, conclusions, common.out, command);
    }
    if (stream_cmd->parsed()) {
      return run_stream(resolve_config(common, fs::path(artifacts) / "manifest.ini"), dialogue,
                        dialogue_id, artifacts, conclude, timings, common.out, command);
    }
    if (judge_cmd->parsed()) {
      return run_judge(resolve_config(common), golden, candidates, common.out, command);
    }
    if (stats_cmd->parsed()) {
      const auto config = resolve_config(common);
      const auto corpus = load_corpus(corpus_path);
      std::cout << format_stats(corpus_stats(corpus, config.train.k_unlabeled));
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        write_manifest(manifest_for(common.out, true), config, command, {{"corpus", corpus_path}});
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "puli: error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
