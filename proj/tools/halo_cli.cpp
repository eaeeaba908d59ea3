// Command-line driver: caption / mitigate / eval-* / probe / robustness /
// sweep / report over the mock backend or a registered adapter.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "halo/halo.hpp"

namespace {

using namespace halo;

struct CliOptions {
  double alpha = 1.0;  // mock-scale default; hosted models sit nearer 0.1
  double beta = 1.0;
  int layer = 3;
  std::string strategy = "fixed";
  double strategy_lo = 0.8;
  double strategy_hi = 1.2;
  int best_of = 1;
  int avg_of = 1;
  bool tied = true;
  std::string ablation = "both";
  std::string backend = "mock";
  std::uint64_t seed = 0;
  std::string out;
  std::string annotations;
  std::string synonyms;
  std::string prompt = default_caption_prompt();
  std::string recon_source = "caption";
  bool per_sentence = false;
  bool resume = false;
  bool wall_clock = false;
  // mock world
  int samples = 200;
  int vocab_size = 12;
  double noise_std = 0.0;
  double hallucination_rate = 0.5;
  double threshold = 0.2;
  bool orthonormal = false;
  int dim = 32;
  int image_tokens = 8;
  int num_layers = 8;
  // pope / mme
  std::string questions;
  std::string pope_setting = "all";
  std::vector<std::string> mme_files;
};

void add_run_options(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--alpha", opt.alpha, "positive-anchor coefficient");
  cmd->add_option("--beta", opt.beta, "negative-anchor coefficient");
  cmd->add_option("--layer", opt.layer, "1-based decoder layer to edit");
  cmd->add_option("--strategy", opt.strategy, "fixed|uniform|gaussian")
      ->check(CLI::IsMember({"fixed", "uniform", "gaussian"}));
  cmd->add_option("--strategy-lo", opt.strategy_lo, "sampling range lower bound");
  cmd->add_option("--strategy-hi", opt.strategy_hi, "sampling range upper bound");
  cmd->add_option("--best-of", opt.best_of, "candidate pairs per sample (harness ranks)");
  cmd->add_option("--avg-of", opt.avg_of, "draws averaged into each candidate");
  cmd->add_flag("--tied,!--untied", opt.tied, "force beta = alpha when sampling");
  cmd->add_option("--ablation", opt.ablation, "both|pos|neg|off")
      ->check(CLI::IsMember({"both", "pos", "neg", "off"}));
  cmd->add_option("--backend", opt.backend, "mock or adapter:<name>");
  cmd->add_option("--seed", opt.seed, "master seed");
  cmd->add_option("--out", opt.out, "JSONL result records path");
  cmd->add_option("--annotations", opt.annotations, "image id -> objects JSON document");
  cmd->add_option("--synonyms", opt.synonyms, "surface<TAB>canonical synonym file");
  cmd->add_option("--prompt", opt.prompt, "captioning prompt");
  cmd->add_option("--recon-source", opt.recon_source,
                  "reconstruction prompt source for QA benchmarks")
      ->check(CLI::IsMember({"caption", "answer"}));
  cmd->add_flag("--per-sentence", opt.per_sentence, "literal per-sentence CHAIR_S");
  cmd->add_flag("--resume", opt.resume, "continue from persisted records in --out");
  cmd->add_flag("--wall-clock", opt.wall_clock,
                "real timestamps in records (breaks byte-identical reruns)");
  cmd->add_option("--samples", opt.samples, "generated mock dataset size");
  cmd->add_option("--vocab-size", opt.vocab_size, "mock vocabulary size");
  cmd->add_option("--noise-std", opt.noise_std, "mock projector noise std");
  cmd->add_option("--hallucination-rate", opt.hallucination_rate,
                  "per-image mock injection probability");
  cmd->add_option("--threshold", opt.threshold, "mock caption readout threshold");
  cmd->add_flag("--orthonormal", opt.orthonormal, "exactly orthonormal mock object vectors");
  cmd->add_option("--dim", opt.dim, "mock hidden dimension");
  cmd->add_option("--image-tokens", opt.image_tokens, "mock image token count");
  cmd->add_option("--num-layers", opt.num_layers, "mock decoder layer count");
}

RunConfig to_config(const CliOptions& opt, Benchmark benchmark) {
  RunConfig cfg;
  cfg.benchmark = benchmark;
  cfg.backend = opt.backend;
  cfg.edit.alpha = opt.alpha;
  cfg.edit.beta = opt.beta;
  cfg.edit.layer = opt.layer;
  cfg.edit.num_layers = opt.num_layers;
  cfg.edit.tied = opt.tied;
  if (opt.strategy == "fixed")
    cfg.edit.strategy = CoefficientStrategy::fixed(opt.alpha);
  else if (opt.strategy == "uniform")
    cfg.edit.strategy = CoefficientStrategy::uniform(opt.strategy_lo, opt.strategy_hi);
  else
    cfg.edit.strategy = CoefficientStrategy::gaussian(opt.strategy_lo, opt.strategy_hi);
  cfg.edit.strategy = cfg.edit.strategy.with_best_of(opt.best_of).with_avg_of(opt.avg_of);
  cfg.ablation = ablation_from_string(opt.ablation);
  cfg.seed = opt.seed;
  cfg.out_path = opt.out;
  cfg.annotations_path = opt.annotations;
  cfg.synonyms_path = opt.synonyms;
  cfg.prompt = opt.prompt;
  cfg.recon_source =
      opt.recon_source == "answer" ? ReconSource::answer : ReconSource::caption;
  cfg.per_sentence = opt.per_sentence;
  cfg.resume = opt.resume;
  cfg.wall_clock = opt.wall_clock;
  cfg.mock.samples = opt.samples;
  cfg.mock.vocab_size = opt.vocab_size;
  cfg.mock.noise_std = opt.noise_std;
  cfg.mock.hallucination_rate = opt.hallucination_rate;
  cfg.mock.caption_threshold = opt.threshold;
  cfg.mock.orthonormal = opt.orthonormal;
  cfg.mock.dim = opt.dim;
  cfg.mock.image_tokens = opt.image_tokens;
  cfg.mock.num_layers = opt.num_layers;
  cfg.questions_path = opt.questions;
  if (opt.pope_setting != "all")
    cfg.pope_settings = {pope_setting_from_string(opt.pope_setting)};
  for (const auto& entry : opt.mme_files) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos)
      cfg.mme_questions.emplace_back(MmeSubtask::existence, entry);
    else
      cfg.mme_questions.emplace_back(mme_subtask_from_string(entry.substr(0, eq)),
                                     entry.substr(eq + 1));
  }
  return cfg;
}

int run_and_render(const CliOptions& opt, Benchmark benchmark, bool baseline_only = false) {
  RunConfig cfg = to_config(opt, benchmark);
  cfg.baseline_only = baseline_only;
  RunOutput out = run_benchmark(cfg);
  std::cout << render_report_table(out.report);
  if (!cfg.out_path.empty()) {
    std::ofstream report_out(cfg.out_path + ".report.json", std::ios::trunc);
    report_out << out.report.dump(2) << '\n';
    std::cout << "records: " << cfg.out_path << "\n";
  }
  return 0;
}

std::vector<CoefficientPair> parse_grid(const std::string& csv) {
  std::vector<CoefficientPair> pairs;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t colon = tok.find(':');
    if (colon == std::string::npos) {
      double v = std::stod(tok);
      pairs.push_back({v, v});
    } else {
      pairs.push_back({std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
    }
  }
  return pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-anchor hallucination mitigation and evaluation toolkit"};
  app.require_subcommand(1);
  // INI config: goes before the subcommand, options live in a [subcommand]
  // section, e.g. `halo --config run.cfg eval-chair`; command-line flags win.
  app.set_config("--config", "", "config file mirroring subcommand flags ([subcommand] sections)");

  CliOptions opt;
  std::string sweep_axis = "grid";
  std::string sweep_values;
  int sweep_repetitions = 1;
  std::string records_path;
  std::string report_format = "text-table";
  std::string report_out = "./";

  CLI::App* caption = app.add_subcommand("caption", "baseline captions only");
  add_run_options(caption, opt);
  CLI::App* mitigate = app.add_subcommand("mitigate", "two-pass mitigation run");
  add_run_options(mitigate, opt);
  CLI::App* eval_chair = app.add_subcommand("eval-chair", "CHAIR/HAR evaluation run");
  add_run_options(eval_chair, opt);
  CLI::App* eval_pope = app.add_subcommand("eval-pope", "POPE yes/no evaluation run");
  add_run_options(eval_pope, opt);
  eval_pope->add_option("--questions", opt.questions, "POPE question JSONL");
  eval_pope->add_option("--pope-setting", opt.pope_setting, "random|popular|adversarial|all")
      ->check(CLI::IsMember({"random", "popular", "adversarial", "all"}));
  CLI::App* eval_mme = app.add_subcommand("eval-mme", "MME subtask evaluation run");
  add_run_options(eval_mme, opt);
  eval_mme->add_option("--questions", opt.mme_files,
                       "subtask=path TSV question files (repeatable)");
  CLI::App* probe = app.add_subcommand("probe", "hallucination amplification probe");
  add_run_options(probe, opt);
  CLI::App* robustness = app.add_subcommand("robustness", "no-op check on clean captions");
  add_run_options(robustness, opt);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid / layer / strategy sweep");
  add_run_options(sweep_cmd, opt);
  sweep_cmd->add_option("--axis", sweep_axis, "grid|layer|strategy")
      ->check(CLI::IsMember({"grid", "layer", "strategy"}));
  sweep_cmd->add_option("--values", sweep_values,
                        "grid: a[:b] list; layer: ints; strategy: names")
      ->required();
  sweep_cmd->add_option("--repetitions", sweep_repetitions, "repeated runs per point");

  CLI::App* report = app.add_subcommand("report", "render persisted records");
  report->add_option("--records", records_path, "JSONL records path")->required();
  report->add_option("--format", report_format, "text-table|delimited|figure-bundle")
      ->check(CLI::IsMember({"text-table", "delimited", "figure-bundle"}));
  report->add_option("--out", report_out, "output path prefix");

  CLI11_PARSE(app, argc, argv);

  // the probe measures its own injected object; captioner-side injection
  // defaults off there unless explicitly requested
  if (probe->parsed() && probe->count("--hallucination-rate") == 0)
    opt.hallucination_rate = 0.0;

  try {
    if (caption->parsed()) return run_and_render(opt, Benchmark::chair, true);
    if (mitigate->parsed()) return run_and_render(opt, Benchmark::chair);
    if (eval_chair->parsed()) return run_and_render(opt, Benchmark::chair);
    if (eval_pope->parsed()) return run_and_render(opt, Benchmark::pope);
    if (eval_mme->parsed()) return run_and_render(opt, Benchmark::mme);
    if (probe->parsed()) return run_and_render(opt, Benchmark::probe);
    if (robustness->parsed()) return run_and_render(opt, Benchmark::robustness);

    if (sweep_cmd->parsed()) {
      SweepSpec spec;
      spec.repetitions = sweep_repetitions;
      spec.seed_base = opt.seed;
      spec.strategy_lo = opt.strategy_lo;
      spec.strategy_hi = opt.strategy_hi;
      if (sweep_axis == "grid") {
        spec.axis = SweepAxis::alpha_beta_grid;
        spec.pairs = parse_grid(sweep_values);
      } else if (sweep_axis == "layer") {
        spec.axis = SweepAxis::layer;
        std::istringstream in(sweep_values);
        std::string tok;
        while (std::getline(in, tok, ',')) spec.layers.push_back(std::stoi(tok));
      } else {
        spec.axis = SweepAxis::strategy;
        std::istringstream in(sweep_values);
        std::string tok;
        while (std::getline(in, tok, ',')) spec.strategies.push_back(tok);
      }
      auto rows = sweep(spec, to_config(opt, Benchmark::chair));
      std::cout << render_sweep_table(rows);
      if (!opt.out.empty()) {
        JsonlWriter writer(opt.out, false);
        for (const auto& row : rows)
          writer.write(json{{"label", row.label},
                            {"seed", row.seed},
                            {"ok", row.ok},
                            {"error", row.error},
                            {"report", row.report}});
        std::cout << "sweep rows: " << opt.out << "\n";
      }
      return 0;
    }

    if (report->parsed()) {
      auto written = emit_report(records_path, report_format_from_string(report_format),
                                 report_out);
      for (const auto& path : written) std::cout << "wrote " << path << "\n";
      if (report_format == "text-table" && !written.empty()) {
        std::ifstream in(written[0]);
        std::cout << in.rdbuf();
      }
      return 0;
    }
  } catch (const halo::PartialRunResumable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const halo::DatasetParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const halo::SchemaVersionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const halo::BackendFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const halo::CapabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const halo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
