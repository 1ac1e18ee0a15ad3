#include "transvqa/cli.hpp"

#include "transvqa/config.hpp"
#include "transvqa/pipeline.hpp"
#include "transvqa/sentence_encoder.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

namespace transvqa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

struct Flags {
  std::string config;
  std::string data;
  std::string model = "toy";
  std::string victim;
  std::string out;
  std::string run;
  std::string id;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string ablation;
  std::string llm = "offline";
  bool dry_run = false;
};

void fail_json(std::ostream& err, const std::string& kind, const std::string& message,
               const std::vector<std::string>& details = {}) {
  json j{{"status", "error"}, {"kind", kind}, {"message", message}};
  if (!details.empty()) j["failures"] = details;
  err << j.dump() << "\n";
}

void require_model(const std::string& name) {
  if (!ModelRegistry::global().contains(name)) {
    std::string known;
    for (const auto& n : ModelRegistry::global().names()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown model '" + name + "'; registered adapters: " + known);
  }
}

AttackConfig build_config(const Flags& f) {
  std::map<std::string, std::string> overrides;
  if (f.seed) overrides["seed"] = std::to_string(*f.seed);
  if (!f.ablation.empty()) {
    overrides["loss_flags"] = format_loss_flags(flags_for(parse_ablation(f.ablation)));
  }
  std::optional<std::string> file;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw UsageError("config file '" + f.config + "' not found");
    file = f.config;
  }
  try {
    return resolve_config(file, process_env(), overrides);
  } catch (const Error& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

json summary_json(const Report& r) {
  return json{{"asr", r.summary.asr},
              {"n", r.summary.n},
              {"config_hash", r.summary.config_hash},
              {"skipped", r.summary.skipped}};
}

int cmd_attack(const Flags& f, std::ostream& out, std::ostream& err) {
  if (f.data.empty()) throw UsageError("attack needs --data");
  if (f.out.empty() && !f.dry_run) throw UsageError("attack needs --out");
  if (f.jobs < 1) throw UsageError("--jobs must be >= 1");
  require_model(f.model);
  if (!f.victim.empty()) require_model(f.victim);
  auto config = build_config(f);
  if (f.llm == "endpoint" && config.llm_endpoint.empty()) {
    throw UsageError("--llm endpoint needs llm_endpoint in the config or TRANSVQA_LLM_ENDPOINT");
  }
  auto dataset = load_dataset(f.data);
  for (const auto& w : dataset.warnings) err << "warning: " << w << "\n";
  if (f.dry_run) {
    out << json{{"status", "ok"},
                {"dry_run", true},
                {"samples", dataset.samples.size()},
                {"skipped", dataset.skipped},
                {"config_hash", config_hash(config)},
                {"loss_flags", format_loss_flags(config.loss_flags)}}
               .dump()
        << "\n";
    return kOk;
  }
  if (dataset.samples.empty()) throw Error("no usable samples in '" + f.data + "'");
  PipelineOptions opts;
  opts.config = config;
  opts.model = f.model;
  opts.victim = f.victim;
  opts.llm = f.llm;
  opts.jobs = f.jobs;
  auto result = attack_dataset(dataset, opts, f.out);
  if (!result.report.records.empty()) {
    auto s = summary_json(result.report);
    s["report"] = (fs::path(f.out) / "report.jsonl").string();
    out << s.dump() << "\n";
  }
  if (!result.errors.empty()) {
    fail_json(err, "runtime",
              std::to_string(result.errors.size()) + " of " +
                  std::to_string(dataset.samples.size()) + " samples failed",
              result.errors);
    return kRuntime;
  }
  return kOk;
}

int cmd_eval(const Flags& f, std::ostream& out, std::ostream&) {
  std::string run = !f.run.empty() ? f.run : f.out;
  if (run.empty()) throw UsageError("eval needs --run <attack output directory>");
  std::string victim = f.victim;
  if (victim.empty()) {
    fs::path meta = fs::path(run) / "run.json";
    if (!fs::exists(meta)) throw Error("'" + run + "' holds no attack run (run.json missing)");
    std::ifstream in(meta);
    victim = json::parse(in).value("victim", std::string("toy"));
  }
  require_model(victim);
  auto report = evaluate_run(run, victim, f.jobs);
  auto s = summary_json(report);
  s["victim"] = victim;
  s["report"] = (fs::path(run) / ("eval_" + artifact_stem(victim) + ".jsonl")).string();
  out << s.dump() << "\n";
  return kOk;
}

int cmd_inspect(const Flags& f, std::ostream& out, std::ostream&) {
  if (f.id.empty()) throw UsageError("inspect needs --id");
  if (!f.run.empty()) {
    auto path = fs::path(f.run) / "adv" / (artifact_stem(f.id) + ".json");
    if (!fs::exists(path)) throw Error("no sample '" + f.id + "' in run '" + f.run + "'");
    std::ifstream in(path);
    out << describe_sample(json::parse(in));
    return kOk;
  }
  if (f.data.empty()) throw UsageError("inspect needs --run or --data");
  require_model(f.model);
  auto config = build_config(f);
  auto dataset = load_dataset(f.data);
  Dataset one;
  one.root = dataset.root;
  for (const auto& s : dataset.samples) {
    if (s.id == f.id) one.samples.push_back(s);
  }
  if (one.samples.empty()) throw Error("no sample '" + f.id + "' in '" + f.data + "'");
  PipelineOptions opts;
  opts.config = config;
  opts.model = f.model;
  opts.victim = f.victim;
  opts.llm = f.llm;
  auto result = attack_dataset(one, opts);
  const auto& run = result.runs.front();
  if (!run.result) throw Error(run.error);
  auto source = ModelRegistry::global().make(f.model).source;
  out << describe_sample(sample_metadata(run, config, source->tokenizer()));
  return kOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transferable adversarial attacks on VQA models"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Flat key=value config file");
    sub->add_option("--data", f.data, "Dataset (JSON Lines)");
    sub->add_option("--model", f.model, "Source model adapter")->capture_default_str();
    sub->add_option("--victim", f.victim, "Victim model (default: the source model)");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Run seed");
    sub->add_option("--jobs", f.jobs, "Parallel workers")->capture_default_str();
    sub->add_option("--ablation", f.ablation, "Loss preset")
        ->check(CLI::IsMember({"IE", "LRP", "LLM-E", "full"}));
    sub->add_option("--llm", f.llm, "Sentence composer")
        ->check(CLI::IsMember({"offline", "endpoint"}))
        ->capture_default_str();
    sub->add_flag("--dry-run", f.dry_run, "Validate config and dataset only");
    sub->add_option("--run", f.run, "Attack output directory");
    sub->add_option("--id", f.id, "Sample id");
  };
  auto* attack = app.add_subcommand("attack", "Attack every sample of a dataset");
  auto* eval = app.add_subcommand("eval", "Replay stored pairs against a victim");
  auto* inspect = app.add_subcommand("inspect", "Show candidates, schedule and trace of a sample");
  add_common(attack);
  add_common(eval);
  add_common(inspect);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    fail_json(err, "usage", e.what());
    err << app.help();
    return kUsage;
  }

  try {
    if (attack->parsed()) return cmd_attack(f, out, err);
    if (eval->parsed()) return cmd_eval(f, out, err);
    return cmd_inspect(f, out, err);
  } catch (const UsageError& e) {
    fail_json(err, "usage", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    fail_json(err, "runtime", e.what());
    return kRuntime;
  }
}

}  // namespace transvqa
