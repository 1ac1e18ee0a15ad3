#include "transvqa/pipeline.hpp"

#include "transvqa/config.hpp"
#include "transvqa/image_io.hpp"
#include "transvqa/rng.hpp"
#include "transvqa/sentence_encoder.hpp"
#include "transvqa/tensor_archive.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace transvqa {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& id) {
  return mix_seed(run_seed, fnv1a(id.data(), id.size()));
}

std::string artifact_stem(const std::string& id) {
  std::string out = id;
  bool changed = out.empty();
  for (auto& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) {
      c = '_';
      changed = true;
    }
  }
  // Sanitizing can merge distinct ids; the hash keeps them apart.
  if (changed) {
    char tag[10];
    std::snprintf(tag, sizeof tag, "-%08x",
                  static_cast<unsigned>(fnv1a(id.data(), id.size()) & 0xffffffffu));
    out += tag;
  }
  return out;
}

std::unique_ptr<LlmClient> make_llm_client(const std::string& mode, const AttackConfig& config) {
  if (mode == "offline") return std::make_unique<OfflineLlmClient>();
  if (mode != "endpoint") throw Error("unknown llm mode '" + mode + "' (offline|endpoint)");
  if (config.llm_endpoint.empty()) throw Error("--llm endpoint needs llm_endpoint in the config");
  HttpLlmOptions opts;
  opts.endpoint = config.llm_endpoint;
  opts.model = config.llm_model;
  if (const char* key = std::getenv(config.llm_api_key_env.c_str())) opts.api_key = key;
  return std::make_unique<HttpLlmClient>(std::move(opts));
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("short write to '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

json config_json(const AttackConfig& config) {
  json j = json::object();
  std::istringstream in(canonical_config(config));
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

AttackConfig config_from_json(const json& j) {
  AttackConfig c;
  for (const auto& [k, v] : j.items()) set_config_value(c, k, v.get<std::string>());
  c.validate();
  return c;
}

}  // namespace

EvalRecord evaluate_pair(const VqaVictim& victim, const std::string& id,
                         const ImageTensor& clean_image, const std::string& question,
                         const ImageTensor& adv_image, const std::string& adv_question,
                         const AnswerSet& answers) {
  EvalRecord r;
  r.id = id;
  r.clean_prediction = victim.predict(clean_image, question);
  r.adv_prediction = victim.predict(adv_image, adv_question);
  r.success = !is_correct(r.adv_prediction, answers);
  r.linf = linf_distance(adv_image, clean_image);
  return r;
}

json sample_metadata(const SampleRun& run, const AttackConfig& config, const Tokenizer& tokenizer) {
  const auto& res = *run.result;
  json j;
  j["id"] = run.sample.id;
  j["seed"] = run.seed;
  j["question"] = run.sample.question;
  j["adv_question"] = tokenizer.detokenize(res.adv_text);
  j["answers"] = run.sample.answers.answers();
  j["words"] = run.clean_text.words;
  j["adv_words"] = res.adv_text.words;
  j["informative"] = run.clean_text.informative;
  j["max_iters"] = config.max_iters;
  j["linf"] = res.linf;
  j["semantic_sim"] = res.semantic_sim;
  j["n_substitutions"] = res.n_substitutions;
  j["iterations"] = static_cast<int>(res.trace.records.size());
  json cands = json::array();
  for (const auto& pc : run.details.candidates.positions) {
    json list = json::array();
    for (const auto& c : pc.candidates) list.push_back({{"word", c.word}, {"mlm_prob", c.mlm_prob}});
    cands.push_back({{"position", pc.position}, {"original", pc.original}, {"candidates", list}});
  }
  j["candidates"] = cands;
  j["schedule"] = trigger_schedule(config.max_iters, run.clean_text.informative.size());
  json trace = json::array();
  for (const auto& r : res.trace.records) {
    json subs = json::array();
    for (const auto& s : r.substitutions) {
      subs.push_back({{"position", s.position}, {"old", s.old_word}, {"new", s.new_word}});
    }
    trace.push_back({{"iter", r.iter},
                     {"loss_feature", optional_number(r.loss_feature)},
                     {"loss_anti_recovery", optional_number(r.loss_anti_recovery)},
                     {"loss_cross", optional_number(r.loss_cross)},
                     {"joint_triggered", r.joint_triggered},
                     {"joint_ran", r.joint_ran},
                     {"substitutions", subs},
                     {"linf_after_step", r.linf_after_step},
                     {"notes", r.notes}});
  }
  j["trace"] = trace;
  j["notes"] = res.trace.notes;
  return j;
}

AttackRunOutput attack_dataset(const Dataset& dataset, const PipelineOptions& options,
                               const std::string& out_dir) {
  options.config.validate();
  auto& registry = ModelRegistry::global();
  auto source = registry.make(options.model).source;
  if (!source) throw Error("model '" + options.model + "' cannot be used as an attack source");
  const std::string victim_name = options.victim.empty() ? options.model : options.victim;
  auto victim = registry.make(victim_name).victim;
  if (!victim) throw Error("model '" + victim_name + "' cannot be used as a victim");

  auto client = make_llm_client(options.llm, options.config);
  std::string prompt = options.config.prompt_template_path.empty()
                           ? default_prompt_template()
                           : load_prompt_template(options.config.prompt_template_path);
  LexiconSentenceEncoder encoder;
  AttackEnvironment env{*source, encoder, *client, prompt};

  fs::path out(out_dir);
  if (!out_dir.empty()) fs::create_directories(out / "adv");

  AttackRunOutput result;
  result.runs.resize(dataset.samples.size());
  int jobs = source->capabilities().concurrent_inference ? options.jobs : 1;

  parallel_for(dataset.samples.size(), jobs, [&](std::size_t i) {
    SampleRun& run = result.runs[i];
    run.sample = dataset.samples[i];
    run.seed = sample_seed(options.config.seed, run.sample.id);
    try {
      run.clean_image = read_image(dataset.resolve(run.sample));
      run.clean_text = source->tokenizer().tokenize(run.sample.question);
      AttackConfig cfg = options.config;
      cfg.seed = run.seed;
      run.result = run_attack(run.clean_image, run.clean_text, run.sample.answers, env, cfg,
                              &run.details);
      auto adv_question = source->tokenizer().detokenize(run.result->adv_text);
      auto rec = evaluate_pair(*victim, run.sample.id, run.clean_image, run.sample.question,
                               run.result->adv_image, adv_question, run.sample.answers);
      rec.semantic_sim = run.result->semantic_sim;
      rec.n_substitutions = run.result->n_substitutions;
      rec.iterations = static_cast<int>(run.result->trace.records.size());
      run.record = rec;
      if (!out_dir.empty()) {
        auto stem = artifact_stem(run.sample.id);
        write_image((out / "adv" / (stem + ".png")).string(), run.result->adv_image);
        save_image_tensor((out / "adv" / (stem + ".tensor")).string(), run.result->adv_image);
        write_text(out / "adv" / (stem + ".json"),
                   sample_metadata(run, options.config, source->tokenizer()).dump(2) + "\n");
      }
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  });

  std::vector<EvalRecord> records;
  json attacked = json::array();
  for (const auto& run : result.runs) {
    if (run.record) {
      records.push_back(*run.record);
      attacked.push_back(run.sample.id);
    } else {
      result.errors.push_back(run.sample.id + ": " + run.error);
    }
  }
  const auto hash = config_hash(options.config);
  result.report = make_report(std::move(records), hash, dataset.skipped);

  if (!out_dir.empty()) {
    json meta{{"model", options.model},
              {"victim", victim_name},
              {"llm", options.llm},
              {"dataset", fs::absolute(dataset.root.empty() ? "." : dataset.root).lexically_normal().string()},
              {"samples", attacked},
              {"config", config_json(options.config)},
              {"config_hash", hash},
              {"skipped", dataset.skipped}};
    json ds = json::array();
    for (const auto& s : dataset.samples) {
      ds.push_back({{"id", s.id}, {"image", s.image_path}, {"question", s.question},
                    {"answers", s.answers.answers()}});
    }
    meta["dataset_samples"] = ds;
    write_text(out / "run.json", meta.dump(2) + "\n");
    if (!result.report.records.empty()) emit_report(result.report, (out / "report.jsonl").string());
  }
  return result;
}

Report evaluate_run(const std::string& run_dir, const std::string& victim_name, int jobs) {
  fs::path dir(run_dir);
  if (!fs::exists(dir / "run.json")) throw Error("'" + run_dir + "' holds no attack run (run.json missing)");
  json meta = read_json(dir / "run.json");
  auto config = config_from_json(meta.at("config"));
  auto victim = ModelRegistry::global().make(victim_name).victim;
  if (!victim) throw Error("model '" + victim_name + "' cannot be used as a victim");

  std::map<std::string, Sample> samples;
  for (const auto& s : meta.at("dataset_samples")) {
    Sample smp{s.at("id"), s.at("image"), s.at("question"),
               AnswerSet(s.at("answers").get<std::vector<std::string>>())};
    samples.emplace(smp.id, smp);
  }
  Dataset ds;
  ds.root = meta.at("dataset").get<std::string>();
  std::vector<std::string> ids = meta.at("samples").get<std::vector<std::string>>();
  if (ids.empty()) throw Error("run '" + run_dir + "' has no attacked samples");

  std::vector<EvalRecord> records(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    try {
      const auto& s = samples.at(ids[i]);
      auto stem = artifact_stem(s.id);
      auto tensor_path = dir / "adv" / (stem + ".tensor");
      if (!fs::exists(tensor_path)) {
        throw Error("missing sidecar tensor '" + tensor_path.string() + "'");
      }
      auto adv = load_image_tensor(tensor_path.string());
      json side = read_json(dir / "adv" / (stem + ".json"));
      auto clean = read_image(ds.resolve(s));
      auto rec = evaluate_pair(*victim, s.id, clean, s.question, adv,
                               side.at("adv_question").get<std::string>(), s.answers);
      rec.semantic_sim = side.at("semantic_sim").get<double>();
      rec.n_substitutions = side.at("n_substitutions").get<int>();
      rec.iterations = side.at("iterations").get<int>();
      records[i] = rec;
    } catch (const std::exception& e) {
      errors[i] = ids[i] + ": " + e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(e);
  }
  auto report = make_report(std::move(records), meta.at("config_hash").get<std::string>(),
                            meta.value("skipped", 0));
  emit_report(report, (dir / ("eval_" + artifact_stem(victim_name) + ".jsonl")).string());
  return report;
}

std::string describe_sample(const json& m) {
  std::ostringstream out;
  out << "sample " << m.at("id").get<std::string>() << "\n";
  out << "  question:     " << m.at("question").get<std::string>() << "\n";
  out << "  adv question: " << m.at("adv_question").get<std::string>() << "\n";
  out << "  answers:      ";
  bool first = true;
  for (const auto& a : m.at("answers")) {
    out << (first ? "" : ", ") << a.get<std::string>();
    first = false;
  }
  out << "\n";
  out << "  linf " << m.at("linf").get<double>() << "  semantic_sim "
      << m.at("semantic_sim").get<double>() << "  substitutions "
      << m.at("n_substitutions").get<int>() << "\n";
  out << "candidates:\n";
  if (m.at("candidates").empty()) out << "  (none: no informative words)\n";
  for (const auto& pc : m.at("candidates")) {
    out << "  [" << pc.at("position").get<std::size_t>() << "] "
        << pc.at("original").get<std::string>() << ":";
    for (const auto& c : pc.at("candidates")) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", c.at("mlm_prob").get<double>());
      out << " " << c.at("word").get<std::string>() << "(" << buf << ")";
    }
    out << "\n";
  }
  out << "trigger schedule (M=" << m.at("max_iters").get<int>()
      << ", |W|=" << m.at("informative").size() << "): {";
  first = true;
  for (const auto& it : m.at("schedule")) {
    out << (first ? "" : ",") << it.get<int>();
    first = false;
  }
  out << "}\n";
  out << "trace:\n";
  auto num = [](const json& v) {
    if (v.is_null()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v.get<double>());
    return std::string(buf);
  };
  for (const auto& r : m.at("trace")) {
    out << "  m=" << r.at("iter").get<int>() << "  Lf=" << num(r.at("loss_feature"))
        << "  La=" << num(r.at("loss_anti_recovery")) << "  Lc=" << num(r.at("loss_cross"))
        << "  joint=" << (r.at("joint_triggered").get<bool>() ? "yes" : "no");
    if (r.at("joint_triggered").get<bool>() && !r.at("joint_ran").get<bool>()) out << "(disabled)";
    for (const auto& s : r.at("substitutions")) {
      out << "  " << s.at("old").get<std::string>() << "->" << s.at("new").get<std::string>();
    }
    out << "\n";
    for (const auto& n : r.at("notes")) out << "      note: " << n.get<std::string>() << "\n";
  }
  for (const auto& n : m.at("notes")) out << "note: " << n.get<std::string>() << "\n";
  return out.str();
}

}  // namespace transvqa
