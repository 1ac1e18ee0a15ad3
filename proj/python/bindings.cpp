#include "transvqa/cli.hpp"
#include "transvqa/config.hpp"
#include "transvqa/evalkit.hpp"
#include "transvqa/orchestrator.hpp"
#include "transvqa/pipeline.hpp"
#include "transvqa/registry.hpp"
#include "transvqa/sentence_encoder.hpp"
#include "transvqa/synthetic.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace transvqa;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageTensor to_image(const Array& a) {
  if (a.ndim() != 3) throw Error("image must be an (H, W, C) array");
  Shape s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
          static_cast<std::size_t>(a.shape(2))};
  return ImageTensor(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const ImageTensor& img) {
  const auto& s = img.shape();
  Array out({s.height, s.width, s.channels});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

std::string value_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  if (py::isinstance<py::str>(v)) return v.cast<std::string>();
  if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v) || py::isinstance<py::set>(v)) {
    std::string s;
    for (auto item : v) s += (s.empty() ? "" : ",") + py::str(item).cast<std::string>();
    return s;
  }
  return py::repr(v).cast<std::string>();
}

AttackConfig make_config(const py::dict& overrides) {
  std::map<std::string, std::string> flags;
  for (auto [k, v] : overrides) flags[k.cast<std::string>()] = value_text(v);
  return resolve_config(std::nullopt, [](const std::string&) { return std::optional<std::string>(); },
                        flags);
}

py::dict config_dict(const AttackConfig& c) {
  py::dict d;
  std::istringstream in(canonical_config(c));
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) d[py::str(line.substr(0, eq))] = line.substr(eq + 1);
  }
  return d;
}

py::dict summary_dict(const Report& r) {
  py::dict d;
  d["asr"] = r.summary.asr;
  d["n"] = r.summary.n;
  d["config_hash"] = r.summary.config_hash;
  d["skipped"] = r.summary.skipped;
  return d;
}

py::dict attack(const Array& image, const std::string& question,
                const std::vector<std::string>& answers, const py::dict& config,
                const std::string& model) {
  auto cfg = make_config(config);
  auto handle = ModelRegistry::global().make(model);
  auto clean = to_image(image);
  AttackResult res;
  TokenizedText text;
  {
    py::gil_scoped_release release;
    LexiconSentenceEncoder encoder;
    OfflineLlmClient client;
    AttackEnvironment env{*handle.source, encoder, client};
    text = handle.source->tokenizer().tokenize(question);
    res = run_attack(clean, text, AnswerSet(answers), env, cfg);
  }
  py::list trace;
  for (const auto& r : res.trace.records) {
    py::dict it;
    it["iter"] = r.iter;
    it["loss_feature"] = r.loss_feature ? py::cast(*r.loss_feature) : py::none();
    it["loss_anti_recovery"] = r.loss_anti_recovery ? py::cast(*r.loss_anti_recovery) : py::none();
    it["loss_cross"] = r.loss_cross ? py::cast(*r.loss_cross) : py::none();
    it["joint_triggered"] = r.joint_triggered;
    py::list subs;
    for (const auto& s : r.substitutions) subs.append(py::make_tuple(s.position, s.old_word, s.new_word));
    it["substitutions"] = subs;
    trace.append(it);
  }
  py::dict out;
  out["adv_image"] = to_array(res.adv_image);
  out["adv_question"] = handle.source->tokenizer().detokenize(res.adv_text);
  out["adv_words"] = res.adv_text.words;
  out["linf"] = res.linf;
  out["semantic_sim"] = res.semantic_sim;
  out["n_substitutions"] = res.n_substitutions;
  out["trace"] = trace;
  out["notes"] = res.trace.notes;
  return out;
}

}  // namespace

PYBIND11_MODULE(_transvqa, m) {
  m.doc() = "Transferable adversarial attacks on visual question answering models";
  py::register_exception<Error>(m, "TransvqaError", PyExc_RuntimeError);

  m.def("default_config", [] { return config_dict(AttackConfig{}); });
  m.def("resolve_config", [](const py::dict& overrides) { return config_dict(make_config(overrides)); },
        py::arg("overrides") = py::dict());
  m.def("config_hash", [](const py::dict& overrides) { return config_hash(make_config(overrides)); },
        py::arg("overrides") = py::dict());
  m.def("models", [] { return ModelRegistry::global().names(); });

  m.def("trigger_schedule", &trigger_schedule, py::arg("max_iters"), py::arg("w_count"));
  m.def("linf_distance", [](const Array& a, const Array& b) { return linf_distance(to_image(a), to_image(b)); });
  m.def("clip_to_budget", [](const Array& adv, const Array& clean, double budget) {
    return to_array(clip_to_budget(to_image(adv), to_image(clean), budget));
  });
  m.def("normalize_answer", &normalize_answer);
  m.def("is_correct", [](const std::string& p, const std::vector<std::string>& a) {
    return is_correct(p, AnswerSet(a));
  });

  m.def("tokenize", [](const std::string& text, const std::string& model) {
    auto t = ModelRegistry::global().make(model).source->tokenizer().tokenize(text);
    py::dict d;
    d["words"] = t.words;
    d["informative"] = t.informative;
    return d;
  }, py::arg("text"), py::arg("model") = "toy");
  m.def("random_image", [](std::uint64_t seed) { return to_array(ToyModel::random_image(seed)); });
  m.def("predict", [](const Array& image, const std::string& question, const std::string& victim) {
    auto handle = ModelRegistry::global().make(victim);
    auto img = to_image(image);
    py::gil_scoped_release release;
    return handle.victim->predict(img, question);
  }, py::arg("image"), py::arg("question"), py::arg("victim") = "toy");

  m.def("attack", &attack, py::arg("image"), py::arg("question"), py::arg("answers"),
        py::arg("config") = py::dict(), py::arg("model") = "toy");

  m.def("make_synthetic_dataset", [](const std::string& dir, int n, std::uint64_t seed,
                                     const std::string& victim) {
    auto handle = ModelRegistry::global().make(victim);
    py::gil_scoped_release release;
    return make_synthetic_dataset(dir, n, seed, *handle.victim);
  }, py::arg("dir"), py::arg("n"), py::arg("seed") = 0, py::arg("victim") = "toy");

  m.def("attack_dataset", [](const std::string& data, const std::string& out, const py::dict& config,
                             const std::string& model, const std::string& victim, int jobs) {
    PipelineOptions opts;
    opts.config = make_config(config);
    opts.model = model;
    opts.victim = victim;
    opts.jobs = jobs;
    AttackRunOutput run;
    {
      py::gil_scoped_release release;
      run = attack_dataset(load_dataset(data), opts, out);
    }
    auto d = summary_dict(run.report);
    d["errors"] = run.errors;
    return d;
  }, py::arg("data"), py::arg("out"), py::arg("config") = py::dict(), py::arg("model") = "toy",
     py::arg("victim") = "", py::arg("jobs") = 1);

  m.def("evaluate_run", [](const std::string& run_dir, const std::string& victim, int jobs) {
    Report r;
    {
      py::gil_scoped_release release;
      r = evaluate_run(run_dir, victim, jobs);
    }
    return summary_dict(r);
  }, py::arg("run_dir"), py::arg("victim") = "toy", py::arg("jobs") = 1);

  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli_main(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
