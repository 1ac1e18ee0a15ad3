#include "transvqa/evalkit.hpp"

#include "transvqa/image_io.hpp"

#include "json.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace transvqa {

using nlohmann::json;
namespace fs = std::filesystem;

std::string normalize_answer(const std::string& answer) {
  std::string cleaned;
  cleaned.reserve(answer.size());
  for (unsigned char c : answer) {
    if (std::ispunct(c)) {
      cleaned += ' ';
    } else {
      cleaned += static_cast<char>(std::tolower(c));
    }
  }
  std::istringstream words(cleaned);
  std::string w, out;
  while (words >> w) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

bool is_correct(const std::string& prediction, const AnswerSet& answers) {
  const auto p = normalize_answer(prediction);
  for (const auto& a : answers.answers()) {
    if (normalize_answer(a) == p) return true;
  }
  return false;
}

std::string Dataset::resolve(const Sample& s) const {
  fs::path p(s.image_path);
  if (p.is_absolute()) return p.string();
  return (fs::path(root) / p).string();
}

namespace {

Sample sample_from_json(const json& j) {
  if (!j.is_object()) throw Error("expected a JSON object");
  for (const char* key : {"id", "image", "question", "answers"}) {
    if (!j.contains(key)) throw Error(std::string("missing field '") + key + "'");
  }
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.image_path = j.at("image").get<std::string>();
  s.question = j.at("question").get<std::string>();
  if (s.id.empty()) throw Error("empty id");
  s.answers = AnswerSet(j.at("answers").get<std::vector<std::string>>());
  return s;
}

json sample_to_json(const Sample& s) {
  return json{{"id", s.id}, {"image", s.image_path}, {"question", s.question},
              {"answers", s.answers.answers()}};
}

nlohmann::ordered_json record_to_json(const EvalRecord& r) {
  return nlohmann::ordered_json{{"id", r.id},
              {"clean_prediction", r.clean_prediction},
              {"adv_prediction", r.adv_prediction},
              {"success", r.success},
              {"linf", r.linf},
              {"semantic_sim", r.semantic_sim},
              {"n_substitutions", r.n_substitutions},
              {"iterations", r.iterations}};
}

EvalRecord record_from_json(const json& j) {
  EvalRecord r;
  r.id = j.at("id").get<std::string>();
  r.clean_prediction = j.at("clean_prediction").get<std::string>();
  r.adv_prediction = j.at("adv_prediction").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.linf = j.at("linf").get<double>();
  r.semantic_sim = j.at("semantic_sim").get<double>();
  r.n_substitutions = j.at("n_substitutions").get<int>();
  r.iterations = j.at("iterations").get<int>();
  return r;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("short write to '" + path + "'");
}

}  // namespace

Dataset load_dataset(const std::string& path, bool check_images) {
  Dataset ds;
  ds.root = fs::path(path).parent_path().string();
  std::istringstream in(read_text(path));
  std::string line;
  int lineno = 0;
  bool any = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    any = true;
    Sample s;
    try {
      s = sample_from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": malformed sample: " + e.what());
    }
    if (!ids.insert(s.id).second) {
      throw Error(path + ":" + std::to_string(lineno) + ": duplicate id '" + s.id + "'");
    }
    if (check_images) {
      auto full = ds.resolve(s);
      if (!fs::exists(full)) {
        ds.warnings.push_back("sample '" + s.id + "' skipped: image '" + full + "' not found");
        ++ds.skipped;
        continue;
      }
      try {
        read_image(full);
      } catch (const Error& e) {
        ds.warnings.push_back("sample '" + s.id + "' skipped: " + e.what());
        ++ds.skipped;
        continue;
      }
    }
    ds.samples.push_back(std::move(s));
  }
  if (!any) throw Error("dataset '" + path + "' is empty");
  return ds;
}

void write_dataset(const std::string& path, const std::vector<Sample>& samples) {
  std::string text;
  for (const auto& s : samples) text += sample_to_json(s).dump() + "\n";
  write_text(path, text);
}

double compute_asr(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw Error("ASR of an empty record list is undefined");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.success ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

Report make_report(std::vector<EvalRecord> records, const std::string& config_hash, int skipped) {
  Report rep;
  for (auto& r : records) {
    r.linf = round6(r.linf);
    r.semantic_sim = round6(r.semantic_sim);
  }
  rep.summary.asr = records.empty() ? 0.0 : round6(compute_asr(records));
  rep.summary.n = static_cast<int>(records.size());
  rep.summary.config_hash = config_hash;
  rep.summary.skipped = skipped;
  rep.records = std::move(records);
  return rep;
}

std::string format_report(const Report& report) {
  std::string out;
  for (const auto& r : report.records) out += record_to_json(r).dump() + "\n";
  nlohmann::ordered_json summary{{"summary", true},
               {"asr", report.summary.asr},
               {"n", report.summary.n},
               {"config_hash", report.summary.config_hash},
               {"skipped", report.summary.skipped}};
  out += summary.dump() + "\n";
  return out;
}

void emit_report(const Report& report, const std::string& path) {
  write_text(path, format_report(report));
}

Report parse_report(const std::string& text) {
  Report rep;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_summary = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      if (j.contains("summary")) {
        if (have_summary) throw Error("second summary line");
        have_summary = true;
        rep.summary.asr = j.at("asr").get<double>();
        rep.summary.n = j.at("n").get<int>();
        rep.summary.config_hash = j.at("config_hash").get<std::string>();
        rep.summary.skipped = j.value("skipped", 0);
      } else {
        if (have_summary) throw Error("record after the summary line");
        rep.records.push_back(record_from_json(j));
      }
    } catch (const std::exception& e) {
      throw Error("report line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_summary) throw Error("report has no summary line");
  return rep;
}

Report load_report(const std::string& path) {
  return parse_report(read_text(path));
}

}  // namespace transvqa
