#include "transvqa/synthetic.hpp"

#include "transvqa/image_io.hpp"
#include "transvqa/rng.hpp"
#include "transvqa/toy_model.hpp"

#include <filesystem>

namespace transvqa {

namespace fs = std::filesystem;

namespace {

const std::vector<std::vector<std::string>> kNouns = {
    {"bus", "coach"},     {"car", "vehicle"},  {"man", "guy"},      {"woman", "lady"},
    {"dog", "puppy"},     {"cat", "kitten"},   {"animal"},          {"table", "desk"},
    {"food", "meal"},     {"person"},          {"shirt"},           {"train"},
    {"building"},         {"plate"},           {"wall"},            {"sky"},
};
const std::vector<std::string> kVerbs = {"holding", "carrying", "eating", "wearing"};
const std::vector<std::string> kAttributes = {"color", "colour", "shade"};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

std::string noun(Rng& rng) { return pick(kNouns[rng.below(kNouns.size())], rng); }

}  // namespace

std::string synthetic_question(std::uint64_t seed) {
  Rng rng(seed);
  switch (rng.below(7)) {
    case 0:
      return "what " + pick(kAttributes, rng) + " is the " + noun(rng) + "?";
    case 1:
      return "what is the " + noun(rng) + " " + pick(kVerbs, rng) + "?";
    case 2:
      return "what kind of " + noun(rng) + " is this?";
    case 3:
      return "how many " + noun(rng) + " are there?";
    case 4:
      return "what sport is the " + noun(rng) + " playing?";
    case 5:
      return "what is the weather like in this picture?";
    default:
      return "which room is the " + noun(rng) + " sitting in?";
  }
}

std::string make_synthetic_dataset(const std::string& dir, int n, std::uint64_t seed,
                                   const VqaVictim& victim) {
  if (n < 1) throw Error("dataset size must be >= 1");
  fs::create_directories(fs::path(dir) / "images");
  std::vector<Sample> samples;
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%04d", i);
    auto image = quantize8(ToyModel::random_image(mix_seed(seed, 2 * i)));
    auto rel = std::string("images/") + id + ".png";
    write_image((fs::path(dir) / rel).string(), image);
    auto question = synthetic_question(mix_seed(seed, 2 * i + 1));
    samples.push_back(Sample{id, rel, question, AnswerSet({victim.predict(image, question)})});
  }
  auto path = (fs::path(dir) / "dataset.jsonl").string();
  write_dataset(path, samples);
  return path;
}

}  // namespace transvqa
