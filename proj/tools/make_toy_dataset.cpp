// Writes a synthetic clean-correct dataset for a registered victim.
#include "transvqa/registry.hpp"
#include "transvqa/synthetic.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic toy VQA dataset"};
  std::string out = "data/toy";
  int n = 200;
  std::uint64_t seed = 1;
  std::string victim = "toy";
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("-n,--count", n, "Number of samples")->capture_default_str();
  app.add_option("--seed", seed, "Seed")->capture_default_str();
  app.add_option("--victim", victim, "Victim whose predictions become the answers")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    auto handle = transvqa::ModelRegistry::global().make(victim);
    if (!handle.victim) throw transvqa::Error("'" + victim + "' cannot answer questions");
    std::cout << transvqa::make_synthetic_dataset(out, n, seed, *handle.victim) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
