#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dmib/commands.hpp"
#include "dmib/config.hpp"

namespace {

// --seed is sugar for a config override so provenance lands in the resolved
// config like any other --set expression.
std::vector<std::string> with_seed(std::vector<std::string> overrides, const CLI::Option* seed_opt,
                                   std::uint64_t seed) {
  if (seed_opt->count() > 0) overrides.push_back("seed=" + std::to_string(seed));
  return overrides;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic multimodal information-bottleneck experiments"};
  app.require_subcommand(1);
  int rc = 0;

  std::string train_config, train_out = "out";
  std::uint64_t train_seed = 0;
  std::vector<std::string> train_sets;
  auto* train = app.add_subcommand("train", "cross-validated training run");
  train->add_option("--config", train_config, "experiment config (JSON)");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "output directory")->capture_default_str();
  train->add_option("--set", train_sets, "override a config key, e.g. train.lr=1e-3");
  train->callback([&] {
    auto cfg = dmib::ExperimentConfig::load(train_config,
                                            with_seed(train_sets, train_seed_opt, train_seed));
    rc = dmib::run_train(cfg, train_out);
  });

  std::string abl_config, abl_out = "out";
  std::uint64_t abl_seed = 0;
  std::vector<std::string> abl_sets;
  auto* ablate = app.add_subcommand("ablate", "six-setting component comparison");
  ablate->add_option("--config", abl_config, "experiment config (JSON)");
  auto* abl_seed_opt = ablate->add_option("--seed", abl_seed, "override the config seed");
  ablate->add_option("--out", abl_out, "output directory")->capture_default_str();
  ablate->add_option("--set", abl_sets, "override a config key");
  ablate->callback([&] {
    auto cfg =
        dmib::ExperimentConfig::load(abl_config, with_seed(abl_sets, abl_seed_opt, abl_seed));
    rc = dmib::run_ablate(cfg, abl_out);
  });

  std::size_t ver_trials = 1000;
  std::uint64_t ver_seed = 42;
  std::string ver_out;
  auto* verify = app.add_subcommand(
      "verify", "information-theory identities + gradient checks against exact oracles");
  verify->add_option("--trials", ver_trials, "random instances per check family")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", ver_seed, "rng seed")->capture_default_str();
  verify->add_option("--out", ver_out, "also write the report into this directory");
  verify->callback([&] { rc = dmib::run_verify(ver_trials, ver_seed, ver_out); });

  dmib::SyntheticSpec spec;
  std::uint64_t gen_seed = 42;
  std::string gen_out = "synth";
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic multimodal dataset");
  gen->add_option("--samples", spec.n_samples, "logical samples")->capture_default_str();
  gen->add_option("--modalities", spec.n_modalities, "modality count")->capture_default_str();
  gen->add_option("--features", spec.n_features, "features per modality")->capture_default_str();
  gen->add_option("--informative", spec.informative, "index of the signal modality, -1 for none")
      ->capture_default_str();
  gen->add_option("--classes", spec.n_classes, "label count")->capture_default_str();
  gen->add_option("--separation", spec.separation, "class-mean offset")->capture_default_str();
  gen->add_option("--noise-floor", spec.noise_floor, "gaussian sigma")->capture_default_str();
  gen->add_option("--repeats", spec.repeats, "rows per sample; > 1 emits group ids")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "rng seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->callback([&] { rc = dmib::run_gen_synth(spec, gen_seed, gen_out); });

  std::string eval_ckpt, eval_labels, eval_out;
  std::vector<std::string> eval_mods;
  double eval_threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--modality", eval_mods, "modality table (repeatable)")->required();
  eval->add_option("--labels", eval_labels, "labels table")->required();
  eval->add_option("--threshold", eval_threshold, "positive-class score threshold")
      ->capture_default_str();
  eval->add_option("--out", eval_out, "also write reports into this directory");
  eval->callback(
      [&] { rc = dmib::run_eval(eval_ckpt, eval_mods, eval_labels, eval_out, eval_threshold); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
