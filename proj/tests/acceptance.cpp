// Acceptance harness: nine end-to-end criteria, one pass/fail line each.
// Exits with the number of failed criteria, so 0 means fully accepted.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dmib/commands.hpp"
#include "dmib/config.hpp"
#include "dmib/data.hpp"
#include "dmib/infotheory.hpp"
#include "dmib/metrics.hpp"
#include "dmib/model.hpp"
#include "dmib/rng.hpp"
#include "dmib/trainer.hpp"
#include "dmib/verify.hpp"

namespace fs = std::filesystem;
using namespace dmib;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// The training commands narrate to stdout; keep the acceptance report clean.
class SilenceCout {
 public:
  SilenceCout() : old_(std::cout.rdbuf(sink_.rdbuf())) {}
  ~SilenceCout() { std::cout.rdbuf(old_); }

 private:
  std::ostringstream sink_;
  std::streambuf* old_;
};

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<unreadable:" + path + ">";
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "dmib_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int g_failures = 0;

void report(int index, bool pass, const std::string& text, double elapsed, double limit) {
  if (!pass) ++g_failures;
  std::printf("[%d/9] %s  %s (%.1f s%s)\n", index, pass ? "PASS" : "FAIL", text.c_str(), elapsed,
              limit > 0 ? (", limit " + std::to_string(static_cast<int>(limit))).c_str() : "");
  std::fflush(stdout);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// --- criterion 1: gradient correctness --------------------------------------

void criterion_gradients() {
  const auto t0 = Clock::now();
  const double ops = max_grad_error_ops(4242);
  const double composite = grad_error_composite(4242);
  const double elapsed = seconds_since(t0);
  const bool pass = ops < 1e-4 && composite < 1e-3 && elapsed < 30.0;
  report(1, pass,
         "gradients: per-op max rel err " + sci(ops) + " < 1e-4, composite loss " +
             sci(composite) + " < 1e-3",
         elapsed, 30);
}

// --- criterion 2: interaction-information chain rule ------------------------

void criterion_chain_rule() {
  const auto t0 = Clock::now();
  RngState rng = RngState::derive(20240817, "chain");
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t nf = 2 + rng.next_u64() % 7;   // |F| in 2..8
    const std::size_t ny = 2 + rng.next_u64() % 2;   // |Y| in 2..3
    const std::size_t nfs = 1 + rng.next_u64() % nf; // |F*| in 1..|F|
    const auto p_f = random_distribution(nf, rng);
    const auto enc = DeterministicEncoder::random(nf, nfs, rng);
    const auto p_y_f = random_conditional(nf, ny, rng);
    worst = std::max(worst, verify_chain_rule(p_f, enc, p_y_f));
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst < 1e-10 && elapsed < 5.0;
  report(2, pass,
         "chain rule over 100 random encoder joints: worst residual " + sci(worst) + " < 1e-10",
         elapsed, 5);
}

// --- criterion 3: sufficiency proposition ------------------------------------

void criterion_sufficiency() {
  const auto t0 = Clock::now();
  RngState rng = RngState::derive(20240817, "sufficiency");
  double worst_kl = 0.0, worst_gap_eq = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t nf = 2 + rng.next_u64() % 5;
    const std::size_t nfs = 1 + rng.next_u64() % nf;
    const std::size_t ny = 2 + rng.next_u64() % 2;
    const SufficiencyCheck c =
        verify_sufficiency_proposition(equal_posterior_joint(nf, nfs, ny, rng));
    worst_kl = std::max(worst_kl, c.kl_term);
    worst_gap_eq = std::max(worst_gap_eq, std::abs(c.mi_gap));
  }
  double min_gap = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t nf = 2 + rng.next_u64() % 7;
    const std::size_t nfs = 1 + rng.next_u64() % nf;
    const std::size_t ny = 2 + rng.next_u64() % 2;
    const SufficiencyCheck c =
        verify_sufficiency_proposition(random_encoder_joint(nf, nfs, ny, rng));
    min_gap = std::min(min_gap, c.mi_gap);
  }
  const double elapsed = seconds_since(t0);
  const bool pass =
      worst_kl < 1e-12 && worst_gap_eq < 1e-10 && min_gap >= -1e-12 && elapsed < 10.0;
  report(3, pass,
         "sufficiency: equal-posterior kl " + sci(worst_kl) + " < 1e-12, |gap| " +
             sci(worst_gap_eq) + " < 1e-10; 1000 random joints min gap " + sci(min_gap) +
             " >= -1e-12",
         elapsed, 10);
}

// --- criterion 4: masking frequencies ----------------------------------------

void criterion_masking() {
  const auto t0 = Clock::now();
  RngState rng = RngState::derive(20240817, "mask");
  const int draws = 100000;
  int all_ones = 0;
  int single[3] = {0, 0, 0};
  for (int t = 0; t < draws; ++t) {
    const MaskVector m = sample_mask(3, rng.next_double());
    int zeros = 0, which = -1;
    for (int i = 0; i < 3; ++i)
      if (m.m[i] == 0.0) {
        ++zeros;
        which = i;
      }
    if (zeros == 0) ++all_ones;
    else if (zeros == 1) ++single[which];
  }
  const double f_all = static_cast<double>(all_ones) / draws;
  bool pass = std::abs(f_all - 0.5) <= 0.01;
  std::string singles;
  for (int i = 0; i < 3; ++i) {
    const double f = static_cast<double>(single[i]) / draws;
    pass = pass && std::abs(f - 1.0 / 6.0) <= 0.01;
    singles += (i ? "/" : "") + std::to_string(f).substr(0, 6);
  }
  const double elapsed = seconds_since(t0);
  report(4, pass,
         "masking, 1e5 draws at n=3: all-ones " + std::to_string(f_all).substr(0, 6) +
             " in 0.5+-0.01, singles " + singles + " in 1/6+-0.01",
         elapsed, 0);
}

// --- criterion 5: screening-index arithmetic ---------------------------------

void criterion_youden() {
  const auto t0 = Clock::now();
  struct Row {
    double se, sp, w, expect;
  };
  const Row rows[] = {
      {0.75, 0.63, 0.5, 0.69},
      {0.75, 0.63, 0.6, 0.70},
      {0.57, 0.85, 0.5, 0.71},
      {0.57, 0.85, 0.6, 0.68},
  };
  bool pass = true;
  double worst = 0.0;
  for (const Row& r : rows) {
    const double err = std::abs(weighted_youden(r.se, r.sp, r.w) - r.expect);
    worst = std::max(worst, err);
    pass = pass && err <= 0.005;
  }
  report(5, pass,
         "weighted youden reproduces all four published values, worst gap " + sci(worst) +
             " <= 5e-3",
         seconds_since(t0), 0);
}

// --- criterion 6: auc oracle equivalence -------------------------------------

void criterion_auc() {
  const auto t0 = Clock::now();
  RngState rng = RngState::derive(20240817, "auc");
  double worst_antisym = 0.0;
  std::size_t tied_pairs = 0, total_pairs = 0;
  bool pass = true;
  std::string failure;
  for (int t = 0; t < 1000 && pass; ++t) {
    const std::size_t n = 4 + rng.next_u64() % 40;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // quantized scores force heavy tying
      scores[i] = std::floor(rng.next_double() * 6.0) / 6.0;
      labels[i] = static_cast<int>(rng.next_u64() % 2);
    }
    labels[0] = 0;
    labels[1] = 1;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        ++total_pairs;
        if (scores[i] == scores[j]) ++tied_pairs;
      }
    std::vector<double> neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -scores[i];
    try {
      // roc_auc itself insists rank and trapezoid agree within 1e-12
      const double a = roc_auc(scores, labels);
      const double b = roc_auc(neg, labels);
      worst_antisym = std::max(worst_antisym, std::abs(a + b - 1.0));
    } catch (const std::exception& e) {
      pass = false;
      failure = e.what();
    }
  }
  const double tie_frac = static_cast<double>(tied_pairs) / static_cast<double>(total_pairs);
  pass = pass && worst_antisym <= 1e-12 && tie_frac >= 0.10;
  std::string text = "auc: rank vs trapezoid agreed on 1000 sets (tie fraction " +
                     std::to_string(tie_frac).substr(0, 5) + " >= 0.10), antisymmetry residual " +
                     sci(worst_antisym) + " <= 1e-12";
  if (!failure.empty()) text += " [" + failure + "]";
  report(6, pass, text, seconds_since(t0), 0);
}

// --- criterion 7: end-to-end desk run ----------------------------------------

double desk_auc(const MultimodalDataset& raw, const SplitPlan& plan, const TrainConfig& tc) {
  const Preprocessor pp = Preprocessor::fit(raw, plan.train_rows());
  return cross_validate(pp.apply(raw), plan, tc).record.test.auc;
}

void criterion_desk_run() {
  const auto t0 = Clock::now();
  const SyntheticSpec spec;  // 500 samples, informative modality + pure-noise modality
  const MultimodalDataset raw = gen_synthetic(spec, 42);

  TrainConfig tc;  // full model flags, 70 epochs, batch 8, 5 folds
  tc.lr = 1e-3;
  const SplitPlan plan = split_stratified(raw.labels, tc.test_frac, tc.k_folds, 42);

  const double auc = desk_auc(raw, plan, tc);

  NoiseSpec noise;
  noise.target = "mod1";
  const double auc_a = desk_auc(inject_noise_channel(raw, noise, 1001), plan, tc);
  const double auc_b = desk_auc(inject_noise_channel(raw, noise, 2002), plan, tc);
  const double delta = std::abs(auc_a - auc_b);

  const double elapsed = seconds_since(t0);
  const bool pass = auc >= 0.9 && delta < 0.05 && elapsed < 300.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "desk run: held-out auc %.4f >= 0.9; noise-seed swap moved auc by %.4f < 0.05",
                auc, delta);
  report(7, pass, buf, elapsed, 300);
}

// --- criterion 8: ablation harness -------------------------------------------

void criterion_ablation(const fs::path& work) {
  const auto t0 = Clock::now();
  nlohmann::json j;
  j["seed"] = 42;
  j["data"]["synthetic"] = nlohmann::json::object();
  j["train"] = {{"lr", 1e-3}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const std::string out = (work / "ablate").string();
  int rc = 1;
  {
    SilenceCout quiet;
    rc = run_ablate(cfg, out);
  }

  bool pass = rc == 0;
  std::string text;
  const bool expected[6][5] = {
      {true, false, false, false, false}, {false, true, true, false, true},
      {true, true, true, false, true},    {true, true, true, true, false},
      {true, true, false, true, true},    {true, true, true, true, true},
  };
  nlohmann::json records;
  std::ifstream in(fs::path(out) / "ablation_records.json");
  if (in) in >> records;
  if (!records.contains("rows") || records["rows"].size() != 6) {
    pass = false;
    text = "ablation: expected exactly 6 emitted settings";
  } else {
    const std::string shared = records["plan_hash"].get<std::string>();
    bool flags_ok = true, hash_ok = true;
    for (int r = 0; r < 6; ++r) {
      const auto& f = records["rows"][r]["flags"];
      flags_ok = flags_ok && f["loss_fused"] == expected[r][0] &&
                 f["use_ib"] == expected[r][1] && f["loss_distilled"] == expected[r][2] &&
                 f["loss_sufficiency"] == expected[r][3] && f["loss_modality"] == expected[r][4];
      hash_ok =
          hash_ok && records["rows"][r]["record"]["plan_hash"].get<std::string>() == shared;
    }
    pass = pass && flags_ok && hash_ok;
    text = std::string("ablation: 6 settings emitted, flag grid ") +
           (flags_ok ? "matches" : "WRONG") + ", split plan " +
           (hash_ok ? "shared (" + shared + ")" : "NOT shared");
  }
  report(8, pass, text, seconds_since(t0), 1800);
}

// --- criterion 9: determinism -------------------------------------------------

void criterion_determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  nlohmann::json j;
  j["seed"] = 9;
  j["data"]["synthetic"] = {{"n_samples", 100}};
  j["train"] = {{"lr", 1e-3}, {"epochs", 10}, {"folds", 3}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const std::string out1 = (work / "det1").string();
  const std::string out2 = (work / "det2").string();
  int rc1 = 1, rc2 = 1;
  {
    SilenceCout quiet;
    rc1 = run_train(cfg, out1);
    rc2 = run_train(cfg, out2);
  }
  bool pass = rc1 == 0 && rc2 == 0;
  std::string diff;
  for (const char* name : {"metrics.txt", "metrics.json", "checkpoint.bin", "run_record.json"}) {
    if (read_bytes((fs::path(out1) / name).string()) !=
        read_bytes((fs::path(out2) / name).string())) {
      pass = false;
      diff += std::string(" ") + name;
    }
  }
  std::string text = "determinism: repeated train runs byte-identical";
  if (!diff.empty()) text = "determinism: reruns differ in" + diff;
  report(9, pass, text, seconds_since(t0), 0);
}

}  // namespace

int main() {
  const fs::path work = work_dir();
  try {
    criterion_gradients();
    criterion_chain_rule();
    criterion_sufficiency();
    criterion_masking();
    criterion_youden();
    criterion_auc();
    criterion_desk_run();
    criterion_ablation(work);
    criterion_determinism(work);
  } catch (const std::exception& e) {
    std::printf("acceptance harness aborted: %s\n", e.what());
    return 99;
  }
  std::printf("acceptance: %d of 9 criteria passed\n", 9 - g_failures);
  fs::remove_all(work);
  return g_failures;
}
