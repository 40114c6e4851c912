#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmib/error.hpp"
#include "dmib/rng.hpp"

namespace dmib {

// Exact finite joint distribution over (fused feature F, distilled feature
// F*, label Y). All quantities below are computed by exhaustive summation in
// nats, with the 0 log 0 = 0 convention.
struct DiscreteJoint {
  std::size_t nf = 0, nfs = 0, ny = 0;
  std::vector<double> p;  // p[(f * nfs + fs) * ny + y]

  double at(std::size_t f, std::size_t fs, std::size_t y) const {
    return p[(f * nfs + fs) * ny + y];
  }
  double& at(std::size_t f, std::size_t fs, std::size_t y) {
    return p[(f * nfs + fs) * ny + y];
  }

  // Entries >= 0 and total mass 1 within 1e-12.
  void validate() const;

  std::vector<double> marginal_f() const;
  std::vector<double> marginal_fs() const;
  std::vector<double> marginal_y() const;
  std::vector<double> marginal_f_fs() const;  // nf x nfs
  std::vector<double> marginal_f_y() const;   // nf x ny
  std::vector<double> marginal_fs_y() const;  // nfs x ny

  // Normalized i.i.d. uniform entries.
  static DiscreteJoint random(std::size_t nf, std::size_t nfs, std::size_t ny, RngState& rng);

  // Text round trip: a header with the three alphabet sizes, then one
  // probability per line in row-major order.
  void save_text(std::ostream& os) const;
  static DiscreteJoint load_text(std::istream& is);
};

// Total map from F indices to F* indices.
struct DeterministicEncoder {
  std::vector<std::size_t> map;

  void validate(std::size_t nfs) const;
  static DeterministicEncoder random(std::size_t nf, std::size_t nfs, RngState& rng);
  static DeterministicEncoder identity(std::size_t nf);
  static DeterministicEncoder constant(std::size_t nf, std::size_t target);
};

enum class VarPair { FusedDistilled, FusedLabel, DistilledLabel };

// -sum p log p over a probability vector, in nats.
double entropy(const std::vector<double>& dist);

double mutual_information(const DiscreteJoint& joint, VarPair vars);

// I(F; F* | Y).
double conditional_mi(const DiscreteJoint& joint);

// Builds the joint p(f) . [fs = enc(f)] . p(y|f) and returns
// |I(F;F*) - I(F;F*|Y) - I(F*;Y)|, which is 0 for a deterministic encoder.
double verify_chain_rule(const std::vector<double>& p_f, const DeterministicEncoder& enc,
                         const std::vector<std::vector<double>>& p_y_given_f);

DiscreteJoint joint_from_encoder(const std::vector<double>& p_f, const DeterministicEncoder& enc,
                                 const std::vector<std::vector<double>>& p_y_given_f);

struct SufficiencyCheck {
  double kl_term;  // E over p(f, f*) of KL(p(y|f) || p(y|f*))
  double mi_gap;   // I(Y;F) - I(Y;F*)
};

// When f* is a function of f, mi_gap >= 0 always, and kl_term = 0 forces
// mi_gap = 0.
SufficiencyCheck verify_sufficiency_proposition(const DiscreteJoint& joint);

// I(F;F*|Y) - gamma . I(F*;Y). Diagnostic only; nothing optimizes this
// quantity directly.
double ib_objective(const DiscreteJoint& joint, double gamma);

// --- random instance builders for the verification harness -----------------

std::vector<double> random_distribution(std::size_t n, RngState& rng);

// Rows are conditional label distributions p(y|f).
std::vector<std::vector<double>> random_conditional(std::size_t nf, std::size_t ny, RngState& rng);

// Random p(f) and encoder, joint assembled so that f* = enc(f) exactly.
DiscreteJoint random_encoder_joint(std::size_t nf, std::size_t nfs, std::size_t ny, RngState& rng,
                                   DeterministicEncoder* enc_out = nullptr);

// Joint built so p(y|f) depends on f only through enc(f); the hypothesis of
// the sufficiency proposition holds exactly.
DiscreteJoint equal_posterior_joint(std::size_t nf, std::size_t nfs, std::size_t ny, RngState& rng);

}  // namespace dmib
