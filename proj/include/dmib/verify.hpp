#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmib {

// One named residual check: `measured` compared against `bound` in the
// direction given by `at_most`.
struct VerifyCheck {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool at_most = true;  // pass iff measured <= bound (else measured >= bound)
  bool pass = false;
  std::string detail;  // offending instance, serialized, when the check fails

  static VerifyCheck make(std::string name, double measured, double bound, bool at_most = true);
};

struct VerifyReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<VerifyCheck> checks;

  bool all_pass() const;
  std::string to_text() const;
};

// Runs the information-theory identities (chain rule, sufficiency
// proposition) over random instances plus canonical degenerate encoders,
// and the finite-difference gradient sweep. Exit-code contract: callers
// should return 0 iff all_pass().
VerifyReport run_verification(std::size_t trials, std::uint64_t seed);

// Max relative error between analytic and central-difference gradients over
// every differentiable tensor op, 20 random instances each.
double max_grad_error_ops(std::uint64_t seed);

// Same comparison for the full composite training loss on a toy network
// (2 modalities, fused width 8, bottleneck 4, 2 classes, batch 4),
// differentiated with respect to every parameter.
double grad_error_composite(std::uint64_t seed);

}  // namespace dmib
