#pragma once

#include <string>
#include <vector>

#include "dmib/model.hpp"
#include "dmib/tensor.hpp"

namespace dmib {

struct LossWeights {
  double alpha = 1.0;  // modality supervision weight
  double beta = 10.0;  // sufficiency weight
  bool sufficiency_stop_fused = false;   // freeze the fused side of the KL
  bool modality_loss_on_masked = false;  // supervise masked modalities too

  void validate() const;
};

// Component switches for the ablation grid. The four loss_* flags pick
// objective terms; use_ib controls whether the bottleneck pathway exists.
struct AblationFlags {
  bool loss_fused = true;
  bool use_ib = true;
  bool loss_distilled = true;
  bool loss_sufficiency = true;
  bool loss_modality = true;

  void validate() const;
  std::string describe() const;  // e.g. "L_f+IB+L_f*+L_suff+L_mod"
};

// KL(softmax(fused logits) || softmax(distilled logits)), mean over batch.
// Gradients flow through both sides unless stop_fused_gradient severs the
// fused argument.
Tensor sufficiency_loss(Tape& tape, const Tensor& fused_logits, const Tensor& distilled_logits,
                        bool stop_fused_gradient = false);

struct LossBreakdown {
  Tensor total;
  double fused = 0.0;
  double modality = 0.0;  // sum over supervised modalities, before alpha
  double distilled = 0.0;
  double sufficiency = 0.0;  // before beta
};

// total = L_fused + alpha * sum_i L_modality_i + L_distilled
//       + beta * L_sufficiency.
// Switched-off terms contribute no graph nodes at all, so deactivating one
// reproduces bitwise the gradients of a graph that never built it. Masked
// modalities are skipped unless weights.modality_loss_on_masked is set.
LossBreakdown total_loss(Tape& tape, const ForwardOutput& out, const std::vector<int>& labels,
                         const LossWeights& weights, const AblationFlags& active);

}  // namespace dmib
