#include "dmib/losses.hpp"

namespace dmib {

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0))
    throw ConfigError("loss weights: alpha and beta must be >= 0");
}

void AblationFlags::validate() const {
  if ((loss_distilled || loss_sufficiency) && !use_ib)
    throw ConfigError("ablation: distilled/sufficiency losses require the bottleneck");
  if (!loss_fused && !loss_modality && !loss_distilled && !loss_sufficiency)
    throw ConfigError("ablation: no loss term active, nothing to optimize");
}

std::string AblationFlags::describe() const {
  std::string s;
  auto tag = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  tag(loss_fused, "L_f");
  tag(use_ib, "IB");
  tag(loss_distilled, "L_f*");
  tag(loss_sufficiency, "L_suff");
  tag(loss_modality, "L_mod");
  return s;
}

Tensor sufficiency_loss(Tape& tape, const Tensor& fused_logits, const Tensor& distilled_logits,
                        bool stop_fused_gradient) {
  if (!fused_logits.defined() || !distilled_logits.defined() ||
      fused_logits.shape() != distilled_logits.shape())
    throw UsageError("sufficiency_loss: fused and distilled logits must share a shape");
  const Tensor fused = stop_fused_gradient ? detach(fused_logits) : fused_logits;
  return kl_div(tape, softmax(tape, fused), softmax(tape, distilled_logits));
}

LossBreakdown total_loss(Tape& tape, const ForwardOutput& out, const std::vector<int>& labels,
                         const LossWeights& weights, const AblationFlags& active) {
  weights.validate();
  active.validate();
  if ((active.loss_distilled || active.loss_sufficiency) && !out.distilled_logits.defined())
    throw ConfigError("total_loss: flags need the bottleneck but the network has none");

  LossBreakdown bd;
  std::vector<Tensor> terms;
  if (active.loss_fused) {
    Tensor t = cross_entropy(tape, out.fused_logits, labels);
    bd.fused = t.item();
    terms.push_back(t);
  }
  if (active.loss_modality) {
    Tensor mod_sum;
    for (std::size_t i = 0; i < out.modality_logits.size(); ++i) {
      if (out.mask.m[i] == 0.0 && !weights.modality_loss_on_masked) continue;
      Tensor t = cross_entropy(tape, out.modality_logits[i], labels);
      mod_sum = mod_sum.defined() ? add(tape, mod_sum, t) : t;
    }
    if (mod_sum.defined()) {
      bd.modality = mod_sum.item();
      terms.push_back(scale(tape, mod_sum, weights.alpha));
    }
  }
  if (active.loss_distilled) {
    Tensor t = cross_entropy(tape, out.distilled_logits, labels);
    bd.distilled = t.item();
    terms.push_back(t);
  }
  if (active.loss_sufficiency) {
    Tensor t = sufficiency_loss(tape, out.fused_logits, out.distilled_logits,
                                weights.sufficiency_stop_fused);
    bd.sufficiency = t.item();
    terms.push_back(scale(tape, t, weights.beta));
  }
  if (terms.empty()) throw ConfigError("total_loss: every selected term was empty");
  bd.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) bd.total = add(tape, bd.total, terms[i]);
  return bd;
}

}  // namespace dmib
