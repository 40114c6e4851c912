#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmib/rng.hpp"
#include "dmib/tensor.hpp"

namespace dmib {

// One dense layer y = x.W + b with W: [in x out], b: [1 x out].
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  Tensor apply(Tape& tape, const Tensor& x) const;
};

// Stack of linear layers, relu after every one (including the last), mapping
// a raw modality vector to a feature at the common width.
struct BackboneMlp {
  std::vector<LinearLayer> layers;

  Tensor forward(Tape& tape, const Tensor& x) const;
  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
};

// Two projections around a strict bottleneck: f -> z -> f*, each followed by
// relu and dropout; the second projection restores the input width.
struct IbModule {
  LinearLayer proj_in;   // N -> p
  LinearLayer proj_out;  // p -> N
  double dropout_rate = 0.5;

  std::size_t width() const { return proj_in.weight.rows(); }
  std::size_t bottleneck() const { return proj_in.weight.cols(); }

  // Returns (z, f*). Eval mode skips dropout and consumes no rng draws.
  std::pair<Tensor, Tensor> forward(Tape& tape, const Tensor& f, RngState& rng,
                                    bool training) const;
};

// Binary modality gates: all ones, or exactly one zero.
struct MaskVector {
  std::vector<double> m;
};

MaskVector all_ones_mask(std::size_t n);

// u >= 1/2 keeps every modality; u in [(i-1)/(2n), i/(2n)) zeroes modality i
// (1-based), so each modality is dropped with probability 1/(2n).
MaskVector sample_mask(std::size_t n, double u);

struct ModelConfig {
  std::vector<std::size_t> input_dims;       // one entry per modality
  std::vector<std::size_t> backbone_hidden;  // shared hidden widths, may be empty
  std::size_t feature_dim = 16;              // common width d
  std::size_t bottleneck = 0;                // p; 0 selects N/2
  std::size_t n_classes = 2;
  double dropout = 0.5;
  bool use_ib = true;

  void validate() const;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct ForwardOutput {
  std::vector<Tensor> features;         // f_i, each [batch x d]
  std::vector<Tensor> modality_logits;  // heads applied to the raw f_i
  MaskVector mask;
  Tensor fused;             // f, [batch x N]
  Tensor fused_logits;      // [batch x C]
  Tensor z;                 // [batch x p]; undefined without the bottleneck
  Tensor distilled;         // f*, [batch x N]; undefined without the bottleneck
  Tensor distilled_logits;  // undefined without the bottleneck
};

// Widens any feature narrower than d by nearest-neighbor column repetition;
// features already at width d pass through untouched.
std::vector<Tensor> equalize_dims(Tape& tape, const std::vector<Tensor>& features, std::size_t d);

class DmibNetwork {
 public:
  // Every parameter draws its initial values from an rng stream derived from
  // (init_seed, its own name), so adding or removing components never shifts
  // another parameter's initialization.
  DmibNetwork(const ModelConfig& config, std::uint64_t init_seed);

  std::size_t n_modalities() const { return backbones_.size(); }
  std::size_t feature_dim() const { return config_.feature_dim; }
  std::size_t fused_dim() const { return fused_dim_; }
  std::size_t n_classes() const { return config_.n_classes; }
  bool has_bottleneck() const { return config_.use_ib; }
  const ModelConfig& config() const { return config_; }

  // Stable-named shared handles; writing through them updates the network.
  const std::vector<NamedParam>& parameters() const { return params_; }
  std::vector<NamedParam>& parameters() { return params_; }

  std::vector<Tensor> extract_features(Tape& tape, const std::vector<Tensor>& batch) const;

  ForwardOutput forward(Tape& tape, const std::vector<Tensor>& batch, const MaskVector& mask,
                        RngState& dropout_rng, bool training) const;

  // Evaluation probabilities (row-major batch x C): softmax of the distilled
  // head when the bottleneck exists, of the fused head otherwise; all-ones
  // mask, dropout off.
  std::vector<double> predict_proba(const std::vector<Tensor>& batch) const;

 private:
  ModelConfig config_;
  std::size_t fused_dim_ = 0;
  std::vector<BackboneMlp> backbones_;
  std::vector<LinearLayer> modality_heads_;
  LinearLayer fused_head_;
  IbModule ib_;
  LinearLayer distilled_head_;
  std::vector<NamedParam> params_;
};

}  // namespace dmib
