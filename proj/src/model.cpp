#include "dmib/model.hpp"

#include <cmath>

namespace dmib {

Tensor LinearLayer::apply(Tape& tape, const Tensor& x) const {
  return add_rowvec(tape, matmul(tape, x, weight), bias);
}

Tensor BackboneMlp::forward(Tape& tape, const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : layers) h = relu(tape, layer.apply(tape, h));
  return h;
}

std::pair<Tensor, Tensor> IbModule::forward(Tape& tape, const Tensor& f, RngState& rng,
                                            bool training) const {
  Tensor z = dropout(tape, relu(tape, proj_in.apply(tape, f)), dropout_rate, rng, training);
  Tensor fstar = dropout(tape, relu(tape, proj_out.apply(tape, z)), dropout_rate, rng, training);
  return {z, fstar};
}

MaskVector all_ones_mask(std::size_t n) { return MaskVector{std::vector<double>(n, 1.0)}; }

MaskVector sample_mask(std::size_t n, double u) {
  if (n < 2) throw ParameterError("sample_mask: need at least 2 modalities");
  if (!(u >= 0.0 && u <= 1.0)) throw ParameterError("sample_mask: u must lie in [0, 1]");
  MaskVector mask = all_ones_mask(n);
  if (u >= 0.5) return mask;
  std::size_t i = static_cast<std::size_t>(u * 2.0 * static_cast<double>(n));
  if (i >= n) i = n - 1;
  mask.m[i] = 0.0;
  return mask;
}

void ModelConfig::validate() const {
  if (input_dims.empty()) throw ConfigError("model: at least one modality is required");
  for (std::size_t i = 0; i < input_dims.size(); ++i)
    if (input_dims[i] == 0)
      throw ConfigError("model: modality " + std::to_string(i) + " has zero input width");
  for (std::size_t h : backbone_hidden)
    if (h == 0) throw ConfigError("model: zero-width hidden layer");
  if (feature_dim == 0) throw ConfigError("model: feature_dim must be positive");
  if (n_classes < 2) throw ConfigError("model: need at least 2 classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (use_ib) {
    const std::size_t n_fused = input_dims.size() * feature_dim;
    const std::size_t p = bottleneck == 0 ? n_fused / 2 : bottleneck;
    if (p == 0 || p >= n_fused)
      throw ConfigError("model: bottleneck width " + std::to_string(p) +
                        " must satisfy 0 < p < " + std::to_string(n_fused));
  }
}

std::vector<Tensor> equalize_dims(Tape& tape, const std::vector<Tensor>& features,
                                  std::size_t d) {
  std::vector<Tensor> out;
  out.reserve(features.size());
  for (const auto& f : features)
    out.push_back(f.cols() == d ? f : upsample_width(tape, f, d));
  return out;
}

namespace {

LinearLayer make_linear(std::size_t in, std::size_t out, std::uint64_t init_seed,
                        const std::string& name, std::vector<NamedParam>& registry) {
  RngState rng = RngState::derive(init_seed, "init/" + name + ".weight");
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.next_uniform(-bound, bound);
  LinearLayer layer;
  layer.weight = Tensor({in, out}, std::move(w), true);
  layer.bias = Tensor::zeros({1, out}, true);
  registry.push_back({name + ".weight", layer.weight});
  registry.push_back({name + ".bias", layer.bias});
  return layer;
}

}  // namespace

DmibNetwork::DmibNetwork(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  const std::size_t n = config_.input_dims.size();
  const std::size_t d = config_.feature_dim;
  fused_dim_ = n * d;
  if (config_.use_ib && config_.bottleneck == 0) config_.bottleneck = fused_dim_ / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string prefix = "backbone" + std::to_string(i);
    BackboneMlp bb;
    std::size_t in = config_.input_dims[i];
    std::size_t li = 0;
    for (std::size_t h : config_.backbone_hidden) {
      bb.layers.push_back(
          make_linear(in, h, init_seed, prefix + ".layer" + std::to_string(li), params_));
      in = h;
      ++li;
    }
    bb.layers.push_back(
        make_linear(in, d, init_seed, prefix + ".layer" + std::to_string(li), params_));
    backbones_.push_back(std::move(bb));
    modality_heads_.push_back(make_linear(d, config_.n_classes, init_seed,
                                          "modality_head" + std::to_string(i), params_));
  }
  fused_head_ = make_linear(fused_dim_, config_.n_classes, init_seed, "fused_head", params_);
  if (config_.use_ib) {
    ib_.proj_in = make_linear(fused_dim_, config_.bottleneck, init_seed, "ib.proj_in", params_);
    ib_.proj_out = make_linear(config_.bottleneck, fused_dim_, init_seed, "ib.proj_out", params_);
    ib_.dropout_rate = config_.dropout;
    distilled_head_ =
        make_linear(fused_dim_, config_.n_classes, init_seed, "distilled_head", params_);
  }
}

std::vector<Tensor> DmibNetwork::extract_features(Tape& tape,
                                                  const std::vector<Tensor>& batch) const {
  if (batch.size() != backbones_.size())
    throw ConfigError("forward: got " + std::to_string(batch.size()) + " modality inputs for " +
                      std::to_string(backbones_.size()) + " backbones");
  std::vector<Tensor> feats;
  feats.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].cols() != config_.input_dims[i])
      throw ConfigError("forward: modality " + std::to_string(i) + " has width " +
                        std::to_string(batch[i].cols()) + ", expected " +
                        std::to_string(config_.input_dims[i]));
    feats.push_back(backbones_[i].forward(tape, batch[i]));
  }
  return equalize_dims(tape, feats, config_.feature_dim);
}

ForwardOutput DmibNetwork::forward(Tape& tape, const std::vector<Tensor>& batch,
                                   const MaskVector& mask, RngState& dropout_rng,
                                   bool training) const {
  if (mask.m.size() != backbones_.size())
    throw ConfigError("forward: mask length " + std::to_string(mask.m.size()) +
                      " does not match modality count " + std::to_string(backbones_.size()));
  ForwardOutput out;
  out.mask = mask;
  out.features = extract_features(tape, batch);
  out.modality_logits.reserve(out.features.size());
  for (std::size_t i = 0; i < out.features.size(); ++i)
    out.modality_logits.push_back(modality_heads_[i].apply(tape, out.features[i]));
  std::vector<Tensor> blocks;
  blocks.reserve(out.features.size());
  for (std::size_t i = 0; i < out.features.size(); ++i)
    blocks.push_back(mask.m[i] == 1.0 ? out.features[i] : scale(tape, out.features[i], 0.0));
  out.fused = hconcat(tape, blocks);
  out.fused_logits = fused_head_.apply(tape, out.fused);
  if (config_.use_ib) {
    auto [z, fstar] = ib_.forward(tape, out.fused, dropout_rng, training);
    out.z = z;
    out.distilled = fstar;
    out.distilled_logits = distilled_head_.apply(tape, fstar);
  }
  return out;
}

std::vector<double> DmibNetwork::predict_proba(const std::vector<Tensor>& batch) const {
  Tape tape;
  RngState unused;
  ForwardOutput out =
      forward(tape, batch, all_ones_mask(n_modalities()), unused, /*training=*/false);
  const Tensor& logits = config_.use_ib ? out.distilled_logits : out.fused_logits;
  return softmax(tape, logits).values();
}

}  // namespace dmib
