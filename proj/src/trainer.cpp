#include "dmib/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dmib {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(decay >= 0.0 && decay <= 1.0)) throw ConfigError("train: decay must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("train: adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam eps must be positive");
  if (feature_dim == 0) throw ConfigError("train: feature_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
  if (!(test_frac >= 0.0 && test_frac < 1.0))
    throw ConfigError("train: test_frac must lie in [0, 1)");
  if (k_folds < 1) throw ConfigError("train: need at least one fold");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ConfigError("train: threshold must lie in [0, 1]");
  weights.validate();
  flags.validate();
}

ModelConfig TrainConfig::model_config(const std::vector<std::size_t>& input_dims,
                                      std::size_t n_classes) const {
  ModelConfig mc;
  mc.input_dims = input_dims;
  mc.backbone_hidden = backbone_hidden;
  mc.feature_dim = feature_dim;
  mc.bottleneck = bottleneck;
  mc.n_classes = n_classes;
  mc.dropout = dropout;
  mc.use_ib = flags.use_ib;
  return mc;
}

AdamState init_adam(const std::vector<NamedParam>& params) {
  AdamState st;
  st.m.resize(params.size());
  st.v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i].assign(params[i].tensor.size(), 0.0);
    st.v[i].assign(params[i].tensor.size(), 0.0);
  }
  return st;
}

void adam_step(std::vector<NamedParam>& params, AdamState& state, const TrainConfig& cfg,
               double lr_t) {
  if (state.m.size() != params.size())
    throw UsageError("adam: optimizer state does not match the parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].tensor.mutable_values();
    const bool has = params[i].tensor.has_grad();
    const std::vector<double>* g = has ? &params[i].tensor.grad() : nullptr;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? (*g)[j] : 0.0;
      if (!std::isfinite(gj))
        throw TrainingError("adam: non-finite gradient in '" + params[i].name + "' at step " +
                            std::to_string(state.step));
      m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * gj;
      v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * gj * gj;
      w[j] -= lr_t * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.adam_eps);
    }
  }
}

double lr_schedule(double lr0, double decay, std::size_t epoch, std::size_t total_epochs,
                   bool multiplicative) {
  if (!(lr0 > 0.0)) throw ParameterError("schedule: lr must be positive");
  if (epoch >= total_epochs) throw ParameterError("schedule: epoch out of range");
  const double lr = multiplicative
                        ? lr0 * std::pow(1.0 - decay, static_cast<double>(epoch))
                        : lr0 * (1.0 - decay * static_cast<double>(epoch));
  return std::max(lr, 0.01 * lr0);
}

namespace {

void shuffle_rows(std::vector<std::size_t>& rows, RngState& rng) {
  for (std::size_t i = rows.size(); i > 1; --i)
    std::swap(rows[i - 1],
              rows[static_cast<std::size_t>(rng.next_int(0, static_cast<std::int64_t>(i) - 1))]);
}

LossTerms terms_of(const LossBreakdown& bd) {
  return LossTerms{bd.total.item(), bd.fused, bd.modality, bd.distilled, bd.sufficiency};
}

std::vector<double> class_probs(Tape& tape, const DmibNetwork& net, const ForwardOutput& out) {
  const Tensor& logits = net.has_bottleneck() ? out.distilled_logits : out.fused_logits;
  return softmax(tape, logits).values();
}

}  // namespace

double grouped_selection_auc(const std::vector<double>& probs, const std::vector<int>& labels,
                             int n_classes, const std::vector<std::string>& groups) {
  if (groups.empty()) return selection_auc(probs, labels, n_classes);
  if (groups.size() != labels.size())
    throw UsageError("selection: group list length does not match label count");
  const std::size_t c_count = static_cast<std::size_t>(n_classes);
  std::vector<double> agg_probs;
  std::vector<int> agg_labels;
  for (std::size_t c = 0; c < c_count; ++c) {
    std::vector<double> col(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) col[i] = probs[i * c_count + c];
    const GroupedScores gs = median_aggregate(col, groups);
    if (c == 0) {
      agg_probs.assign(gs.groups.size() * c_count, 0.0);
      agg_labels.resize(gs.groups.size());
      for (std::size_t g = 0; g < gs.groups.size(); ++g) {
        const int label = labels[gs.members[g].front()];
        for (auto i : gs.members[g])
          if (labels[i] != label)
            throw DataError("selection: group '" + gs.groups[g] + "' mixes labels");
        agg_labels[g] = label;
      }
    }
    for (std::size_t g = 0; g < gs.scores.size(); ++g) agg_probs[g * c_count + c] = gs.scores[g];
  }
  return selection_auc(agg_probs, agg_labels, n_classes);
}

std::vector<double> predict_scores(const DmibNetwork& net, const MultimodalDataset& ds,
                                   const std::vector<std::size_t>& rows) {
  return net.predict_proba(batch_tensors(ds, rows));
}

MetricsReport evaluate_rows(const DmibNetwork& net, const MultimodalDataset& ds,
                            const std::vector<std::size_t>& rows, double threshold) {
  const std::vector<double> probs = predict_scores(net, ds, rows);
  const std::vector<int> labels = batch_labels(ds, rows);
  const std::vector<std::string> groups = batch_groups(ds, rows);
  const std::size_t c_count = net.n_classes();

  std::vector<double> agg_probs = probs;
  std::vector<int> agg_labels = labels;
  if (!groups.empty()) {
    agg_probs.clear();
    for (std::size_t c = 0; c < c_count; ++c) {
      std::vector<double> col(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) col[i] = probs[i * c_count + c];
      const GroupedScores gs = median_aggregate(col, groups);
      if (c == 0) {
        agg_probs.assign(gs.groups.size() * c_count, 0.0);
        agg_labels.resize(gs.groups.size());
        for (std::size_t g = 0; g < gs.groups.size(); ++g)
          agg_labels[g] = labels[gs.members[g].front()];
      }
      for (std::size_t g = 0; g < gs.scores.size(); ++g)
        agg_probs[g * c_count + c] = gs.scores[g];
    }
  }

  if (c_count == 2) {
    std::vector<double> pos(agg_labels.size());
    for (std::size_t i = 0; i < agg_labels.size(); ++i) pos[i] = agg_probs[i * 2 + 1];
    return MetricsReport::from_binary_scores(pos, agg_labels, threshold);
  }
  return MetricsReport::from_multiclass_scores(agg_probs, agg_labels,
                                               static_cast<int>(c_count));
}

FoldResult train_fold(const MultimodalDataset& ds, const SplitPlan& plan, std::size_t fold_index,
                      const TrainConfig& config) {
  config.validate();
  if (fold_index >= plan.folds.size())
    throw UsageError("train: fold index " + std::to_string(fold_index) + " out of range");
  const std::vector<std::size_t>& val_rows = plan.folds[fold_index];
  if (val_rows.empty())
    throw DataError("train: fold " + std::to_string(fold_index) + " has no validation rows");
  std::vector<std::size_t> train_rows;
  for (std::size_t j = 0; j < plan.folds.size(); ++j)
    if (j != fold_index)
      train_rows.insert(train_rows.end(), plan.folds[j].begin(), plan.folds[j].end());
  // A one-fold plan trains and validates on the same rows.
  if (train_rows.empty()) train_rows = val_rows;

  const std::uint64_t fold_seed =
      RngState::derive(config.seed, "fold" + std::to_string(fold_index)).seed;
  std::vector<std::size_t> input_dims;
  for (const auto& mod : ds.modalities) input_dims.push_back(mod.n_features);
  FoldResult result{DmibNetwork(config.model_config(input_dims, ds.n_classes), fold_seed),
                    {},
                    0.0};
  DmibNetwork& net = result.network;
  const std::size_t n_mod = net.n_modalities();

  std::vector<NamedParam> params = net.parameters();
  AdamState adam = init_adam(params);
  RngState mask_rng = RngState::derive(fold_seed, "mask");
  RngState dropout_rng = RngState::derive(fold_seed, "dropout");
  RngState shuffle_rng = RngState::derive(fold_seed, "shuffle");

  const std::vector<Tensor> val_tensors = batch_tensors(ds, val_rows);
  const std::vector<int> val_labels = batch_labels(ds, val_rows);
  const std::vector<std::string> val_groups = batch_groups(ds, val_rows);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr_t =
        lr_schedule(config.lr, config.decay, epoch, config.epochs, config.multiplicative_decay);
    shuffle_rows(train_rows, shuffle_rng);
    LossTerms sums;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, train_rows.size());
      const std::vector<std::size_t> rows(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                                          train_rows.begin() + static_cast<std::ptrdiff_t>(end));
      const MaskVector mask =
          n_mod >= 2 ? sample_mask(n_mod, mask_rng.next_double()) : all_ones_mask(n_mod);
      Tape tape;
      try {
        const ForwardOutput out =
            net.forward(tape, batch_tensors(ds, rows), mask, dropout_rng, /*training=*/true);
        const LossBreakdown bd =
            total_loss(tape, out, batch_labels(ds, rows), config.weights, config.flags);
        tape.backward(bd.total);
        adam_step(params, adam, config, lr_t);
        const LossTerms t = terms_of(bd);
        sums.total += t.total;
        sums.fused += t.fused;
        sums.modality += t.modality;
        sums.distilled += t.distilled;
        sums.sufficiency += t.sufficiency;
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (fold " + std::to_string(fold_index) +
                            ", epoch " + std::to_string(epoch) + ", batch at row " +
                            std::to_string(start) + ")");
      }
      for (auto& p : params) p.tensor.zero_grad();
      ++steps;
    }

    EpochLog log;
    log.fold = fold_index;
    log.epoch = epoch;
    log.steps = steps;
    log.lr = lr_t;
    log.train = LossTerms{sums.total / static_cast<double>(steps),
                          sums.fused / static_cast<double>(steps),
                          sums.modality / static_cast<double>(steps),
                          sums.distilled / static_cast<double>(steps),
                          sums.sufficiency / static_cast<double>(steps)};
    Tape vtape;
    RngState unused;
    const ForwardOutput vout =
        net.forward(vtape, val_tensors, all_ones_mask(n_mod), unused, /*training=*/false);
    log.val = terms_of(total_loss(vtape, vout, val_labels, config.weights, config.flags));
    log.val_auc =
        grouped_selection_auc(class_probs(vtape, net, vout), val_labels, ds.n_classes, val_groups);
    result.log.push_back(log);
  }
  result.val_auc = result.log.back().val_auc;
  return result;
}

namespace {

nlohmann::json terms_json(const LossTerms& t) {
  return nlohmann::json{{"total", t.total},
                        {"fused", t.fused},
                        {"modality", t.modality},
                        {"distilled", t.distilled},
                        {"sufficiency", t.sufficiency}};
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["plan_hash"] = hex64(plan_hash);
  j["flags"] = flags;
  j["fold_val_auc"] = fold_val_auc;
  j["selected_fold"] = selected_fold;
  j["test"] = test.to_json();
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : epochs)
    eps.push_back(nlohmann::json{{"fold", e.fold},
                                 {"epoch", e.epoch},
                                 {"steps", e.steps},
                                 {"lr", e.lr},
                                 {"train", terms_json(e.train)},
                                 {"val", terms_json(e.val)},
                                 {"val_auc", e.val_auc}});
  j["epochs"] = std::move(eps);
  return j;
}

CrossValResult cross_validate(const MultimodalDataset& ds, const SplitPlan& plan,
                              const TrainConfig& config) {
  config.validate();
  if (plan.folds.empty()) throw UsageError("cross-validate: plan has no folds");
  if (plan.test.empty()) throw ConfigError("cross-validate: plan reserves no test rows");

  std::vector<FoldResult> folds;
  folds.reserve(plan.folds.size());
  for (std::size_t i = 0; i < plan.folds.size(); ++i)
    folds.push_back(train_fold(ds, plan, i, config));

  std::size_t best = 0;
  for (std::size_t i = 1; i < folds.size(); ++i)
    if (folds[i].val_auc > folds[best].val_auc) best = i;

  RunRecord rec;
  rec.seed = config.seed;
  rec.plan_hash = plan.hash();
  rec.flags = config.flags.describe();
  for (const auto& f : folds) {
    rec.epochs.insert(rec.epochs.end(), f.log.begin(), f.log.end());
    rec.fold_val_auc.push_back(f.val_auc);
  }
  rec.selected_fold = best;
  rec.test = evaluate_rows(folds[best].network, ds, plan.test, config.threshold);
  rec.test.fold_val_auc = rec.fold_val_auc;
  rec.test.selected_fold = best;
  return CrossValResult{std::move(rec), std::move(folds[best].network)};
}

const AblationFlags kAblationRows[6] = {
    {true, false, false, false, false},  // plain concatenation fusion
    {false, true, true, false, true},
    {true, true, true, false, true},
    {true, true, true, true, false},
    {true, true, false, true, true},
    {true, true, true, true, true},  // the full model
};

std::vector<AblationRun> run_ablation(const MultimodalDataset& ds, const SplitPlan& plan,
                                      const TrainConfig& config) {
  std::vector<AblationRun> out;
  out.reserve(6);
  for (const auto& flags : kAblationRows) {
    TrainConfig c = config;
    c.flags = flags;
    out.push_back(AblationRun{flags, cross_validate(ds, plan, c).record});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRun>& runs) {
  std::ostringstream os;
  os << "setting  L_f  IB  L_f*  L_suff  L_mod  ";
  os << "auc      accuracy  f1_macro  val_auc(best)\n";
  const auto mark = [](bool on) { return on ? "x" : "."; };
  char buf[64];
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& f = runs[i].flags;
    const auto& t = runs[i].record.test;
    std::snprintf(buf, sizeof buf, "%-7zu  %-3s  %-2s  %-4s  %-6s  %-5s  ", i + 1, mark(f.loss_fused),
                  mark(f.use_ib), mark(f.loss_distilled), mark(f.loss_sufficiency),
                  mark(f.loss_modality));
    os << buf;
    std::snprintf(buf, sizeof buf, "%.4f   %.4f    %.4f    %.4f\n", t.auc, t.accuracy, t.f1_macro,
                  runs[i].record.fold_val_auc[runs[i].record.selected_fold]);
    os << buf;
  }
  if (!runs.empty()) {
    char hex[19];
    std::snprintf(hex, sizeof hex, "0x%016llx",
                  static_cast<unsigned long long>(runs.front().record.plan_hash));
    os << "plan hash (shared): " << hex << "\n";
  }
  return os.str();
}

}  // namespace dmib
