#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmib/data.hpp"
#include "dmib/losses.hpp"
#include "dmib/metrics.hpp"
#include "dmib/model.hpp"

namespace dmib {

struct TrainConfig {
  double lr = 1e-6;
  double decay = 1e-2;
  bool multiplicative_decay = false;  // default is linear-in-epoch decay
  std::size_t batch_size = 8;
  std::size_t epochs = 70;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights weights;
  AblationFlags flags;
  std::uint64_t seed = 42;
  // Architecture.
  std::vector<std::size_t> backbone_hidden;
  std::size_t feature_dim = 16;
  std::size_t bottleneck = 0;  // 0 selects N/2
  double dropout = 0.5;
  // Protocol.
  double test_frac = 0.2;
  std::size_t k_folds = 5;
  double threshold = 0.5;

  void validate() const;
  ModelConfig model_config(const std::vector<std::size_t>& input_dims,
                           std::size_t n_classes) const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

AdamState init_adam(const std::vector<NamedParam>& params);

// One bias-corrected Adam update over every parameter. A parameter without a
// gradient buffer acts as if its gradient were zero; a non-finite gradient
// aborts, naming the parameter and step.
void adam_step(std::vector<NamedParam>& params, AdamState& state, const TrainConfig& cfg,
               double lr_t);

// Linear: lr0 * (1 - decay * epoch); multiplicative: lr0 * (1 - decay)^epoch.
// Both are floored at 0.01 * lr0.
double lr_schedule(double lr0, double decay, std::size_t epoch, std::size_t total_epochs,
                   bool multiplicative = false);

struct LossTerms {
  double total = 0.0;
  double fused = 0.0;
  double modality = 0.0;
  double distilled = 0.0;
  double sufficiency = 0.0;
};

struct EpochLog {
  std::size_t fold = 0;
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps taken this epoch
  double lr = 0.0;
  LossTerms train;  // means over the epoch's optimizer steps
  LossTerms val;    // one evaluation-mode pass over the validation fold
  double val_auc = 0.0;
};

struct FoldResult {
  DmibNetwork network;
  std::vector<EpochLog> log;
  double val_auc = 0.0;  // final epoch
};

// Trains on every fold except fold_index and validates on fold_index (a
// single-fold plan trains and validates on the same rows). The dataset must
// be preprocessed. Fully deterministic given (dataset, plan, config).
FoldResult train_fold(const MultimodalDataset& ds, const SplitPlan& plan, std::size_t fold_index,
                      const TrainConfig& config);

struct RunRecord {
  std::vector<EpochLog> epochs;  // all folds, in fold order
  std::vector<double> fold_val_auc;
  std::size_t selected_fold = 0;
  MetricsReport test;
  std::uint64_t seed = 0;
  std::uint64_t plan_hash = 0;
  std::string flags;

  nlohmann::json to_json() const;
};

struct CrossValResult {
  RunRecord record;
  DmibNetwork network;  // the selected fold's model
};

// Trains k models, keeps the one with the top final validation AUC (ties go
// to the lowest fold index) and evaluates it on the reserved test rows, with
// per-group median aggregation when the dataset carries group ids.
CrossValResult cross_validate(const MultimodalDataset& ds, const SplitPlan& plan,
                              const TrainConfig& config);

// Evaluation-mode class probabilities, row-major rows x C.
std::vector<double> predict_scores(const DmibNetwork& net, const MultimodalDataset& ds,
                                   const std::vector<std::size_t>& rows);

// Metrics over the listed rows; group medians are taken first when group ids
// exist.
MetricsReport evaluate_rows(const DmibNetwork& net, const MultimodalDataset& ds,
                            const std::vector<std::size_t>& rows, double threshold = 0.5);

// AUC used for selection/validation: per-group medians first, then plain AUC
// for binary tasks or macro one-vs-rest otherwise.
double grouped_selection_auc(const std::vector<double>& probs, const std::vector<int>& labels,
                             int n_classes, const std::vector<std::string>& groups);

// The six ablation settings, in presentation order: each row toggles the
// fused loss, the bottleneck pathway, the distilled loss, the sufficiency
// loss and the per-modality loss.
extern const AblationFlags kAblationRows[6];

struct AblationRun {
  AblationFlags flags;
  RunRecord record;
};

// Runs every ablation row on the same plan and seed.
std::vector<AblationRun> run_ablation(const MultimodalDataset& ds, const SplitPlan& plan,
                                      const TrainConfig& config);

std::string ablation_table(const std::vector<AblationRun>& runs);

}  // namespace dmib
