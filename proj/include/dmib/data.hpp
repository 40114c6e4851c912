#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmib/error.hpp"
#include "dmib/rng.hpp"
#include "dmib/tensor.hpp"

namespace dmib {

struct Modality {
  std::string name;
  std::size_t n_features = 0;
  std::vector<double> values;         // n_samples x n_features, row-major
  std::vector<std::uint8_t> missing;  // parallel to values; 1 marks missing

  double at(std::size_t r, std::size_t c) const { return values[r * n_features + c]; }
  bool is_missing(std::size_t r, std::size_t c) const {
    return missing[r * n_features + c] != 0;
  }
};

struct MultimodalDataset {
  std::vector<std::string> sample_ids;
  std::vector<int> labels;
  std::vector<std::string> group_ids;  // empty when the labels table has no group column
  std::vector<Modality> modalities;
  int n_classes = 0;

  std::size_t n_samples() const { return sample_ids.size(); }
  bool has_groups() const { return !group_ids.empty(); }
  const Modality* find_modality(const std::string& name) const;
  void validate() const;
};

struct LoadReport {
  // Ids seen in some input file but absent from at least one other, sorted.
  std::vector<std::string> dropped_ids;
};

// Delimiter-separated tables (tab or comma, sniffed from the header): first
// row header, first column sample_id. Modality cells are numeric or empty
// (missing). The labels table carries sample_id, label and an optional
// group_id column. Rows are aligned on the id intersection in labels order.
MultimodalDataset load_modalities(const std::vector<std::string>& table_paths,
                                  const std::string& labels_path, LoadReport* report = nullptr);

// Replaces every missing cell with its column mean over the observed cells of
// train_rows; the same means fill validation/test rows so nothing leaks.
MultimodalDataset impute_mean(const MultimodalDataset& ds,
                              const std::vector<std::size_t>& train_rows);

struct ColumnStats {
  std::vector<double> mu;
  std::vector<double> sigma;  // population std; < 1e-12 means center only
};

// (x - mu) / sigma with stats fit on train_rows only; requires imputation
// first. Near-constant columns are centered without scaling.
MultimodalDataset normalize_zscore(const MultimodalDataset& ds,
                                   const std::vector<std::size_t>& train_rows,
                                   std::vector<ColumnStats>* stats_out = nullptr);

// Impute-then-normalize pipeline with the fitted statistics kept so the same
// transform can be replayed on new data (checkpoints store one of these).
struct Preprocessor {
  struct ModalityStats {
    std::string name;
    std::vector<double> impute;  // column fill values
    ColumnStats zscore;
  };
  std::vector<ModalityStats> stats;

  static Preprocessor fit(const MultimodalDataset& ds, const std::vector<std::size_t>& train_rows);
  MultimodalDataset apply(const MultimodalDataset& ds) const;
};

struct SplitPlan {
  std::vector<std::size_t> test;
  std::vector<std::vector<std::size_t>> folds;
  std::uint64_t seed = 0;

  std::uint64_t hash() const;
  std::vector<std::size_t> train_rows() const;  // union of all folds, ascending
  void validate(std::size_t n_samples) const;   // disjoint cover
};

// Reserves round(test_frac * n_c) units of each class for the test set, then
// deals the remainder round-robin into k folds after a seeded shuffle. Units
// are single rows, or whole groups when group_ids are given, so no group ever
// spans the split.
SplitPlan split_stratified(const std::vector<int>& labels, double test_frac, std::size_t k,
                           std::uint64_t seed, const std::vector<std::string>& group_ids = {});

struct NoiseSpec {
  std::string target;          // modality to replace; ignored when appending
  bool append = false;
  std::string name = "noise";  // appended modality's name
  std::size_t n_features = 1;  // appended modality's width
  bool integer = true;         // integer-uniform [lo, hi] vs real-uniform [lo, hi)
  double lo = 0.0;
  double hi = 100.0;
};

// Replaces the target modality's values with (or appends a new modality of)
// label-independent draws, deterministic per seed.
MultimodalDataset inject_noise_channel(const MultimodalDataset& ds, const NoiseSpec& spec,
                                       std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_samples = 500;  // logical samples (groups when repeats > 1)
  std::size_t n_modalities = 2;
  std::size_t n_features = 10;  // per modality
  long informative = 0;         // modality carrying the signal; -1 for none
  std::size_t n_classes = 2;
  double separation = 5.0;   // class-mean offset on the informative modality
  double noise_floor = 1.0;  // gaussian sigma around the class means
  std::size_t repeats = 1;   // rows per sample; > 1 emits group ids

  void validate() const;
};

// One modality carries Gaussian class clusters (mean separation * onehot of
// the class), the rest are standard normal noise.
MultimodalDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Table writers emitting exactly the format load_modalities ingests; values
// are printed with enough digits to round-trip bit-exactly.
void save_modality_table(const MultimodalDataset& ds, std::size_t modality,
                         const std::string& path);
void save_labels_table(const MultimodalDataset& ds, const std::string& path);

// Versioned little-endian binary cache with a bit-exact round trip.
void save_cache(const MultimodalDataset& ds, const std::string& path);
MultimodalDataset load_cache(const std::string& path);

// Gathers the listed rows into one [rows x features] tensor per modality.
// The dataset must be fully imputed.
std::vector<Tensor> batch_tensors(const MultimodalDataset& ds,
                                  const std::vector<std::size_t>& rows);
std::vector<int> batch_labels(const MultimodalDataset& ds, const std::vector<std::size_t>& rows);
std::vector<std::string> batch_groups(const MultimodalDataset& ds,
                                      const std::vector<std::size_t>& rows);

}  // namespace dmib
