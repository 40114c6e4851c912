#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmib/error.hpp"

#include "json.hpp"

namespace dmib {

// Rank-statistic AUC (Mann-Whitney, ties at half credit). Internally also
// integrates the ROC curve with trapezoids; the two must agree within 1e-12
// or the call aborts, so a returned value is self-checked.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Confusion {
  double accuracy;
  double sensitivity;
  double specificity;
};

// Threshold applies as score >= threshold -> predicted positive.
Confusion confusion_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                            double threshold = 0.5);

// w . sensitivity + (1 - w) . specificity.
double weighted_youden(double se, double sp, double w);

struct F1Result {
  double macro_f1;
  double weighted_f1;
  double accuracy;
};

// Per-class F1 with the 0/0 -> 0 convention; macro averages over all C
// classes, weighted averages by label support.
F1Result f1_scores(const std::vector<int>& pred, const std::vector<int>& labels, int n_classes);

struct GroupedScores {
  std::vector<std::string> groups;  // order of first appearance
  std::vector<double> scores;       // per-group medians
  std::vector<std::vector<std::size_t>> members;
};

// Median per group; even-sized groups take the mean of the two middle values.
GroupedScores median_aggregate(const std::vector<double>& scores,
                               const std::vector<std::string>& group_ids);

struct MetricsReport {
  int n_classes = 2;
  std::size_t n_samples = 0;
  double auc = 0.0;  // binary: rank AUC; multi-class: macro one-vs-rest AUC
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  // Binary only.
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::map<std::string, double> jw;  // weight label ("0.5") -> index value

  // Cross-validation context, when available.
  std::vector<double> fold_val_auc;
  std::optional<std::size_t> selected_fold;

  // Binary: scores are probabilities of class 1. Multi-class: class_scores
  // holds one score column per class (row-major n x C).
  static MetricsReport from_binary_scores(const std::vector<double>& scores,
                                          const std::vector<int>& labels, double threshold = 0.5);
  static MetricsReport from_multiclass_scores(const std::vector<double>& class_scores,
                                              const std::vector<int>& labels, int n_classes);

  // Display section rounded to 4 decimals plus a machine block with full
  // precision; key order is fixed so identical reports serialize identically.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// Selection/reporting score for a validation or test set: plain AUC for
// binary tasks, macro one-vs-rest AUC otherwise.
double selection_auc(const std::vector<double>& class_scores, const std::vector<int>& labels,
                     int n_classes);

}  // namespace dmib
