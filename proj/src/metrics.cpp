#include "dmib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dmib {

namespace {

void require_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                    const char* who) {
  if (scores.size() != labels.size())
    throw DataError(std::string(who) + ": " + std::to_string(scores.size()) + " scores for " +
                    std::to_string(labels.size()) + " labels");
  if (scores.empty()) throw DataError(std::string(who) + ": empty input");
  bool has_pos = false, has_neg = false;
  for (int l : labels) {
    if (l == 1) has_pos = true;
    else if (l == 0) has_neg = true;
    else throw DataError(std::string(who) + ": label " + std::to_string(l) + " is not binary");
  }
  if (!has_pos || !has_neg)
    throw DataError(std::string(who) + ": both classes must be present");
  for (double s : scores)
    if (!std::isfinite(s)) throw DataError(std::string(who) + ": non-finite score");
}

double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups (1-based).
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k] == 1) {
      pos_rank_sum += rank[k];
      ++n_pos;
    }
  const std::size_t n_neg = n - n_pos;
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double trapezoid_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
  double tp = 0, fp = 0, area = 0, prev_tp = 0, prev_fp = 0;
  std::size_t i = 0;
  while (i < n) {
    // Sweep a whole tie group at once; the resulting diagonal segment gives
    // tied pairs half credit, matching the rank statistic.
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) tp += 1;
      else fp += 1;
    }
    area += (fp - prev_fp) / n_neg * 0.5 * (tp + prev_tp) / n_pos;
    prev_tp = tp;
    prev_fp = fp;
    i = j + 1;
  }
  return area;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require_binary(scores, labels, "roc_auc");
  const double by_rank = rank_auc(scores, labels);
  const double by_curve = trapezoid_auc(scores, labels);
  if (std::abs(by_rank - by_curve) > 1e-12)
    throw std::logic_error("roc_auc: rank and trapezoid estimates disagree: " +
                           std::to_string(by_rank) + " vs " + std::to_string(by_curve));
  return by_rank;
}

Confusion confusion_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                            double threshold) {
  require_binary(scores, labels, "confusion_metrics");
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred_pos = scores[i] >= threshold;
    if (labels[i] == 1) (pred_pos ? tp : fn) += 1;
    else (pred_pos ? fp : tn) += 1;
  }
  return Confusion{(tp + tn) / static_cast<double>(scores.size()), tp / (tp + fn), tn / (tn + fp)};
}

double weighted_youden(double se, double sp, double w) {
  if (!(se >= 0.0 && se <= 1.0 && sp >= 0.0 && sp <= 1.0 && w >= 0.0 && w <= 1.0))
    throw ParameterError("weighted_youden: inputs must lie in [0, 1]");
  return w * se + (1.0 - w) * sp;
}

F1Result f1_scores(const std::vector<int>& pred, const std::vector<int>& labels, int n_classes) {
  if (n_classes < 2) throw ParameterError("f1_scores: need at least 2 classes");
  if (pred.size() != labels.size() || pred.empty())
    throw DataError("f1_scores: prediction/label sizes disagree or empty");
  std::vector<double> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0), support(n_classes, 0);
  double correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= n_classes || labels[i] < 0 || labels[i] >= n_classes)
      throw DataError("f1_scores: class index out of range at position " + std::to_string(i));
    support[labels[i]] += 1;
    if (pred[i] == labels[i]) {
      tp[labels[i]] += 1;
      correct += 1;
    } else {
      fp[pred[i]] += 1;
      fn[labels[i]] += 1;
    }
  }
  double macro = 0, weighted = 0;
  for (int c = 0; c < n_classes; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    const double f1 = denom > 0 ? 2 * tp[c] / denom : 0.0;
    macro += f1;
    weighted += support[c] * f1;
  }
  const double n = static_cast<double>(pred.size());
  return F1Result{macro / n_classes, weighted / n, correct / n};
}

GroupedScores median_aggregate(const std::vector<double>& scores,
                               const std::vector<std::string>& group_ids) {
  if (scores.size() != group_ids.size() || scores.empty())
    throw DataError("median_aggregate: score/group sizes disagree or empty");
  GroupedScores out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < group_ids.size(); ++i) {
    auto it = index.find(group_ids[i]);
    if (it == index.end()) {
      index.emplace(group_ids[i], out.groups.size());
      out.groups.push_back(group_ids[i]);
      out.members.push_back({i});
    } else {
      out.members[it->second].push_back(i);
    }
  }
  out.scores.resize(out.groups.size());
  for (std::size_t g = 0; g < out.groups.size(); ++g) {
    std::vector<double> vals;
    vals.reserve(out.members[g].size());
    for (auto i : out.members[g]) vals.push_back(scores[i]);
    std::sort(vals.begin(), vals.end());
    const std::size_t m = vals.size();
    out.scores[g] = (m % 2 == 1) ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
  }
  return out;
}

MetricsReport MetricsReport::from_binary_scores(const std::vector<double>& scores,
                                                const std::vector<int>& labels, double threshold) {
  MetricsReport r;
  r.n_classes = 2;
  r.n_samples = scores.size();
  r.auc = roc_auc(scores, labels);
  const Confusion c = confusion_metrics(scores, labels, threshold);
  r.accuracy = c.accuracy;
  r.sensitivity = c.sensitivity;
  r.specificity = c.specificity;
  r.jw["0.5"] = weighted_youden(c.sensitivity, c.specificity, 0.5);
  r.jw["0.6"] = weighted_youden(c.sensitivity, c.specificity, 0.6);
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
  const F1Result f1 = f1_scores(pred, labels, 2);
  r.f1_macro = f1.macro_f1;
  r.f1_weighted = f1.weighted_f1;
  return r;
}

MetricsReport MetricsReport::from_multiclass_scores(const std::vector<double>& class_scores,
                                                    const std::vector<int>& labels, int n_classes) {
  MetricsReport r;
  r.n_classes = n_classes;
  r.n_samples = labels.size();
  r.auc = selection_auc(class_scores, labels, n_classes);
  std::vector<int> pred(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (class_scores[i * n_classes + c] > class_scores[i * n_classes + best]) best = c;
    pred[i] = best;
  }
  const F1Result f1 = f1_scores(pred, labels, n_classes);
  r.accuracy = f1.accuracy;
  r.f1_macro = f1.macro_f1;
  r.f1_weighted = f1.weighted_f1;
  return r;
}

double selection_auc(const std::vector<double>& class_scores, const std::vector<int>& labels,
                     int n_classes) {
  if (n_classes == 2) {
    std::vector<double> pos(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) pos[i] = class_scores[i * 2 + 1];
    return roc_auc(pos, labels);
  }
  // Macro one-vs-rest; classes absent from the labels are skipped.
  double total = 0.0;
  int counted = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<double> s(labels.size());
    std::vector<int> l(labels.size());
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s[i] = class_scores[i * n_classes + c];
      l[i] = labels[i] == c ? 1 : 0;
      (l[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    total += roc_auc(s, l);
    ++counted;
  }
  if (counted == 0) throw DataError("selection_auc: no class present with both outcomes");
  return total / counted;
}

namespace {

std::string fixed4(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "metrics (" << n_classes << " classes, " << n_samples << " samples)\n";
  os << "  auc          = " << fixed4(auc) << "\n";
  os << "  accuracy     = " << fixed4(accuracy) << "\n";
  if (sensitivity) os << "  sensitivity  = " << fixed4(*sensitivity) << "\n";
  if (specificity) os << "  specificity  = " << fixed4(*specificity) << "\n";
  for (const auto& [w, v] : jw) os << "  jw[" << w << "]      = " << fixed4(v) << "\n";
  os << "  f1_macro     = " << fixed4(f1_macro) << "\n";
  os << "  f1_weighted  = " << fixed4(f1_weighted) << "\n";
  if (!fold_val_auc.empty()) {
    double mean = 0;
    for (double v : fold_val_auc) mean += v;
    mean /= fold_val_auc.size();
    double var = 0;
    for (double v : fold_val_auc) var += (v - mean) * (v - mean);
    var /= fold_val_auc.size();
    os << "  val_auc      = " << fixed4(mean) << " +/- " << fixed4(std::sqrt(var)) << " over "
       << fold_val_auc.size() << " folds\n";
    if (selected_fold) os << "  selected     = fold " << *selected_fold << "\n";
  }
  os << "machine: " << to_json().dump() << "\n";
  return os.str();
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["n_classes"] = n_classes;
  j["n_samples"] = n_samples;
  j["auc"] = auc;
  j["accuracy"] = accuracy;
  if (sensitivity) j["sensitivity"] = *sensitivity;
  if (specificity) j["specificity"] = *specificity;
  if (!jw.empty()) j["jw"] = jw;
  j["f1_macro"] = f1_macro;
  j["f1_weighted"] = f1_weighted;
  if (!fold_val_auc.empty()) j["fold_val_auc"] = fold_val_auc;
  if (selected_fold) j["selected_fold"] = *selected_fold;
  return j;
}

}  // namespace dmib
