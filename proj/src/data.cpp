#include "dmib/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "dmib/serialize.hpp"

namespace dmib {

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

char sniff_delim(const std::string& header, const std::string& path) {
  if (header.find('\t') != std::string::npos) return '\t';
  if (header.find(',') != std::string::npos) return ',';
  throw DataError(path + ": header contains neither tabs nor commas");
}

std::string file_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  return (dot == std::string::npos || dot == 0) ? base : base.substr(0, dot);
}

struct RawTable {
  std::string path;
  std::string name;                  // file stem
  std::vector<std::string> columns;  // header minus the id column
  std::vector<std::string> ids;      // row order as on disk
  std::vector<std::vector<std::string>> cells;  // per row, minus the id
  std::vector<std::size_t> lineno;   // original file line per row
  std::map<std::string, std::size_t> by_id;
};

RawTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const char delim = sniff_delim(line, path);
  RawTable t;
  t.path = path;
  t.name = file_stem(path);
  const auto header = split_line(line, delim);
  if (header.size() < 2) throw DataError(path + ": need an id column plus data columns");
  t.columns.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_line(line, delim);
    if (cells.size() != header.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " columns, got " +
                      std::to_string(cells.size()));
    if (cells[0].empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": empty sample id");
    if (!t.by_id.emplace(cells[0], t.ids.size()).second)
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate sample id '" +
                      cells[0] + "'");
    t.ids.push_back(cells[0]);
    t.cells.emplace_back(cells.begin() + 1, cells.end());
    t.lineno.push_back(lineno);
  }
  if (t.ids.empty()) throw DataError(path + ": no data rows");
  return t;
}

double parse_number(const std::string& cell, const std::string& where) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v))
    throw DataError(where + ": non-numeric cell '" + cell + "'");
  return v;
}

long parse_long(const std::string& cell, const std::string& where) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0')
    throw DataError(where + ": expected an integer, got '" + cell + "'");
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, RngState& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.next_int(0, static_cast<std::int64_t>(i) - 1))]);
}

void check_rows(const std::vector<std::size_t>& rows, std::size_t n, const char* who) {
  for (auto r : rows)
    if (r >= n)
      throw UsageError(std::string(who) + ": row index " + std::to_string(r) +
                       " out of range for " + std::to_string(n) + " samples");
}

std::vector<double> column_impute_means(const Modality& mod, std::size_t n_samples,
                                        const std::vector<std::size_t>& train_rows) {
  std::vector<double> means(mod.n_features);
  (void)n_samples;
  for (std::size_t c = 0; c < mod.n_features; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto r : train_rows)
      if (!mod.is_missing(r, c)) {
        sum += mod.at(r, c);
        ++count;
      }
    if (count == 0)
      throw DataError("impute: modality '" + mod.name + "' column " + std::to_string(c) +
                      " has no observed training values");
    means[c] = sum / static_cast<double>(count);
  }
  return means;
}

ColumnStats column_zscore_stats(const Modality& mod, const std::vector<std::size_t>& train_rows) {
  ColumnStats cs;
  cs.mu.resize(mod.n_features);
  cs.sigma.resize(mod.n_features);
  for (std::size_t c = 0; c < mod.n_features; ++c) {
    double sum = 0.0;
    for (auto r : train_rows) sum += mod.at(r, c);
    const double mu = sum / static_cast<double>(train_rows.size());
    double var = 0.0;
    for (auto r : train_rows) {
      const double d = mod.at(r, c) - mu;
      var += d * d;
    }
    cs.mu[c] = mu;
    cs.sigma[c] = std::sqrt(var / static_cast<double>(train_rows.size()));
  }
  return cs;
}

void apply_zscore(Modality& mod, std::size_t n_samples, const ColumnStats& cs) {
  for (std::size_t r = 0; r < n_samples; ++r)
    for (std::size_t c = 0; c < mod.n_features; ++c) {
      double& v = mod.values[r * mod.n_features + c];
      v -= cs.mu[c];
      if (cs.sigma[c] >= 1e-12) v /= cs.sigma[c];
    }
}

void require_imputed(const MultimodalDataset& ds, const char* who) {
  for (const auto& mod : ds.modalities)
    for (auto m : mod.missing)
      if (m) throw DataError(std::string(who) + ": modality '" + mod.name +
                             "' still has missing cells; impute first");
}

}  // namespace

const Modality* MultimodalDataset::find_modality(const std::string& name) const {
  for (const auto& mod : modalities)
    if (mod.name == name) return &mod;
  return nullptr;
}

void MultimodalDataset::validate() const {
  const std::size_t n = sample_ids.size();
  if (labels.size() != n) throw DataError("dataset: label count does not match sample count");
  if (!group_ids.empty() && group_ids.size() != n)
    throw DataError("dataset: group count does not match sample count");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0 || labels[i] >= n_classes)
      throw DataError("dataset: label " + std::to_string(labels[i]) + " of sample '" +
                      sample_ids[i] + "' outside [0, " + std::to_string(n_classes) + ")");
  for (const auto& mod : modalities) {
    if (mod.values.size() != n * mod.n_features || mod.missing.size() != mod.values.size())
      throw DataError("dataset: modality '" + mod.name + "' has inconsistent storage");
  }
}

MultimodalDataset load_modalities(const std::vector<std::string>& table_paths,
                                  const std::string& labels_path, LoadReport* report) {
  if (table_paths.empty()) throw ConfigError("load: no modality tables given");
  const RawTable labels_table = read_table(labels_path);
  if (labels_table.columns.empty() || labels_table.columns.size() > 2)
    throw DataError(labels_path + ": expected sample_id, label and optional group_id columns");
  const bool has_groups = labels_table.columns.size() == 2;

  std::vector<RawTable> tables;
  tables.reserve(table_paths.size());
  std::set<std::string> names;
  for (const auto& p : table_paths) {
    tables.push_back(read_table(p));
    if (!names.insert(tables.back().name).second)
      throw ConfigError("load: two tables share the modality name '" + tables.back().name + "'");
  }

  // Keep ids present everywhere, in labels-file order; report the rest.
  std::vector<std::string> kept;
  for (const auto& id : labels_table.ids) {
    bool everywhere = true;
    for (const auto& t : tables) everywhere = everywhere && t.by_id.count(id) > 0;
    if (everywhere) kept.push_back(id);
  }
  if (kept.empty()) throw DataError("load: no sample id appears in every input file");
  if (report) {
    std::set<std::string> all(labels_table.ids.begin(), labels_table.ids.end());
    for (const auto& t : tables) all.insert(t.ids.begin(), t.ids.end());
    const std::set<std::string> kept_set(kept.begin(), kept.end());
    report->dropped_ids.clear();
    for (const auto& id : all)
      if (!kept_set.count(id)) report->dropped_ids.push_back(id);
  }

  MultimodalDataset ds;
  ds.sample_ids = kept;
  for (const auto& id : kept) {
    const std::size_t row = labels_table.by_id.at(id);
    const std::string where =
        labels_path + ":" + std::to_string(labels_table.lineno[row]) + " label";
    const long label = parse_long(labels_table.cells[row][0], where);
    if (label < 0) throw DataError(where + ": negative class index " + std::to_string(label));
    ds.labels.push_back(static_cast<int>(label));
    ds.n_classes = std::max(ds.n_classes, static_cast<int>(label) + 1);
    if (has_groups) ds.group_ids.push_back(labels_table.cells[row][1]);
  }

  for (const auto& t : tables) {
    Modality mod;
    mod.name = t.name;
    mod.n_features = t.columns.size();
    mod.values.assign(kept.size() * mod.n_features, 0.0);
    mod.missing.assign(kept.size() * mod.n_features, 0);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::size_t row = t.by_id.at(kept[i]);
      for (std::size_t c = 0; c < mod.n_features; ++c) {
        const std::string& cell = t.cells[row][c];
        if (cell.empty()) {
          mod.missing[i * mod.n_features + c] = 1;
        } else {
          mod.values[i * mod.n_features + c] =
              parse_number(cell, t.path + ":" + std::to_string(t.lineno[row]) + " column '" +
                                     t.columns[c] + "'");
        }
      }
    }
    ds.modalities.push_back(std::move(mod));
  }
  ds.validate();
  return ds;
}

MultimodalDataset impute_mean(const MultimodalDataset& ds,
                              const std::vector<std::size_t>& train_rows) {
  if (train_rows.empty()) throw UsageError("impute: empty training row set");
  check_rows(train_rows, ds.n_samples(), "impute");
  MultimodalDataset out = ds;
  for (auto& mod : out.modalities) {
    const auto means = column_impute_means(mod, out.n_samples(), train_rows);
    for (std::size_t r = 0; r < out.n_samples(); ++r)
      for (std::size_t c = 0; c < mod.n_features; ++c)
        if (mod.is_missing(r, c)) mod.values[r * mod.n_features + c] = means[c];
    std::fill(mod.missing.begin(), mod.missing.end(), 0);
  }
  return out;
}

MultimodalDataset normalize_zscore(const MultimodalDataset& ds,
                                   const std::vector<std::size_t>& train_rows,
                                   std::vector<ColumnStats>* stats_out) {
  if (train_rows.empty()) throw UsageError("normalize: empty training row set");
  check_rows(train_rows, ds.n_samples(), "normalize");
  require_imputed(ds, "normalize");
  MultimodalDataset out = ds;
  if (stats_out) stats_out->clear();
  for (auto& mod : out.modalities) {
    const ColumnStats cs = column_zscore_stats(mod, train_rows);
    apply_zscore(mod, out.n_samples(), cs);
    if (stats_out) stats_out->push_back(cs);
  }
  return out;
}

Preprocessor Preprocessor::fit(const MultimodalDataset& ds,
                               const std::vector<std::size_t>& train_rows) {
  if (train_rows.empty()) throw UsageError("preprocess: empty training row set");
  check_rows(train_rows, ds.n_samples(), "preprocess");
  const MultimodalDataset imputed = impute_mean(ds, train_rows);
  Preprocessor pp;
  for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
    ModalityStats st;
    st.name = ds.modalities[m].name;
    st.impute = column_impute_means(ds.modalities[m], ds.n_samples(), train_rows);
    st.zscore = column_zscore_stats(imputed.modalities[m], train_rows);
    pp.stats.push_back(std::move(st));
  }
  return pp;
}

MultimodalDataset Preprocessor::apply(const MultimodalDataset& ds) const {
  if (ds.modalities.size() != stats.size())
    throw DataError("preprocess: dataset has " + std::to_string(ds.modalities.size()) +
                    " modalities, statistics cover " + std::to_string(stats.size()));
  MultimodalDataset out = ds;
  for (std::size_t m = 0; m < out.modalities.size(); ++m) {
    auto& mod = out.modalities[m];
    const auto& st = stats[m];
    if (mod.name != st.name || mod.n_features != st.impute.size())
      throw DataError("preprocess: modality '" + mod.name +
                      "' does not match the fitted statistics ('" + st.name + "', " +
                      std::to_string(st.impute.size()) + " features)");
    for (std::size_t r = 0; r < out.n_samples(); ++r)
      for (std::size_t c = 0; c < mod.n_features; ++c)
        if (mod.is_missing(r, c)) mod.values[r * mod.n_features + c] = st.impute[c];
    std::fill(mod.missing.begin(), mod.missing.end(), 0);
    apply_zscore(mod, out.n_samples(), st.zscore);
  }
  return out;
}

std::uint64_t SplitPlan::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(seed);
  mix(folds.size());
  mix(test.size());
  for (auto i : test) mix(i);
  for (const auto& f : folds) {
    mix(f.size());
    for (auto i : f) mix(i);
  }
  return h;
}

std::vector<std::size_t> SplitPlan::train_rows() const {
  std::vector<std::size_t> rows;
  for (const auto& f : folds) rows.insert(rows.end(), f.begin(), f.end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

void SplitPlan::validate(std::size_t n_samples) const {
  std::vector<int> seen(n_samples, 0);
  const auto visit = [&seen, n_samples](std::size_t i) {
    if (i >= n_samples) throw DataError("split plan: index out of range");
    if (seen[i]++) throw DataError("split plan: index " + std::to_string(i) + " assigned twice");
  };
  for (auto i : test) visit(i);
  for (const auto& f : folds)
    for (auto i : f) visit(i);
  for (std::size_t i = 0; i < n_samples; ++i)
    if (!seen[i]) throw DataError("split plan: index " + std::to_string(i) + " unassigned");
}

SplitPlan split_stratified(const std::vector<int>& labels, double test_frac, std::size_t k,
                           std::uint64_t seed, const std::vector<std::string>& group_ids) {
  if (labels.empty()) throw DataError("split: no samples");
  if (!(test_frac >= 0.0 && test_frac < 1.0))
    throw ParameterError("split: test_frac must lie in [0, 1)");
  if (k < 1) throw ParameterError("split: need at least one fold");
  if (!group_ids.empty() && group_ids.size() != labels.size())
    throw DataError("split: group list length does not match label count");

  // Units are single rows, or whole groups so no group spans the split.
  std::vector<std::vector<std::size_t>> unit_rows;
  std::vector<int> unit_label;
  if (group_ids.empty()) {
    unit_rows.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      unit_rows[i] = {i};
      unit_label.push_back(labels[i]);
    }
  } else {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto [it, fresh] = index.emplace(group_ids[i], unit_rows.size());
      if (fresh) {
        unit_rows.emplace_back();
        unit_label.push_back(labels[i]);
      } else if (unit_label[it->second] != labels[i]) {
        throw DataError("split: group '" + group_ids[i] + "' mixes labels");
      }
      unit_rows[it->second].push_back(i);
    }
  }

  int n_classes = 0;
  for (int l : unit_label) n_classes = std::max(n_classes, l + 1);

  SplitPlan plan;
  plan.seed = seed;
  plan.folds.assign(k, {});
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t u = 0; u < unit_label.size(); ++u)
      if (unit_label[u] == c) members.push_back(u);
    if (members.size() < k + 1)
      throw DataError("split: class " + std::to_string(c) + " has " +
                      std::to_string(members.size()) + " units; need at least " +
                      std::to_string(k + 1));
    RngState rng = RngState::derive(seed, "split/class" + std::to_string(c));
    shuffle_vec(members, rng);
    const auto n_test = static_cast<std::size_t>(std::lround(test_frac * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < members.size(); ++j) {
      auto& dst = j < n_test ? plan.test : plan.folds[(j - n_test) % k];
      dst.insert(dst.end(), unit_rows[members[j]].begin(), unit_rows[members[j]].end());
    }
  }
  std::sort(plan.test.begin(), plan.test.end());
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  plan.validate(labels.size());
  return plan;
}

MultimodalDataset inject_noise_channel(const MultimodalDataset& ds, const NoiseSpec& spec,
                                       std::uint64_t seed) {
  if (!(spec.lo <= spec.hi)) throw ParameterError("noise: lo must not exceed hi");
  MultimodalDataset out = ds;
  Modality* target = nullptr;
  if (spec.append) {
    if (spec.n_features == 0) throw ConfigError("noise: appended modality needs features");
    if (ds.find_modality(spec.name))
      throw ConfigError("noise: modality '" + spec.name + "' already exists");
    Modality mod;
    mod.name = spec.name;
    mod.n_features = spec.n_features;
    mod.values.assign(ds.n_samples() * spec.n_features, 0.0);
    mod.missing.assign(mod.values.size(), 0);
    out.modalities.push_back(std::move(mod));
    target = &out.modalities.back();
  } else {
    for (auto& mod : out.modalities)
      if (mod.name == spec.target) target = &mod;
    if (!target) throw ConfigError("noise: unknown modality '" + spec.target + "'");
    std::fill(target->missing.begin(), target->missing.end(), 0);
  }
  RngState rng = RngState::derive(seed, "noise/" + target->name);
  for (auto& v : target->values)
    v = spec.integer ? static_cast<double>(rng.next_int(std::lround(spec.lo), std::lround(spec.hi)))
                     : rng.next_uniform(spec.lo, spec.hi);
  return out;
}

void SyntheticSpec::validate() const {
  if (n_samples == 0) throw ConfigError("synthetic: need samples");
  if (n_modalities == 0) throw ConfigError("synthetic: need modalities");
  if (n_features == 0) throw ConfigError("synthetic: need features");
  if (n_classes < 2) throw ConfigError("synthetic: need at least 2 classes");
  if (informative < -1 || informative >= static_cast<long>(n_modalities))
    throw ConfigError("synthetic: informative modality index out of range");
  if (informative >= 0 && n_features < n_classes)
    throw ConfigError("synthetic: the informative modality needs one feature per class");
  if (separation < 0.0) throw ConfigError("synthetic: separation must be >= 0");
  if (noise_floor < 0.0) throw ConfigError("synthetic: noise floor must be >= 0");
  if (repeats == 0) throw ConfigError("synthetic: repeats must be >= 1");
}

MultimodalDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<int> group_label(spec.n_samples);
  for (std::size_t g = 0; g < spec.n_samples; ++g)
    group_label[g] = static_cast<int>(g % spec.n_classes);
  RngState label_rng = RngState::derive(seed, "labels");
  shuffle_vec(group_label, label_rng);

  const std::size_t n_rows = spec.n_samples * spec.repeats;
  MultimodalDataset ds;
  ds.n_classes = static_cast<int>(spec.n_classes);
  char buf[32];
  for (std::size_t g = 0; g < spec.n_samples; ++g)
    for (std::size_t r = 0; r < spec.repeats; ++r) {
      std::snprintf(buf, sizeof buf, "S%05zu", g * spec.repeats + r);
      ds.sample_ids.emplace_back(buf);
      ds.labels.push_back(group_label[g]);
      if (spec.repeats > 1) {
        std::snprintf(buf, sizeof buf, "G%05zu", g);
        ds.group_ids.emplace_back(buf);
      }
    }

  for (std::size_t m = 0; m < spec.n_modalities; ++m) {
    Modality mod;
    mod.name = "mod" + std::to_string(m);
    mod.n_features = spec.n_features;
    mod.values.assign(n_rows * spec.n_features, 0.0);
    mod.missing.assign(mod.values.size(), 0);
    RngState rng = RngState::derive(seed, "mod" + std::to_string(m));
    const bool informative = static_cast<long>(m) == spec.informative;
    for (std::size_t row = 0; row < n_rows; ++row)
      for (std::size_t c = 0; c < spec.n_features; ++c) {
        double v;
        if (informative) {
          v = spec.noise_floor * rng.next_gaussian();
          if (static_cast<int>(c) == ds.labels[row]) v += spec.separation;
        } else {
          v = rng.next_gaussian();
        }
        mod.values[row * spec.n_features + c] = v;
      }
    ds.modalities.push_back(std::move(mod));
  }
  ds.validate();
  return ds;
}

void save_modality_table(const MultimodalDataset& ds, std::size_t modality,
                         const std::string& path) {
  if (modality >= ds.modalities.size()) throw UsageError("save: modality index out of range");
  const Modality& mod = ds.modalities[modality];
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "sample_id";
  for (std::size_t c = 0; c < mod.n_features; ++c) out << ",f" << c;
  out << "\n";
  for (std::size_t r = 0; r < ds.n_samples(); ++r) {
    out << ds.sample_ids[r];
    for (std::size_t c = 0; c < mod.n_features; ++c) {
      out << ",";
      if (!mod.is_missing(r, c)) out << fmt_double(mod.at(r, c));
    }
    out << "\n";
  }
  if (!out) throw DataError(path + ": write failed");
}

void save_labels_table(const MultimodalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << (ds.has_groups() ? "sample_id,label,group_id" : "sample_id,label") << "\n";
  for (std::size_t r = 0; r < ds.n_samples(); ++r) {
    out << ds.sample_ids[r] << "," << ds.labels[r];
    if (ds.has_groups()) out << "," << ds.group_ids[r];
    out << "\n";
  }
  if (!out) throw DataError(path + ": write failed");
}

namespace {
constexpr char kCacheMagic[] = "DMIBDATA";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void save_cache(const MultimodalDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out.write(kCacheMagic, 8);
  write_u32(out, kCacheVersion);
  write_u64(out, ds.n_samples());
  write_u32(out, static_cast<std::uint32_t>(ds.n_classes));
  out.put(ds.has_groups() ? 1 : 0);
  for (const auto& id : ds.sample_ids) write_string(out, id);
  for (int l : ds.labels) write_u32(out, static_cast<std::uint32_t>(l));
  for (const auto& g : ds.group_ids) write_string(out, g);
  write_u64(out, ds.modalities.size());
  for (const auto& mod : ds.modalities) {
    write_string(out, mod.name);
    write_u64(out, mod.n_features);
    for (double v : mod.values) write_f64(out, v);
    out.write(reinterpret_cast<const char*>(mod.missing.data()),
              static_cast<std::streamsize>(mod.missing.size()));
  }
  if (!out) throw DataError(path + ": write failed");
}

MultimodalDataset load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::string(magic, 8) != kCacheMagic)
    throw DataError(path + ": not a dataset cache");
  if (read_u32(in) != kCacheVersion) throw DataError(path + ": unsupported cache version");
  MultimodalDataset ds;
  const std::uint64_t n = read_u64(in);
  ds.n_classes = static_cast<int>(read_u32(in));
  const bool has_groups = in.get() == 1;
  ds.sample_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) ds.sample_ids.push_back(read_string(in));
  ds.labels.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(read_u32(in)));
  if (has_groups)
    for (std::uint64_t i = 0; i < n; ++i) ds.group_ids.push_back(read_string(in));
  const std::uint64_t n_mods = read_u64(in);
  for (std::uint64_t m = 0; m < n_mods; ++m) {
    Modality mod;
    mod.name = read_string(in);
    mod.n_features = read_u64(in);
    mod.values.resize(n * mod.n_features);
    for (auto& v : mod.values) v = read_f64(in);
    mod.missing.resize(mod.values.size());
    in.read(reinterpret_cast<char*>(mod.missing.data()),
            static_cast<std::streamsize>(mod.missing.size()));
    if (static_cast<std::size_t>(in.gcount()) != mod.missing.size())
      throw DataError(path + ": truncated cache");
    ds.modalities.push_back(std::move(mod));
  }
  ds.validate();
  return ds;
}

std::vector<Tensor> batch_tensors(const MultimodalDataset& ds,
                                  const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw UsageError("batch: empty row set");
  check_rows(rows, ds.n_samples(), "batch");
  require_imputed(ds, "batch");
  std::vector<Tensor> out;
  out.reserve(ds.modalities.size());
  for (const auto& mod : ds.modalities) {
    std::vector<double> vals(rows.size() * mod.n_features);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < mod.n_features; ++c)
        vals[i * mod.n_features + c] = mod.at(rows[i], c);
    out.emplace_back(Shape{rows.size(), mod.n_features}, std::move(vals));
  }
  return out;
}

std::vector<int> batch_labels(const MultimodalDataset& ds, const std::vector<std::size_t>& rows) {
  check_rows(rows, ds.n_samples(), "batch");
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(ds.labels[r]);
  return out;
}

std::vector<std::string> batch_groups(const MultimodalDataset& ds,
                                      const std::vector<std::size_t>& rows) {
  if (!ds.has_groups()) return {};
  check_rows(rows, ds.n_samples(), "batch");
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(ds.group_ids[r]);
  return out;
}

}  // namespace dmib
