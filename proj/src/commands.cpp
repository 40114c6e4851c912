#include "dmib/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dmib/checkpoint.hpp"
#include "dmib/error.hpp"
#include "dmib/trainer.hpp"
#include "dmib/verify.hpp"

namespace fs = std::filesystem;

namespace dmib {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct PreparedRun {
  MultimodalDataset dataset;  // preprocessed
  SplitPlan plan;
  Preprocessor preprocessor;
};

// Shared front half of train/ablate: materialize the dataset, reserve the
// test rows, fit preprocessing on the training pool only and replay it
// everywhere.
PreparedRun prepare(const ExperimentConfig& config) {
  config.validate();
  PreparedRun run;
  MultimodalDataset raw = config.build_dataset();
  run.plan = split_stratified(raw.labels, config.train.test_frac, config.train.k_folds,
                              config.seed, raw.group_ids);
  run.preprocessor = Preprocessor::fit(raw, run.plan.train_rows());
  run.dataset = run.preprocessor.apply(raw);
  return run;
}

void maybe_cache(const ExperimentConfig& config, OutputStager& stager) {
  if (!config.write_cache) return;
  // The cache stores the raw ingested dataset; preprocessing depends on the
  // split, so it is always re-derived.
  save_cache(config.build_dataset(), stager.path("dataset_cache.bin"));
}

}  // namespace

OutputStager::OutputStager(std::string dir) : dir_(std::move(dir)) {
  if (dir_.empty()) throw UsageError("output: empty directory path");
  const fs::path p(dir_);
  std::error_code ec;
  if (fs::exists(p, ec)) {
    if (!fs::is_directory(p, ec))
      throw UsageError("output: " + dir_ + " exists and is not a directory");
  } else {
    if (!fs::create_directories(p, ec) || ec)
      throw UsageError("output: cannot create directory " + dir_ +
                       (ec ? ": " + ec.message() : ""));
    created_dir_ = true;
  }
}

OutputStager::~OutputStager() {
  if (committed_) return;
  std::error_code ec;
  for (const auto& f : files_) fs::remove(f, ec);
  if (created_dir_) fs::remove(dir_, ec);  // only succeeds when empty
}

std::string OutputStager::path(const std::string& filename) {
  std::string full = (fs::path(dir_) / filename).string();
  files_.push_back(full);
  return full;
}

void OutputStager::write_text(const std::string& filename, const std::string& content) {
  const std::string full = path(filename);
  std::ofstream os(full, std::ios::binary | std::ios::trunc);
  os << content;
  if (!os.good()) throw DataError("output: cannot write " + full);
}

int run_train(const ExperimentConfig& config, const std::string& out_dir) {
  OutputStager stager(out_dir);
  PreparedRun run = prepare(config);
  maybe_cache(config, stager);

  CrossValResult cv = cross_validate(run.dataset, run.plan, config.train);
  const RunRecord& rec = cv.record;

  stager.write_text("resolved_config.json", config.to_json().dump(2) + "\n");
  stager.write_text("run_record.json", rec.to_json().dump(2) + "\n");
  stager.write_text("metrics.txt", rec.test.to_text());
  stager.write_text("metrics.json", rec.test.to_json().dump(2) + "\n");

  nlohmann::json extra;
  extra["seed"] = rec.seed;
  extra["flags"] = rec.flags;
  extra["plan_hash"] = hex64(rec.plan_hash);
  save_checkpoint(stager.path("checkpoint.bin"), cv.network, run.preprocessor, extra);

  std::cout << "train: " << run.dataset.n_samples() << " samples, "
            << run.dataset.modalities.size() << " modalities, plan " << hex64(rec.plan_hash)
            << "\nselected fold " << rec.selected_fold << " of " << rec.fold_val_auc.size()
            << "\n"
            << rec.test.to_text() << "outputs in " << stager.dir() << "\n";
  stager.commit();
  return 0;
}

int run_ablate(const ExperimentConfig& config, const std::string& out_dir) {
  OutputStager stager(out_dir);
  PreparedRun run = prepare(config);
  maybe_cache(config, stager);

  std::vector<AblationRun> runs = run_ablation(run.dataset, run.plan, config.train);
  const std::string table = ablation_table(runs);

  nlohmann::json records;
  records["plan_hash"] = hex64(run.plan.hash());
  records["rows"] = nlohmann::json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    nlohmann::json row;
    row["setting"] = i + 1;
    row["description"] = runs[i].flags.describe();
    row["flags"] = {{"loss_fused", runs[i].flags.loss_fused},
                    {"use_ib", runs[i].flags.use_ib},
                    {"loss_distilled", runs[i].flags.loss_distilled},
                    {"loss_sufficiency", runs[i].flags.loss_sufficiency},
                    {"loss_modality", runs[i].flags.loss_modality}};
    row["record"] = runs[i].record.to_json();
    records["rows"].push_back(std::move(row));
  }

  stager.write_text("resolved_config.json", config.to_json().dump(2) + "\n");
  stager.write_text("ablation_table.txt", table);
  stager.write_text("ablation_records.json", records.dump(2) + "\n");

  std::cout << table << "outputs in " << stager.dir() << "\n";
  stager.commit();
  return 0;
}

int run_verify(std::size_t trials, std::uint64_t seed, const std::string& out_dir) {
  VerifyReport report = run_verification(trials, seed);
  const std::string text = report.to_text();
  std::cout << text;
  if (!out_dir.empty()) {
    OutputStager stager(out_dir);
    stager.write_text("verify_report.txt", text);
    stager.commit();
  }
  return report.all_pass() ? 0 : 1;
}

int run_gen_synth(const SyntheticSpec& spec, std::uint64_t seed, const std::string& out_dir) {
  spec.validate();
  OutputStager stager(out_dir);
  MultimodalDataset ds = gen_synthetic(spec, seed);
  for (std::size_t m = 0; m < ds.modalities.size(); ++m)
    save_modality_table(ds, m, stager.path(ds.modalities[m].name + ".csv"));
  save_labels_table(ds, stager.path("labels.csv"));
  std::cout << "gen-synth: " << ds.n_samples() << " rows, " << ds.modalities.size()
            << " modality tables + labels in " << stager.dir() << "\n";
  stager.commit();
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::vector<std::string>& modality_paths,
             const std::string& labels_path, const std::string& out_dir, double threshold) {
  LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
  LoadReport load_report;
  MultimodalDataset ds = load_modalities(modality_paths, labels_path, &load_report);
  if (!load_report.dropped_ids.empty())
    std::cout << "note: dropped " << load_report.dropped_ids.size()
              << " sample ids absent from some input file\n";
  if (ds.n_classes > static_cast<int>(lc.network.n_classes()))
    throw DataError("eval: dataset has " + std::to_string(ds.n_classes) +
                    " classes but the checkpoint predicts " +
                    std::to_string(lc.network.n_classes()));

  MultimodalDataset prepped = lc.preprocessor.apply(ds);
  std::vector<std::size_t> rows(prepped.n_samples());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  MetricsReport report = evaluate_rows(lc.network, prepped, rows, threshold);

  std::cout << report.to_text();
  if (!out_dir.empty()) {
    OutputStager stager(out_dir);
    stager.write_text("metrics.txt", report.to_text());
    stager.write_text("metrics.json", report.to_json().dump(2) + "\n");
    stager.commit();
  }
  return 0;
}

}  // namespace dmib
