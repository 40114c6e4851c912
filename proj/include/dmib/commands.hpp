#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmib/config.hpp"
#include "dmib/data.hpp"

namespace dmib {

// Creates the output directory, registers files as they are written, and on
// destruction removes everything it created unless commit() was called, so a
// failed command leaves no partial outputs behind.
class OutputStager {
 public:
  explicit OutputStager(std::string dir);
  ~OutputStager();
  OutputStager(const OutputStager&) = delete;
  OutputStager& operator=(const OutputStager&) = delete;

  const std::string& dir() const { return dir_; }
  // Registers dir/filename for cleanup and returns the full path.
  std::string path(const std::string& filename);
  void write_text(const std::string& filename, const std::string& content);
  void commit() { committed_ = true; }

 private:
  std::string dir_;
  bool created_dir_ = false;
  bool committed_ = false;
  std::vector<std::string> files_;
};

// Each command returns its process exit code; errors surface as exceptions
// for the entry point to turn into a single diagnostic line.
int run_train(const ExperimentConfig& config, const std::string& out_dir);
int run_ablate(const ExperimentConfig& config, const std::string& out_dir);
int run_verify(std::size_t trials, std::uint64_t seed, const std::string& out_dir = "");
int run_gen_synth(const SyntheticSpec& spec, std::uint64_t seed, const std::string& out_dir);
int run_eval(const std::string& checkpoint_path, const std::vector<std::string>& modality_paths,
             const std::string& labels_path, const std::string& out_dir, double threshold = 0.5);

}  // namespace dmib
