#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "notevec/embedding.h"
#include "notevec/learn.h"
#include "notevec/synth.h"
#include "notevec/vecops.h"

namespace notevec::cli {

/// Flat `key = value` settings. Keys carry their section as a prefix
/// (`train.dim`); `#` starts a comment. Unknown keys are rejected.
class Config {
 public:
  /// Every recognised key with its default value.
  static const std::map<std::string, std::string>& defaults();

  Config();

  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  /// Relative paths resolve against this directory.
  std::filesystem::path base_dir = ".";

  std::filesystem::path path(const std::string& key) const;
  double real(const std::string& key) const;
  std::uint64_t count(const std::string& key) const;
  bool flag(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

enum class ScoreMode { all, bags, percentage, affinity };

struct PipelineConfig {
  std::filesystem::path corpus_dir, clean_dir, notes_csv, labels_csv, model_path, seeds_file,
      bags_dir, clusters_csv, sim_table_csv, features_dir, report_path;
  bool dedup_notes = false;
  embedding::TrainConfig train;
  std::size_t bag_topn = vecops::kDefaultBagSize;
  vecops::KMeansOptions cluster;
  std::size_t rounds = 100;
  learn::Date cutoff = learn::kDefaultCutoff;
  ScoreMode score_mode = ScoreMode::all;
  bool strict_compat = false;
  synth::TopicSpec topics;
  synth::EncounterSpec encounters;

  /// Typed view of a Config; throws a parameter error for bad values.
  static PipelineConfig from(const Config& config);
};

/// Diagnostics go to one stream. Warnings always print; info only when verbose.
class Log {
 public:
  Log(std::ostream& out, bool verbose) : out_(out), verbose_(verbose) {}
  void info(const std::string& message) const;
  void warn(const std::string& message) const;

 private:
  std::ostream& out_;
  bool verbose_;
};

void cmd_clean(const PipelineConfig& config, const Log& log);
void cmd_train(const PipelineConfig& config, const Log& log);
void cmd_similar(const PipelineConfig& config, const std::string& word, std::size_t topn,
                 std::ostream& out);
void cmd_bags(const PipelineConfig& config, const Log& log);
void cmd_cluster(const PipelineConfig& config, const Log& log);
void cmd_score(const PipelineConfig& config, const Log& log);
std::vector<learn::EvaluationResult> cmd_evaluate(const PipelineConfig& config, const Log& log,
                                                  std::ostream& out);
void cmd_synth(const PipelineConfig& config, const Log& log);

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 on success, 2 for an unknown word, 1 for any other error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace notevec::cli
