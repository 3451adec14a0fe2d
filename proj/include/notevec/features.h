#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "notevec/corpus.h"
#include "notevec/vecops.h"

namespace notevec::features {

/// Sum of squared bag scores over the DISTINCT note tokens found in the bag.
double bag_score(std::span<const std::string> note_tokens, const vecops::SeedBag& bag);

/// Per-cluster share of token occurrences. Out-of-vocabulary tokens count
/// only in the denominator; an empty note gives zeros.
std::vector<double> cluster_percentages(std::span<const std::string> note_tokens,
                                        const vecops::WordClusters& clusters);

/// Per-cluster sum of squared word-to-prototype similarities over the
/// DISTINCT in-vocabulary note words.
std::vector<double> cluster_affinities(std::span<const std::string> note_tokens,
                                       const vecops::WordClusters& clusters,
                                       const vecops::WordClusterSimTable& sims);

/// Sums values per encounter id. Keys appear in first-seen order.
std::vector<std::pair<std::string, double>> aggregate_by_encounter(
    const std::vector<std::pair<std::string, double>>& values);

/// Rows keyed by unique encounter id with a fixed column list. Missing
/// values are NaN.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::string id_column, std::vector<std::string> columns);

  const std::string& id_column() const { return id_column_; }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

  /// Throws a schema error on a duplicate id or a width mismatch.
  void add_row(const std::string& id, std::vector<double> values);
  std::span<const double> row(std::size_t i) const { return rows_[i]; }
  const std::vector<double>* find(const std::string& id) const;
  /// The id column plus the single column `col`.
  FeatureTable select_column(std::size_t col) const;

  /// Full outer join on id; ids absent from one side get NaN there.
  /// Columns must not overlap.
  static FeatureTable outer_join(const FeatureTable& left, const FeatureTable& right);

  friend bool operator==(const FeatureTable&, const FeatureTable&);

 private:
  std::string id_column_;
  std::vector<std::string> columns_;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path);
/// First column is the id; every other column is numeric (`NA` or empty is
/// missing).
FeatureTable read_feature_csv(const std::filesystem::path& path);

enum class ClusterMode { percentage, affinity };

struct FeatureOptions {
  /// Drop encounters without tokens from cluster tables instead of giving
  /// them all-zero rows.
  bool strict_compat = false;
};

struct FeatureBuild {
  FeatureTable table;
  /// Encounters whose notes held no tokens (zero-filled or dropped).
  std::vector<std::string> empty_encounters;
};

/// One column per bag (named after its seed); per-note scores summed per
/// encounter. Encounters appear in first-seen order.
FeatureBuild build_bag_features(const std::vector<corpus::CleanNote>& notes,
                                const std::vector<vecops::SeedBag>& bags,
                                const FeatureOptions& options = {});

/// Columns cluster1..clusterK. Percentage mode pools an encounter's tokens
/// before taking proportions; affinity mode sums per-note affinities.
FeatureBuild build_cluster_features(const std::vector<corpus::CleanNote>& notes,
                                    const vecops::WordClusters& clusters,
                                    const vecops::WordClusterSimTable* sims, ClusterMode mode,
                                    const FeatureOptions& options = {});

inline constexpr std::string_view kClusterIdColumn = "csn";

}  // namespace notevec::features
