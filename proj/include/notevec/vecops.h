#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "notevec/embedding.h"
#include "notevec/matrix.h"

namespace notevec::vecops {

/// x.y / (|x||y|), clamped to [-1, 1]. Throws a domain error for a zero
/// vector or mismatched lengths.
double cosine_similarity(std::span<const double> x, std::span<const double> y);

struct Neighbor {
  std::string word;
  double score;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// The topn words (query excluded) with the highest cosine similarity to
/// the query's vector, descending; equal scores keep vocabulary order.
std::vector<Neighbor> most_similar(const embedding::EmbeddingModel& model, const std::string& word,
                                   std::size_t topn);

/// Seed first with score 1.0, then its nearest neighbours.
struct SeedBag {
  std::string seed;
  std::vector<Neighbor> entries;
};

inline constexpr std::size_t kDefaultBagSize = 200;

SeedBag build_seed_bag(const embedding::EmbeddingModel& model, const std::string& seed,
                       std::size_t topn = kDefaultBagSize);

/// Headerless `word,score` rows, neighbours only (the seed row is implied).
void write_seed_bag_csv(const SeedBag& bag, const std::filesystem::path& path);
/// Reads at most `max_rows` neighbour rows and prepends (seed, 1.0).
SeedBag read_seed_bag_csv(const std::filesystem::path& path, const std::string& seed,
                          std::size_t max_rows = kDefaultBagSize);

// ---------------------------------------------------------------------------
// Spherical k-means. Cluster indices are 0-based in memory; files and
// feature column names use 1-based ids (cluster1 .. clusterK).

struct KMeansOptions {
  std::size_t k = 150;
  std::uint64_t rng_seed = 84;
  std::size_t max_iter = 100;
  double tol = 1e-9;
};

struct ClusterModel {
  /// k unit-length rows.
  Matrix prototypes;
  /// Cluster index of each input row.
  std::vector<std::size_t> assignment;
  /// Objective sum_i cos(x_i, prototype(x_i)) after each iteration.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t k() const { return prototypes.rows(); }
  double objective() const { return objective_history.empty() ? 0.0 : objective_history.back(); }
};

/// Clusters the unit-normalised rows by maximal cosine similarity.
/// k-means++ seeding under cosine distance; empty clusters take the point
/// that fits its own prototype worst; argmax ties go to the lowest index.
ClusterModel spherical_kmeans(const Matrix& vectors, const KMeansOptions& options);

/// Sum over rows of cos(row, prototype of its cluster).
double clustering_objective(const Matrix& vectors, const Matrix& prototypes,
                            std::span<const std::size_t> assignment);

double cluster_similarity(const embedding::EmbeddingModel& model, const ClusterModel& clusters,
                          std::size_t cluster, const std::string& word);

/// The n members of `cluster` most similar to its prototype, descending.
std::vector<Neighbor> cluster_representatives(const embedding::EmbeddingModel& model,
                                              const ClusterModel& clusters, std::size_t cluster,
                                              std::size_t n);

/// word -> cluster index, as consumed by the feature extractors.
struct WordClusters {
  std::size_t k = 0;
  /// Words in file / vocabulary order.
  std::vector<std::string> words;
  std::unordered_map<std::string, std::size_t> cluster_of;

  void add(const std::string& word, std::size_t cluster);
  const std::size_t* find(const std::string& word) const;
};

WordClusters word_clusters(const embedding::EmbeddingModel& model, const ClusterModel& clusters);

struct ClusterSim {
  std::size_t cluster;
  double similarity;
};

/// Each word's similarity to its own cluster's prototype.
struct WordClusterSimTable {
  std::vector<std::string> words;
  std::unordered_map<std::string, ClusterSim> entries;

  void add(const std::string& word, ClusterSim entry);
  const ClusterSim* find(const std::string& word) const;
  std::size_t size() const { return words.size(); }
};

WordClusterSimTable build_sim_table(const embedding::EmbeddingModel& model,
                                    const ClusterModel& clusters);

/// Header `word,cluster`, 1-based cluster ids.
void write_word_clusters_csv(const WordClusters& clusters, const std::filesystem::path& path);
/// k is taken as the largest id seen unless `k` is given.
WordClusters read_word_clusters_csv(const std::filesystem::path& path, std::size_t k = 0);

/// Header `word,cluster,similarity`.
void write_sim_table_csv(const WordClusterSimTable& table, const std::filesystem::path& path);
/// Accepts the flat layout above or the sparse one-column-per-cluster layout
/// (`word,cluster1Sim,...`, optionally preceded by a row-name column), where
/// a word's cluster is its nonzero column.
WordClusterSimTable read_sim_table_csv(const std::filesystem::path& path);

}  // namespace notevec::vecops
