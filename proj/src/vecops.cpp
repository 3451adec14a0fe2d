#include "notevec/vecops.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <regex>

#include "notevec/csv.h"
#include "notevec/error.h"

namespace notevec::vecops {

namespace fs = std::filesystem;

double cosine_similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCategory::domain, "cosine similarity of vectors with different lengths (" +
                                           std::to_string(x.size()) + " vs " +
                                           std::to_string(y.size()) + ")");
  }
  const double xx = dot(x, x);
  const double yy = dot(y, y);
  if (xx == 0.0 || yy == 0.0) throw Error(ErrorCategory::domain, "cosine similarity of a zero vector");
  return std::clamp(dot(x, y) / std::sqrt(xx * yy), -1.0, 1.0);
}

namespace {

struct Scored {
  double score;
  std::size_t index;
};

// Descending score, then ascending index.
bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

std::vector<Scored> top_scored(std::vector<Scored> all, std::size_t n) {
  n = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
  all.resize(n);
  return all;
}

std::size_t require_word(const embedding::EmbeddingModel& model, const std::string& word) {
  auto index = model.vocab.index_of(word);
  if (!index) throw Error(ErrorCategory::lookup, "word not in vocabulary: '" + word + "'");
  return *index;
}

}  // namespace

std::vector<Neighbor> most_similar(const embedding::EmbeddingModel& model, const std::string& word,
                                   std::size_t topn) {
  if (topn < 1) throw Error(ErrorCategory::parameter, "topn must be >= 1");
  const std::size_t query = require_word(model, word);
  const auto q = model.input_vectors.row(query);
  const double q_norm = norm(q);
  if (q_norm == 0.0) throw Error(ErrorCategory::domain, "word '" + word + "' has a zero vector");

  std::vector<Scored> scored;
  scored.reserve(model.vocab.size());
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    if (i == query) continue;
    const auto row = model.input_vectors.row(i);
    const double row_norm = norm(row);
    if (row_norm == 0.0) continue;
    scored.push_back({std::clamp(dot(q, row) / (q_norm * row_norm), -1.0, 1.0), i});
  }
  std::vector<Neighbor> out;
  for (const auto& s : top_scored(std::move(scored), topn)) {
    out.push_back({model.vocab.word(s.index), s.score});
  }
  return out;
}

SeedBag build_seed_bag(const embedding::EmbeddingModel& model, const std::string& seed,
                       std::size_t topn) {
  SeedBag bag{seed, {{seed, 1.0}}};
  for (auto& n : most_similar(model, seed, topn)) bag.entries.push_back(std::move(n));
  return bag;
}

void write_seed_bag_csv(const SeedBag& bag, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  for (const auto& entry : bag.entries) {
    if (entry.word == bag.seed) continue;
    csv::write_record(out, {entry.word, csv::format_real(entry.score)});
  }
}

SeedBag read_seed_bag_csv(const fs::path& path, const std::string& seed, std::size_t max_rows) {
  const auto table = csv::read_file(path, /*has_header=*/false);
  SeedBag bag{seed, {{seed, 1.0}}};
  for (std::size_t r = 0; r < table.rows.size() && r < max_rows; ++r) {
    const auto& row = table.rows[r];
    auto score = row.size() == 2 ? csv::parse_real(row[1]) : std::nullopt;
    if (!score) {
      throw Error(ErrorCategory::format,
                  path.string() + ": row " + std::to_string(r + 1) + " is not `word,score`");
    }
    const bool duplicate = std::any_of(bag.entries.begin(), bag.entries.end(),
                                       [&](const Neighbor& n) { return n.word == row[0]; });
    if (duplicate) {
      throw Error(ErrorCategory::format,
                  path.string() + ": row " + std::to_string(r + 1) + " repeats word '" + row[0] + "'");
    }
    bag.entries.push_back({row[0], *score});
  }
  return bag;
}

// ---------------------------------------------------------------------------
// Spherical k-means

namespace {

Matrix unit_rows(const Matrix& vectors) {
  Matrix unit = vectors;
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    auto row = unit.row(i);
    const double n = norm(row);
    if (n == 0.0 || !std::isfinite(n)) {
      throw Error(ErrorCategory::domain,
                  "row " + std::to_string(i) + " is a zero or non-finite vector; cannot cluster it");
    }
    for (double& x : row) x /= n;
  }
  return unit;
}

// Argmax prototype per row; ties keep the lowest index.
void assign_rows(const Matrix& unit, const Matrix& prototypes, std::vector<std::size_t>& assignment,
                 std::vector<double>& similarity) {
  assignment.resize(unit.rows());
  similarity.resize(unit.rows());
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < prototypes.rows(); ++c) {
      const double s = dot(unit.row(i), prototypes.row(c));
      if (s > best_sim) {
        best_sim = s;
        best = c;
      }
    }
    assignment[i] = best;
    similarity[i] = best_sim;
  }
}

// Moves the globally worst-fitting point (from a cluster with >= 2 members)
// into each empty cluster, which then takes that point as its prototype.
void repair_empty(const Matrix& unit, Matrix& prototypes, std::vector<std::size_t>& assignment,
                  std::vector<double>& similarity) {
  const std::size_t k = prototypes.rows();
  std::vector<std::size_t> sizes(k, 0);
  for (auto c : assignment) ++sizes[c];
  for (std::size_t empty = 0; empty < k; ++empty) {
    if (sizes[empty] != 0) continue;
    std::size_t worst = unit.rows();
    for (std::size_t i = 0; i < unit.rows(); ++i) {
      if (sizes[assignment[i]] < 2) continue;
      if (worst == unit.rows() || similarity[i] < similarity[worst]) worst = i;
    }
    --sizes[assignment[worst]];
    ++sizes[empty];
    assignment[worst] = empty;
    similarity[worst] = 1.0;
    std::copy(unit.row(worst).begin(), unit.row(worst).end(), prototypes.row(empty).begin());
  }
}

void update_prototypes(const Matrix& unit, Matrix& prototypes,
                       const std::vector<std::size_t>& assignment) {
  Matrix sums(prototypes.rows(), prototypes.cols());
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    auto sum = sums.row(assignment[i]);
    const auto x = unit.row(i);
    for (std::size_t d = 0; d < x.size(); ++d) sum[d] += x[d];
  }
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    const auto sum = sums.row(c);
    const double n = norm(sum);
    // Members that cancel exactly leave every direction equally good.
    if (n == 0.0) continue;
    auto proto = prototypes.row(c);
    for (std::size_t d = 0; d < sum.size(); ++d) proto[d] = sum[d] / n;
  }
}

// Single-point moves scored with re-fitted prototypes: a cluster's best
// score is the norm of its summed unit members. Lloyd iterations can stop
// where such a move still pays; this pass removes those.
bool refine_single_moves(const Matrix& unit, std::vector<std::size_t>& assignment, std::size_t k,
                         std::size_t max_passes) {
  const std::size_t dim = unit.cols();
  Matrix sums(k, dim);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    auto sum = sums.row(assignment[i]);
    for (std::size_t d = 0; d < dim; ++d) sum[d] += unit(i, d);
    ++sizes[assignment[i]];
  }
  std::vector<double> norms(k);
  for (std::size_t c = 0; c < k; ++c) norms[c] = norm(sums.row(c));

  std::vector<double> scratch(dim);
  auto norm_with = [&](std::size_t c, std::size_t i, double sign) {
    for (std::size_t d = 0; d < dim; ++d) scratch[d] = sums(c, d) + sign * unit(i, d);
    return norm(scratch);
  };

  bool changed = false;
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < unit.rows(); ++i) {
      const std::size_t from = assignment[i];
      if (sizes[from] < 2) continue;
      const double from_after = norm_with(from, i, -1.0);
      const double loss = norms[from] - from_after;
      std::size_t best = from;
      double best_gain = 1e-12;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == from) continue;
        const double gain = norm_with(c, i, 1.0) - norms[c] - loss;
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      if (best == from) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        sums(from, d) -= unit(i, d);
        sums(best, d) += unit(i, d);
      }
      norms[from] = norm(sums.row(from));
      norms[best] = norm(sums.row(best));
      --sizes[from];
      ++sizes[best];
      assignment[i] = best;
      moved = changed = true;
    }
    if (!moved) break;
  }
  return changed;
}

Matrix seed_prototypes(const Matrix& unit, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = unit.rows();
  Matrix prototypes(k, unit.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> best_sim(n, -1.0);

  auto take = [&](std::size_t c, std::size_t i) {
    chosen[i] = true;
    std::copy(unit.row(i).begin(), unit.row(i).end(), prototypes.row(c).begin());
    for (std::size_t j = 0; j < n; ++j) best_sim[j] = std::max(best_sim[j], dot(unit.row(j), unit.row(i)));
  };

  take(0, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  std::vector<double> weights(n);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double distance = chosen[j] ? 0.0 : std::max(0.0, 1.0 - best_sim[j]);
      weights[j] = distance * distance;
      total += weights[j];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double u = std::generate_canonical<double, 64>(rng) * total;
      for (std::size_t j = 0; j < n; ++j) {
        if (weights[j] <= 0.0) continue;
        pick = j;
        if (u < weights[j]) break;
        u -= weights[j];
      }
    } else {
      // Only duplicates of chosen points remain.
      std::vector<std::size_t> free;
      for (std::size_t j = 0; j < n; ++j) {
        if (!chosen[j]) free.push_back(j);
      }
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    take(c, pick);
  }
  return prototypes;
}

}  // namespace

double clustering_objective(const Matrix& vectors, const Matrix& prototypes,
                            std::span<const std::size_t> assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    total += cosine_similarity(vectors.row(i), prototypes.row(assignment[i]));
  }
  return total;
}

ClusterModel spherical_kmeans(const Matrix& vectors, const KMeansOptions& options) {
  if (options.k < 1) throw Error(ErrorCategory::parameter, "cluster.k must be >= 1");
  if (options.k > vectors.rows()) {
    throw Error(ErrorCategory::parameter, "cluster.k = " + std::to_string(options.k) +
                                              " exceeds the number of vectors (" +
                                              std::to_string(vectors.rows()) + ")");
  }
  if (options.max_iter < 1) throw Error(ErrorCategory::parameter, "cluster.max_iter must be >= 1");
  if (!(options.tol >= 0.0)) throw Error(ErrorCategory::parameter, "cluster.tol must be >= 0");

  const Matrix unit = unit_rows(vectors);
  std::mt19937_64 rng(options.rng_seed);
  ClusterModel model;
  model.prototypes = seed_prototypes(unit, options.k, rng);

  auto objective_of = [&](const std::vector<std::size_t>& assignment) {
    double total = 0.0;
    for (std::size_t i = 0; i < unit.rows(); ++i) {
      total += dot(unit.row(i), model.prototypes.row(assignment[i]));
    }
    return total;
  };

  std::vector<std::size_t> assignment, previous;
  std::vector<double> similarity;
  bool stable = false;
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    assign_rows(unit, model.prototypes, assignment, similarity);
    repair_empty(unit, model.prototypes, assignment, similarity);
    if (iter > 0 && assignment == previous) {
      stable = true;
      model.converged = true;
      break;
    }
    update_prototypes(unit, model.prototypes, assignment);
    model.objective_history.push_back(objective_of(assignment));
    model.iterations = iter + 1;
    previous = assignment;
    const auto& h = model.objective_history;
    if (h.size() >= 2 && h[h.size() - 1] - h[h.size() - 2] < options.tol) {
      model.converged = true;
      break;
    }
  }
  if (!stable) {
    // Leave every point on its best prototype.
    assign_rows(unit, model.prototypes, assignment, similarity);
    repair_empty(unit, model.prototypes, assignment, similarity);
    if (assignment != previous) model.objective_history.push_back(objective_of(assignment));
  }
  if (refine_single_moves(unit, assignment, options.k, options.max_iter) || assignment != previous) {
    update_prototypes(unit, model.prototypes, assignment);
    const double refined = objective_of(assignment);
    if (refined > model.objective()) model.objective_history.push_back(refined);
  }
  model.assignment = std::move(assignment);
  return model;
}

double cluster_similarity(const embedding::EmbeddingModel& model, const ClusterModel& clusters,
                          std::size_t cluster, const std::string& word) {
  if (cluster >= clusters.k()) {
    throw Error(ErrorCategory::parameter, "cluster index " + std::to_string(cluster) +
                                              " out of range for k = " + std::to_string(clusters.k()));
  }
  return cosine_similarity(model.vector_of(word), clusters.prototypes.row(cluster));
}

std::vector<Neighbor> cluster_representatives(const embedding::EmbeddingModel& model,
                                              const ClusterModel& clusters, std::size_t cluster,
                                              std::size_t n) {
  if (cluster >= clusters.k()) {
    throw Error(ErrorCategory::parameter, "cluster index " + std::to_string(cluster) +
                                              " out of range for k = " + std::to_string(clusters.k()));
  }
  std::vector<Scored> members;
  for (std::size_t i = 0; i < clusters.assignment.size(); ++i) {
    if (clusters.assignment[i] != cluster) continue;
    members.push_back({cosine_similarity(model.input_vectors.row(i), clusters.prototypes.row(cluster)), i});
  }
  std::vector<Neighbor> out;
  for (const auto& s : top_scored(std::move(members), n)) out.push_back({model.vocab.word(s.index), s.score});
  return out;
}

// ---------------------------------------------------------------------------
// Word tables

void WordClusters::add(const std::string& word, std::size_t cluster) {
  if (cluster_of.emplace(word, cluster).second) words.push_back(word);
}

const std::size_t* WordClusters::find(const std::string& word) const {
  auto it = cluster_of.find(word);
  return it == cluster_of.end() ? nullptr : &it->second;
}

void WordClusterSimTable::add(const std::string& word, ClusterSim entry) {
  if (entries.emplace(word, entry).second) words.push_back(word);
}

const ClusterSim* WordClusterSimTable::find(const std::string& word) const {
  auto it = entries.find(word);
  return it == entries.end() ? nullptr : &it->second;
}

namespace {

void check_coverage(const embedding::EmbeddingModel& model, const ClusterModel& clusters) {
  if (clusters.assignment.size() != model.vocab.size()) {
    throw Error(ErrorCategory::parameter,
                "cluster assignment covers " + std::to_string(clusters.assignment.size()) +
                    " rows but the vocabulary has " + std::to_string(model.vocab.size()));
  }
}

}  // namespace

WordClusters word_clusters(const embedding::EmbeddingModel& model, const ClusterModel& clusters) {
  check_coverage(model, clusters);
  WordClusters out;
  out.k = clusters.k();
  for (std::size_t i = 0; i < model.vocab.size(); ++i) out.add(model.vocab.word(i), clusters.assignment[i]);
  return out;
}

WordClusterSimTable build_sim_table(const embedding::EmbeddingModel& model,
                                    const ClusterModel& clusters) {
  check_coverage(model, clusters);
  WordClusterSimTable table;
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    const std::size_t c = clusters.assignment[i];
    table.add(model.vocab.word(i),
              {c, cosine_similarity(model.input_vectors.row(i), clusters.prototypes.row(c))});
  }
  return table;
}

void write_word_clusters_csv(const WordClusters& clusters, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  csv::write_record(out, {"word", "cluster"});
  for (const auto& word : clusters.words) {
    csv::write_record(out, {word, std::to_string(clusters.cluster_of.at(word) + 1)});
  }
}

namespace {

std::size_t parse_cluster_id(const std::string& text, const fs::path& path, std::size_t row) {
  auto id = csv::parse_integer(text);
  if (!id || *id < 1) {
    throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(row) +
                                           " has invalid cluster id '" + text + "'");
  }
  return static_cast<std::size_t>(*id - 1);
}

}  // namespace

WordClusters read_word_clusters_csv(const fs::path& path, std::size_t k) {
  const auto table = csv::read_file(path);
  const auto word_col = table.require_column("word", path);
  const auto cluster_col = table.require_column("cluster", path);
  WordClusters out;
  std::size_t max_id = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(r + 1) +
                                             " has the wrong number of fields");
    }
    const std::size_t c = parse_cluster_id(row[cluster_col], path, r + 1);
    if (k != 0 && c >= k) {
      throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(r + 1) +
                                             " has cluster id above k = " + std::to_string(k));
    }
    max_id = std::max(max_id, c + 1);
    out.add(row[word_col], c);
  }
  out.k = k != 0 ? k : max_id;
  return out;
}

void write_sim_table_csv(const WordClusterSimTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  csv::write_record(out, {"word", "cluster", "similarity"});
  for (const auto& word : table.words) {
    const auto& e = table.entries.at(word);
    csv::write_record(out, {word, std::to_string(e.cluster + 1), csv::format_real(e.similarity)});
  }
}

WordClusterSimTable read_sim_table_csv(const fs::path& path) {
  const auto table = csv::read_file(path);
  const auto word_col = table.require_column("word", path);
  WordClusterSimTable out;

  auto check_width = [&](const csv::Record& row, std::size_t r) {
    if (row.size() != table.header.size()) {
      throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(r + 1) +
                                             " has the wrong number of fields");
    }
  };
  auto real_at = [&](const csv::Record& row, std::size_t col, std::size_t r) {
    auto value = csv::parse_real(row[col]);
    if (!value) {
      throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(r + 1) +
                                             " has non-numeric value '" + row[col] + "'");
    }
    return *value;
  };

  if (table.column("cluster") && table.column("similarity")) {
    const auto cluster_col = *table.column("cluster");
    const auto sim_col = *table.column("similarity");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      check_width(row, r);
      out.add(row[word_col], {parse_cluster_id(row[cluster_col], path, r + 1), real_at(row, sim_col, r)});
    }
    return out;
  }

  static const std::regex kSparseColumn(R"(cluster(\d+)Sim)");
  std::vector<std::pair<std::size_t, std::size_t>> sparse;  // (column, cluster index)
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    std::smatch m;
    if (std::regex_match(table.header[c], m, kSparseColumn)) {
      const auto id = std::stoul(m[1].str());
      if (id < 1) throw Error(ErrorCategory::format, path.string() + ": bad column " + table.header[c]);
      sparse.emplace_back(c, id - 1);
    }
  }
  if (sparse.empty()) {
    throw Error(ErrorCategory::schema, path.string() +
                                           ": expected `word,cluster,similarity` or `clusterNSim` columns");
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    check_width(row, r);
    for (const auto& [col, cluster] : sparse) {
      const double value = real_at(row, col, r);
      // Rows that are zero everywhere contribute nothing to affinities.
      if (value != 0.0) {
        out.add(row[word_col], {cluster, value});
        break;
      }
    }
  }
  return out;
}

}  // namespace notevec::vecops
