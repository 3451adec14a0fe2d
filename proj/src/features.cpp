#include "notevec/features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "notevec/csv.h"
#include "notevec/error.h"

namespace notevec::features {

namespace fs = std::filesystem;

double bag_score(std::span<const std::string> note_tokens, const vecops::SeedBag& bag) {
  if (note_tokens.empty()) return 0.0;
  const std::unordered_set<std::string> present(note_tokens.begin(), note_tokens.end());
  double score = 0.0;
  for (const auto& entry : bag.entries) {
    if (present.count(entry.word)) score += entry.score * entry.score;
  }
  return score;
}

std::vector<double> cluster_percentages(std::span<const std::string> note_tokens,
                                        const vecops::WordClusters& clusters) {
  std::vector<double> counts(clusters.k, 0.0);
  if (note_tokens.empty()) return counts;
  for (const auto& token : note_tokens) {
    if (const auto* c = clusters.find(token)) counts[*c] += 1.0;
  }
  const double total = static_cast<double>(note_tokens.size());
  for (double& c : counts) c /= total;
  return counts;
}

std::vector<double> cluster_affinities(std::span<const std::string> note_tokens,
                                       const vecops::WordClusters& clusters,
                                       const vecops::WordClusterSimTable& sims) {
  std::vector<double> affinity(clusters.k, 0.0);
  std::unordered_set<std::string> seen;
  for (const auto& token : note_tokens) {
    if (!seen.insert(token).second) continue;
    const auto* c = clusters.find(token);
    if (!c) continue;
    const auto* sim = sims.find(token);
    // A similarity stored under another cluster is zero in this one.
    if (!sim || sim->cluster != *c) continue;
    affinity[*c] += sim->similarity * sim->similarity;
  }
  return affinity;
}

std::vector<std::pair<std::string, double>> aggregate_by_encounter(
    const std::vector<std::pair<std::string, double>>& values) {
  std::vector<std::pair<std::string, double>> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& [id, value] : values) {
    auto [it, inserted] = index.emplace(id, out.size());
    if (inserted) {
      out.emplace_back(id, value);
    } else {
      out[it->second].second += value;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FeatureTable

FeatureTable::FeatureTable(std::string id_column, std::vector<std::string> columns)
    : id_column_(std::move(id_column)), columns_(std::move(columns)) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(c).second) throw Error(ErrorCategory::schema, "duplicate feature column '" + c + "'");
  }
}

void FeatureTable::add_row(const std::string& id, std::vector<double> values) {
  if (values.size() != columns_.size()) {
    throw Error(ErrorCategory::schema, "row '" + id + "' has " + std::to_string(values.size()) +
                                           " values for " + std::to_string(columns_.size()) + " columns");
  }
  if (!index_.emplace(id, ids_.size()).second) {
    throw Error(ErrorCategory::schema, "duplicate encounter id '" + id + "'");
  }
  ids_.push_back(id);
  rows_.push_back(std::move(values));
}

const std::vector<double>* FeatureTable::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &rows_[it->second];
}

FeatureTable FeatureTable::select_column(std::size_t col) const {
  FeatureTable out(id_column_, {columns_.at(col)});
  for (std::size_t i = 0; i < ids_.size(); ++i) out.add_row(ids_[i], {rows_[i][col]});
  return out;
}

FeatureTable FeatureTable::outer_join(const FeatureTable& left, const FeatureTable& right) {
  auto columns = left.columns_;
  columns.insert(columns.end(), right.columns_.begin(), right.columns_.end());
  FeatureTable out(left.id_column_.empty() ? right.id_column_ : left.id_column_, std::move(columns));
  const double missing = std::numeric_limits<double>::quiet_NaN();
  auto joined = [&](const std::string& id) {
    std::vector<double> values;
    values.reserve(out.columns_.size());
    if (const auto* l = left.find(id)) {
      values.insert(values.end(), l->begin(), l->end());
    } else {
      values.insert(values.end(), left.columns_.size(), missing);
    }
    if (const auto* r = right.find(id)) {
      values.insert(values.end(), r->begin(), r->end());
    } else {
      values.insert(values.end(), right.columns_.size(), missing);
    }
    return values;
  };
  for (const auto& id : left.ids_) out.add_row(id, joined(id));
  for (const auto& id : right.ids_) {
    if (!left.find(id)) out.add_row(id, joined(id));
  }
  return out;
}

bool operator==(const FeatureTable& a, const FeatureTable& b) {
  if (a.id_column_ != b.id_column_ || a.columns_ != b.columns_ || a.ids_ != b.ids_) return false;
  for (std::size_t i = 0; i < a.rows_.size(); ++i) {
    for (std::size_t j = 0; j < a.columns_.size(); ++j) {
      const double x = a.rows_[i][j], y = b.rows_[i][j];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
  }
  return true;
}

void write_feature_csv(const FeatureTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  csv::Record header{table.id_column()};
  header.insert(header.end(), table.columns().begin(), table.columns().end());
  csv::write_record(out, header);
  for (std::size_t i = 0; i < table.size(); ++i) {
    csv::Record record{table.ids()[i]};
    for (double v : table.row(i)) record.push_back(csv::format_real(v));
    csv::write_record(out, record);
  }
}

FeatureTable read_feature_csv(const fs::path& path) {
  const auto data = csv::read_file(path);
  if (data.header.empty() || data.header.front().empty()) {
    throw Error(ErrorCategory::schema, path.string() + ": first column must name the encounter id");
  }
  FeatureTable table(data.header.front(),
                     std::vector<std::string>(data.header.begin() + 1, data.header.end()));
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const auto& row = data.rows[r];
    if (row.size() != data.header.size()) {
      throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(r + 1) +
                                             " has the wrong number of fields");
    }
    std::vector<double> values;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty() || row[c] == "NA") {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      auto v = csv::parse_real(row[c]);
      if (!v) {
        throw Error(ErrorCategory::format, path.string() + ": row " + std::to_string(r + 1) +
                                               " has non-numeric value '" + row[c] + "'");
      }
      values.push_back(*v);
    }
    table.add_row(row[0], std::move(values));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Table builders

namespace {

struct EncounterGroup {
  std::string id;
  std::vector<const corpus::CleanNote*> notes;
  std::size_t token_count = 0;
};

std::vector<EncounterGroup> group_notes(const std::vector<corpus::CleanNote>& notes) {
  std::vector<EncounterGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& note : notes) {
    auto [it, inserted] = index.emplace(note.encounter_id, groups.size());
    if (inserted) groups.push_back({note.encounter_id, {}, 0});
    auto& g = groups[it->second];
    g.notes.push_back(&note);
    g.token_count += note.tokens.size();
  }
  return groups;
}

}  // namespace

FeatureBuild build_bag_features(const std::vector<corpus::CleanNote>& notes,
                                const std::vector<vecops::SeedBag>& bags, const FeatureOptions&) {
  std::vector<std::string> columns;
  for (const auto& bag : bags) columns.push_back(bag.seed);
  FeatureBuild build{FeatureTable(std::string(corpus::kEncounterIdColumn), std::move(columns)), {}};
  for (const auto& group : group_notes(notes)) {
    if (group.token_count == 0) build.empty_encounters.push_back(group.id);
    std::vector<double> values(bags.size(), 0.0);
    for (std::size_t b = 0; b < bags.size(); ++b) {
      for (const auto* note : group.notes) values[b] += bag_score(note->tokens, bags[b]);
    }
    build.table.add_row(group.id, std::move(values));
  }
  return build;
}

FeatureBuild build_cluster_features(const std::vector<corpus::CleanNote>& notes,
                                    const vecops::WordClusters& clusters,
                                    const vecops::WordClusterSimTable* sims, ClusterMode mode,
                                    const FeatureOptions& options) {
  if (mode == ClusterMode::affinity && sims == nullptr) {
    throw Error(ErrorCategory::parameter, "affinity features need a word-cluster similarity table");
  }
  std::vector<std::string> columns;
  for (std::size_t c = 0; c < clusters.k; ++c) columns.push_back("cluster" + std::to_string(c + 1));
  FeatureBuild build{FeatureTable(std::string(kClusterIdColumn), std::move(columns)), {}};

  std::vector<std::string> pooled;
  for (const auto& group : group_notes(notes)) {
    if (group.token_count == 0) {
      build.empty_encounters.push_back(group.id);
      if (options.strict_compat) continue;
    }
    std::vector<double> values(clusters.k, 0.0);
    if (mode == ClusterMode::percentage) {
      pooled.clear();
      for (const auto* note : group.notes) pooled.insert(pooled.end(), note->tokens.begin(), note->tokens.end());
      values = cluster_percentages(pooled, clusters);
    } else {
      for (const auto* note : group.notes) {
        const auto a = cluster_affinities(note->tokens, clusters, *sims);
        for (std::size_t c = 0; c < values.size(); ++c) values[c] += a[c];
      }
    }
    build.table.add_row(group.id, std::move(values));
  }
  return build;
}

}  // namespace notevec::features
