#include "notevec/learn.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "notevec/csv.h"
#include "notevec/error.h"

namespace notevec::learn {

namespace fs = std::filesystem;
using namespace std::chrono;

Date parse_date(std::string_view text) {
  auto fail = [&] {
    throw Error(ErrorCategory::format, "invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
  auto y = csv::parse_integer(text.substr(0, 4));
  auto m = csv::parse_integer(text.substr(5, 2));
  auto d = csv::parse_integer(text.substr(8, 2));
  if (!y || !m || !d) fail();
  const Date date{year{static_cast<int>(*y)}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
  if (!date.ok()) fail();
  return date;
}

std::string format_date(Date date) {
  char buffer[16];
  std::snprintf(buffer, sizeof buffer, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buffer;
}

int label_readmission(std::optional<long long> lag_days) {
  if (!lag_days) return 0;
  return *lag_days >= 1 && *lag_days <= 30 ? 1 : 0;
}

std::vector<LabelRecord> read_labels_csv(const fs::path& path) {
  const auto table = csv::read_file(path);
  const auto id_col = table.require_column(corpus::kEncounterIdColumn, path);
  const auto lag_col = table.require_column(kReadmitLagColumn, path);
  const auto date_col = table.require_column(kDischargeDateColumn, path);
  const auto lace_col = table.column(kLaceColumn);

  std::vector<LabelRecord> labels;
  labels.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCategory::format,
                  path.string() + ": data row " + std::to_string(r + 1) + ": " + what);
    };
    if (row.size() != table.header.size()) fail("wrong number of fields");
    if (row[id_col].empty()) fail("empty encounter id");
    LabelRecord record;
    record.encounter_id = row[id_col];
    if (!row[lag_col].empty() && row[lag_col] != "NA") {
      record.readmit_lag = csv::parse_integer(row[lag_col]);
      if (!record.readmit_lag) fail("READMITLAG '" + row[lag_col] + "' is not an integer");
    }
    try {
      record.discharge_date = parse_date(row[date_col]);
    } catch (const Error& e) {
      fail(e.what());
    }
    if (lace_col && !row[*lace_col].empty() && row[*lace_col] != "NA") {
      record.lace = csv::parse_real(row[*lace_col]);
      if (!record.lace) fail("LACE '" + row[*lace_col] + "' is not numeric");
    }
    labels.push_back(std::move(record));
  }
  return labels;
}

void write_labels_csv(const std::vector<LabelRecord>& labels, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  csv::write_record(out, {std::string(corpus::kEncounterIdColumn), std::string(kReadmitLagColumn),
                          std::string(kDischargeDateColumn), std::string(kLaceColumn)});
  for (const auto& l : labels) {
    csv::write_record(out, {l.encounter_id, l.readmit_lag ? std::to_string(*l.readmit_lag) : "",
                            format_date(l.discharge_date), l.lace ? csv::format_real(*l.lace) : ""});
  }
}

std::pair<Dataset, Dataset> split_by_date(const Dataset& data, Date cutoff) {
  Dataset train{data.feature_names, {}};
  Dataset test{data.feature_names, {}};
  for (const auto& row : data.rows) {
    (sys_days{row.discharge_date} < sys_days{cutoff} ? train : test).rows.push_back(row);
  }
  if (train.rows.empty()) {
    throw Error(ErrorCategory::parameter, "empty training partition: no discharge before " + format_date(cutoff));
  }
  if (test.rows.empty()) {
    throw Error(ErrorCategory::parameter, "empty test partition: no discharge on or after " + format_date(cutoff));
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Boosting

int Stump::predict(std::span<const double> x) const {
  return x[feature] > threshold ? polarity : -polarity;
}

StumpSearch best_stump(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                       std::span<const double> weights) {
  if (rows.empty()) throw Error(ErrorCategory::training, "no rows to fit a stump");
  const std::size_t n = rows.size();
  const std::size_t width = rows.front().size();
  double w_pos = 0.0, w_neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? w_pos : w_neg) += weights[i];

  StumpSearch best;
  bool have = false;
  auto consider = [&](std::size_t f, double threshold, int polarity, double error) {
    if (!have || error < best.error) {
      best.stump = Stump{f, {}, threshold, polarity, 0.0};
      best.error = error;
      have = true;
    }
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(n);
  for (std::size_t f = 0; f < width; ++f) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a][f] < rows[b][f]; });
    // Weight at or below the current threshold, split by label.
    double below_pos = 0.0, below_neg = 0.0;
    auto consider_both = [&](double threshold) {
      // +1: predict positive above the threshold.
      consider(f, threshold, +1, below_pos + (w_neg - below_neg));
      consider(f, threshold, -1, below_neg + (w_pos - below_pos));
    };
    consider_both(-kInf);
    std::size_t i = 0;
    while (i < n) {
      const double value = rows[order[i]][f];
      while (i < n && rows[order[i]][f] == value) {
        (labels[order[i]] == 1 ? below_pos : below_neg) += weights[order[i]];
        ++i;
      }
      if (i == n) break;
      const double next = rows[order[i]][f];
      double mid = value + (next - value) / 2.0;
      if (!(mid < next)) mid = value;
      consider_both(mid);
    }
    consider_both(kInf);
  }
  return best;
}

BoostModel train_adaboost(const Dataset& train, std::size_t rounds) {
  if (rounds < 1) throw Error(ErrorCategory::parameter, "model.rounds must be >= 1");
  const std::size_t n = train.rows.size();
  std::size_t positives = 0;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(n);
  y.reserve(n);
  for (const auto& row : train.rows) {
    if (row.features.size() != train.feature_names.size()) {
      throw Error(ErrorCategory::schema, "row '" + row.encounter_id + "' does not match the feature schema");
    }
    for (double v : row.features) {
      if (std::isnan(v)) throw Error(ErrorCategory::schema, "row '" + row.encounter_id + "' has a missing feature");
    }
    x.push_back(row.features);
    y.push_back(row.label);
    positives += row.label == 1;
  }
  if (positives == 0 || positives == n) {
    throw Error(ErrorCategory::training, "training data must contain both classes (" +
                                             std::to_string(positives) + " positives of " +
                                             std::to_string(n) + " rows)");
  }

  BoostModel model;
  model.rounds = rounds;
  model.feature_names = train.feature_names;
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  for (std::size_t t = 0; t < rounds; ++t) {
    auto found = best_stump(x, y, weights);
    const double eps = found.error;
    if (eps >= 0.5) break;
    const double clamped = std::clamp(eps, 1e-10, 1.0 - 1e-10);
    found.stump.alpha = 0.5 * std::log((1.0 - clamped) / clamped);
    found.stump.feature_name = train.feature_names[found.stump.feature];
    model.stumps.push_back(found.stump);
    model.round_errors.push_back(eps);
    if (eps <= 1e-10) break;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int target = y[i] == 1 ? 1 : -1;
      weights[i] *= std::exp(-found.stump.alpha * target * found.stump.predict(x[i]));
      total += weights[i];
    }
    for (double& w : weights) w /= total;
  }
  return model;
}

double predict_margin(const BoostModel& model, std::span<const double> features) {
  if (features.size() != model.feature_names.size()) {
    throw Error(ErrorCategory::schema, "expected " + std::to_string(model.feature_names.size()) +
                                           " features, got " + std::to_string(features.size()));
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (std::isnan(features[i])) {
      throw Error(ErrorCategory::schema, "missing value for feature '" + model.feature_names[i] + "'");
    }
  }
  double margin = 0.0;
  for (const auto& stump : model.stumps) margin += stump.alpha * stump.predict(features);
  return margin;
}

double predict_score(const BoostModel& model, std::span<const double> features) {
  return 1.0 / (1.0 + std::exp(-2.0 * predict_margin(model, features)));
}

// ---------------------------------------------------------------------------
// AUC

AucResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCategory::parameter, "scores and labels differ in length");
  }
  AucResult result;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::isnan(scores[i])) throw Error(ErrorCategory::domain, "NaN score at position " + std::to_string(i));
    (labels[i] == 1 ? result.positives : result.negatives) += 1;
  }
  if (result.positives == 0 || result.negatives == 0) {
    throw Error(ErrorCategory::undefined_auc,
                "AUC undefined: " + std::to_string(result.positives) + " positives, " +
                    std::to_string(result.negatives) + " negatives");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Rank sum of the positives with mid-ranks for ties.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t tied_positives = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tied_positives += labels[order[j]] == 1;
      ++j;
    }
    const double mid_rank = static_cast<double>(i + 1 + j) / 2.0;
    positive_rank_sum += mid_rank * static_cast<double>(tied_positives);
    i = j;
  }
  const double p = static_cast<double>(result.positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  result.auc = u / (p * static_cast<double>(result.negatives));
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

EvaluationResult fit_and_score(Dataset data, Date cutoff, std::size_t rounds, std::string name) {
  EvaluationResult result;
  result.feature_set = std::move(name);
  auto [train, test] = split_by_date(data, cutoff);
  const auto before = train.rows.size();
  std::erase_if(train.rows, [](const LabeledRow& row) {
    return std::any_of(row.features.begin(), row.features.end(), [](double v) { return std::isnan(v); });
  });
  result.dropped_incomplete = before - train.rows.size();
  if (train.rows.empty()) {
    throw Error(ErrorCategory::training, "every training row of '" + result.feature_set + "' has a missing feature");
  }
  const auto model = train_adaboost(train, rounds);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& row : test.rows) {
    scores.push_back(predict_score(model, row.features));
    labels.push_back(row.label);
  }
  result.auc = roc_auc(scores, labels);
  result.train_rows = train.rows.size();
  result.test_rows = test.rows.size();
  return result;
}

}  // namespace

EvaluationResult evaluate_pipeline(const features::FeatureTable& table,
                                   const std::vector<LabelRecord>& labels, Date cutoff,
                                   std::size_t rounds, std::string feature_set) {
  Dataset data{table.columns(), {}};
  for (const auto& record : labels) {
    const auto* values = table.find(record.encounter_id);
    if (!values) continue;
    data.rows.push_back({record.encounter_id, *values, label_readmission(record.readmit_lag),
                         record.discharge_date, record.lace});
  }
  if (data.rows.empty()) {
    throw Error(ErrorCategory::schema, "no encounter id of '" + feature_set + "' appears in the labels");
  }
  return fit_and_score(std::move(data), cutoff, rounds, std::move(feature_set));
}

EvaluationResult evaluate_baseline(const std::vector<LabelRecord>& labels, Date cutoff,
                                   std::size_t rounds) {
  Dataset data{{std::string(kLaceColumn)}, {}};
  for (const auto& record : labels) {
    if (!record.lace) continue;
    data.rows.push_back({record.encounter_id, {*record.lace}, label_readmission(record.readmit_lag),
                         record.discharge_date, record.lace});
  }
  if (data.rows.empty()) throw Error(ErrorCategory::schema, "no LACE values in the labels");
  return fit_and_score(std::move(data), cutoff, rounds, "baseline");
}

}  // namespace notevec::learn
