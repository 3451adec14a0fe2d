#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "notevec/features.h"

namespace notevec::learn {

using Date = std::chrono::year_month_day;

/// Strict `YYYY-MM-DD`; throws a format error otherwise.
Date parse_date(std::string_view text);
std::string format_date(Date date);

inline constexpr Date kDefaultCutoff{std::chrono::year{2014}, std::chrono::month{7}, std::chrono::day{1}};

/// 1 when 1 <= lag <= 30 days, else 0 (missing counts as 0).
int label_readmission(std::optional<long long> lag_days);

/// One row of the labels CSV.
struct LabelRecord {
  std::string encounter_id;
  std::optional<long long> readmit_lag;
  Date discharge_date;
  std::optional<double> lace;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

inline constexpr std::string_view kReadmitLagColumn = "READMITLAG";
inline constexpr std::string_view kDischargeDateColumn = "DISCHARGEDATE";
inline constexpr std::string_view kLaceColumn = "LACE";

/// Header `PAT_ENC_CSN_ID,READMITLAG,DISCHARGEDATE,LACE` (LACE optional).
std::vector<LabelRecord> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::vector<LabelRecord>& labels, const std::filesystem::path& path);

struct LabeledRow {
  std::string encounter_id;
  std::vector<double> features;
  int label = 0;
  Date discharge_date;
  std::optional<double> baseline_score;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<LabeledRow> rows;
};

/// train: date < cutoff; test: date >= cutoff. Throws a parameter error if
/// either side is empty.
std::pair<Dataset, Dataset> split_by_date(const Dataset& data, Date cutoff);

/// h(x) = polarity if x > threshold, else -polarity.
struct Stump {
  std::size_t feature = 0;
  std::string feature_name;
  double threshold = 0.0;
  int polarity = 1;
  double alpha = 0.0;

  int predict(std::span<const double> x) const;
};

struct BoostModel {
  std::vector<Stump> stumps;
  std::size_t rounds = 0;
  std::vector<std::string> feature_names;
  /// Weighted training error of the stump chosen in each completed round.
  std::vector<double> round_errors;
};

/// Lowest weighted error stump over all features, thresholds (midpoints of
/// consecutive distinct values plus -inf and +inf) and both polarities.
/// Ties keep the earliest feature, then threshold, then polarity +1.
/// Labels are 0/1; weights need not be normalised.
struct StumpSearch {
  Stump stump;
  double error = 0.0;
};
StumpSearch best_stump(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                       std::span<const double> weights);

/// Discrete AdaBoost with decision stumps.
BoostModel train_adaboost(const Dataset& train, std::size_t rounds);

/// sum_t alpha_t h_t(x)
double predict_margin(const BoostModel& model, std::span<const double> features);
/// 1 / (1 + exp(-2 margin)). Throws a schema error on a width mismatch or
/// a missing (NaN) feature.
double predict_score(const BoostModel& model, std::span<const double> features);

struct AucResult {
  double auc = 0.5;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Mann-Whitney AUC with ties counted as one half. Throws undefined_auc
/// unless both classes are present.
AucResult roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvaluationResult {
  std::string feature_set;
  AucResult auc;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t dropped_incomplete = 0;
};

/// Inner join of features with labels, drop incomplete training rows, split
/// by date, train, score the test rows.
EvaluationResult evaluate_pipeline(const features::FeatureTable& table,
                                   const std::vector<LabelRecord>& labels, Date cutoff,
                                   std::size_t rounds, std::string feature_set = "features");

/// The same run with the LACE column as the only feature (rows without a
/// LACE value are left out).
EvaluationResult evaluate_baseline(const std::vector<LabelRecord>& labels, Date cutoff,
                                   std::size_t rounds);

}  // namespace notevec::learn
