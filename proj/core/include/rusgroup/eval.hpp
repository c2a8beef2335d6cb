#pragma once

// Test-split scoring, comparison tables and plot-ready series.
//
// Plot CSV schema, one row per point:
//   kind,method_id,dataset_id,accuracy
// `accuracy` is empty for a missing point.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rusgroup/dataset_io.hpp"
#include "rusgroup/similarity.hpp"

namespace rusgroup {

struct InstanceOutcome {
  std::string instance_id;
  std::string predicted;
  std::string gold;
  bool correct = false;

  friend bool operator==(const InstanceOutcome&, const InstanceOutcome&) = default;
};

struct EvalResult {
  std::string dataset_id;
  std::string method_id;
  // Percent, one decimal. Empty marks a cell with no number.
  std::optional<double> accuracy;
  std::optional<std::size_t> n;
  // How accuracy was obtained, e.g. "exact_match>=1" or "published".
  std::string metric;
  std::vector<InstanceOutcome> per_instance;
  // Gold instances that had no prediction (counted incorrect).
  std::vector<std::string> missing;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct Prediction {
  std::string instance_id;
  std::string text;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Datasets whose accuracy can only be ingested, not computed here.
inline constexpr std::string_view kExternalOnlyDatasets[] = {"magicbrush", "lncoco"};
bool native_scoring_supported(std::string_view dataset_id) noexcept;

double round_one_decimal(double v) noexcept;

// correct iff fn(predicted, gold) >= threshold.
EvalResult score_predictions(std::string_view method_id, std::span<const Prediction> predictions,
                             const LoadedDataset& gold, const SimilarityFunction& fn, double threshold = 1.0);

struct ComparisonTable {
  std::vector<std::string> rows;     // dataset ids
  std::vector<std::string> columns;  // method ids
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::vector<bool>> best;
  // Mean over the present cells of each column.
  std::vector<std::optional<double>> column_means;

  // Aligned text; best cells carry a trailing '*', missing cells read "-".
  [[nodiscard]] std::string to_text() const;
  // dataset_id,<methods...>,best ; last row "mean".
  [[nodiscard]] std::string to_csv() const;
};

// Empty row/column orders mean "order of first appearance". Results outside
// the given orders are ignored. Two results for one cell with different
// accuracies are an InputError.
ComparisonTable comparison_table(std::span<const EvalResult> results, std::span<const std::string> row_order = {},
                                 std::span<const std::string> column_order = {});

enum class PlotKind { bar_single_vs_group, radar_cross_dataset, bar_opensource };

std::string_view to_string(PlotKind v) noexcept;
PlotKind parse_plot_kind(std::string_view s);

// Methods each kind needs, in series order.
std::vector<std::string> required_methods(PlotKind kind);

struct PlotPoint {
  std::string dataset_id;
  std::optional<double> accuracy;

  friend bool operator==(const PlotPoint&, const PlotPoint&) = default;
};

struct PlotSeries {
  std::string method_id;
  std::vector<PlotPoint> points;

  friend bool operator==(const PlotSeries&, const PlotSeries&) = default;
};

struct PlotData {
  PlotKind kind = PlotKind::bar_single_vs_group;
  std::vector<std::string> datasets;
  std::vector<PlotSeries> series;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] nlohmann::json to_json() const;

  friend bool operator==(const PlotData&, const PlotData&) = default;
};

// With an empty `methods`, uses required_methods(kind); bar_opensource also
// appends every other method present. Each listed method must have results.
PlotData plot_data(std::span<const EvalResult> results, PlotKind kind, std::span<const std::string> methods = {});

PlotData parse_plot_csv(std::string_view csv);

std::vector<EvalResult> read_eval_results_jsonl(const std::filesystem::path& path);
std::vector<EvalResult> parse_eval_results_jsonl(std::string_view contents);
std::string eval_results_to_jsonl(std::span<const EvalResult> results);

// One prediction per line: {"instance_id": ..., "text": ...}.
std::vector<Prediction> read_predictions_jsonl(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const InstanceOutcome& v);
void from_json(const nlohmann::json& j, InstanceOutcome& v);
void to_json(nlohmann::json& j, const EvalResult& v);
void from_json(const nlohmann::json& j, EvalResult& v);
void to_json(nlohmann::json& j, const Prediction& v);
void from_json(const nlohmann::json& j, Prediction& v);

}  // namespace rusgroup
