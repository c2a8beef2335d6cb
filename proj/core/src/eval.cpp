#include "rusgroup/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "rusgroup/error.hpp"
#include "rusgroup/text.hpp"

using nlohmann::json;

namespace rusgroup {
namespace {

std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::vector<std::string> lines_of(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t end = s.find('\n', pos);
    if (end == std::string_view::npos) end = s.size();
    std::string line(s.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    pos = end + 1;
  }
  return out;
}

bool same_value(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::fabs(*a - *b) < 1e-9;
}

}  // namespace

bool native_scoring_supported(std::string_view dataset_id) noexcept {
  return std::find(std::begin(kExternalOnlyDatasets), std::end(kExternalOnlyDatasets), dataset_id) ==
         std::end(kExternalOnlyDatasets);
}

double round_one_decimal(double v) noexcept { return std::round(v * 10.0) / 10.0; }

EvalResult score_predictions(std::string_view method_id, std::span<const Prediction> predictions,
                             const LoadedDataset& gold, const SimilarityFunction& fn, double threshold) {
  const std::string& dataset_id = gold.descriptor.dataset_id;
  if (!native_scoring_supported(dataset_id)) {
    throw InputError("native scoring is unsupported for " + dataset_id + "; ingest its accuracy as an external result");
  }
  if (gold.instances.empty()) throw InputError("dataset " + dataset_id + " has no gold instances");

  std::map<std::string_view, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.instance_id, &p).second) throw InputError("duplicate prediction id: " + p.instance_id);
  }
  std::set<std::string_view> gold_ids;
  for (const auto& inst : gold.instances) gold_ids.insert(inst.instance_id);
  for (const auto& p : predictions) {
    if (!gold_ids.contains(p.instance_id)) {
      throw InputError("prediction for unknown instance " + p.instance_id + " in " + dataset_id);
    }
  }

  EvalResult r;
  r.dataset_id = dataset_id;
  r.method_id = std::string(method_id);
  r.metric = fn.id() + ">=" + text::format_double(threshold);
  std::size_t correct = 0;
  for (const auto& inst : gold.instances) {
    InstanceOutcome o;
    o.instance_id = inst.instance_id;
    o.gold = inst.gold_answer;
    if (auto it = by_id.find(inst.instance_id); it != by_id.end()) {
      o.predicted = it->second->text;
      o.correct = fn(o.predicted, o.gold) >= threshold;
    } else {
      r.missing.push_back(inst.instance_id);
    }
    correct += o.correct ? 1 : 0;
    r.per_instance.push_back(std::move(o));
  }
  r.n = gold.instances.size();
  r.accuracy = round_one_decimal(100.0 * static_cast<double>(correct) / static_cast<double>(*r.n));
  return r;
}

// ---- comparison table -------------------------------------------------------

ComparisonTable comparison_table(std::span<const EvalResult> results, std::span<const std::string> row_order,
                                 std::span<const std::string> column_order) {
  ComparisonTable t;
  auto first_seen = [&](auto member) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : results) {
      const std::string& v = r.*member;
      if (seen.insert(v).second) out.push_back(v);
    }
    return out;
  };
  t.rows = row_order.empty() ? first_seen(&EvalResult::dataset_id)
                             : std::vector<std::string>(row_order.begin(), row_order.end());
  t.columns = column_order.empty() ? first_seen(&EvalResult::method_id)
                                   : std::vector<std::string>(column_order.begin(), column_order.end());

  std::map<std::string, std::size_t> row_of;
  std::map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (!row_of.emplace(t.rows[i], i).second) throw InputError("duplicate row: " + t.rows[i]);
  }
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (!col_of.emplace(t.columns[i], i).second) throw InputError("duplicate column: " + t.columns[i]);
  }

  t.cells.assign(t.rows.size(), std::vector<std::optional<double>>(t.columns.size()));
  std::vector<std::vector<bool>> filled(t.rows.size(), std::vector<bool>(t.columns.size(), false));
  for (const auto& r : results) {
    auto ri = row_of.find(r.dataset_id);
    auto ci = col_of.find(r.method_id);
    if (ri == row_of.end() || ci == col_of.end()) continue;
    auto& cell = t.cells[ri->second][ci->second];
    if (filled[ri->second][ci->second]) {
      if (!same_value(cell, r.accuracy)) {
        throw InputError("conflicting results for (" + r.dataset_id + ", " + r.method_id + ")");
      }
      continue;
    }
    filled[ri->second][ci->second] = true;
    cell = r.accuracy;
  }

  t.best.assign(t.rows.size(), std::vector<bool>(t.columns.size(), false));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::optional<double> top;
    for (const auto& c : t.cells[i]) {
      if (c && (!top || *c > *top)) top = c;
    }
    if (!top) continue;
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      t.best[i][j] = t.cells[i][j] && std::fabs(*t.cells[i][j] - *top) < 1e-9;
    }
  }

  t.column_means.assign(t.columns.size(), std::nullopt);
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (t.cells[i][j]) {
        sum += *t.cells[i][j];
        ++count;
      }
    }
    if (count) t.column_means[j] = sum / static_cast<double>(count);
  }
  return t;
}

std::string ComparisonTable::to_text() const {
  if (rows.empty() && columns.empty()) return "";
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"dataset"};
  header.insert(header.end(), columns.begin(), columns.end());
  grid.push_back(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> line{rows[i]};
    for (std::size_t j = 0; j < columns.size(); ++j) {
      line.push_back(cells[i][j] ? one_decimal(*cells[i][j]) + (best[i][j] ? "*" : "") : "-");
    }
    grid.push_back(std::move(line));
  }
  std::vector<std::string> mean{"mean"};
  for (const auto& m : column_means) mean.push_back(m ? one_decimal(*m) : "-");
  grid.push_back(std::move(mean));

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t j = 0; j < line.size(); ++j) width[j] = std::max(width[j], line[j].size());
  }
  std::string out;
  for (const auto& line : grid) {
    std::string row;
    for (std::size_t j = 0; j < line.size(); ++j) {
      if (j == 0) {
        row += line[j] + std::string(width[j] - line[j].size(), ' ');
      } else {
        row += "  " + std::string(width[j] - line[j].size(), ' ') + line[j];
      }
    }
    while (!row.empty() && row.back() == ' ') row.pop_back();
    out += row + "\n";
  }
  return out;
}

std::string ComparisonTable::to_csv() const {
  std::string out = "dataset_id";
  for (const auto& c : columns) out += "," + csv_field(c);
  out += ",best\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += csv_field(rows[i]);
    std::string winners;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out += ",";
      if (cells[i][j]) out += one_decimal(*cells[i][j]);
      if (best[i][j]) winners += (winners.empty() ? "" : ";") + columns[j];
    }
    out += "," + csv_field(winners) + "\n";
  }
  out += "mean";
  for (const auto& m : column_means) out += "," + (m ? one_decimal(*m) : std::string{});
  out += ",\n";
  return out;
}

// ---- plot data --------------------------------------------------------------

std::string_view to_string(PlotKind v) noexcept {
  switch (v) {
    case PlotKind::bar_single_vs_group:
      return "bar_single_vs_group";
    case PlotKind::radar_cross_dataset:
      return "radar_cross_dataset";
    case PlotKind::bar_opensource:
      break;
  }
  return "bar_opensource";
}

PlotKind parse_plot_kind(std::string_view s) {
  for (auto k : {PlotKind::bar_single_vs_group, PlotKind::radar_cross_dataset, PlotKind::bar_opensource}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown plot kind: " + std::string(s));
}

std::vector<std::string> required_methods(PlotKind kind) {
  switch (kind) {
    case PlotKind::bar_single_vs_group:
      return {"mint", "single_task"};
    case PlotKind::radar_cross_dataset:
      return {"mint", "insta_g1", "insta_g2", "insta_g3", "unselective_all", "mixlora", "base_model"};
    case PlotKind::bar_opensource:
      break;
  }
  return {"mint", "base_model"};
}

PlotData plot_data(std::span<const EvalResult> results, PlotKind kind, std::span<const std::string> methods) {
  std::vector<std::string> chosen;
  if (methods.empty()) {
    chosen = required_methods(kind);
    if (kind == PlotKind::bar_opensource) {
      for (const auto& r : results) {
        if (std::find(chosen.begin(), chosen.end(), r.method_id) == chosen.end()) chosen.push_back(r.method_id);
      }
    }
  } else {
    chosen.assign(methods.begin(), methods.end());
  }

  PlotData out;
  out.kind = kind;
  std::set<std::string> datasets_seen;
  for (const auto& m : chosen) {
    const bool present =
        std::any_of(results.begin(), results.end(), [&](const EvalResult& r) { return r.method_id == m; });
    if (!present) throw InputError("plot kind " + std::string(to_string(kind)) + " needs results for method " + m);
  }
  for (const auto& r : results) {
    if (std::find(chosen.begin(), chosen.end(), r.method_id) == chosen.end()) continue;
    if (datasets_seen.insert(r.dataset_id).second) out.datasets.push_back(r.dataset_id);
  }

  const ComparisonTable t = comparison_table(results, out.datasets, chosen);
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    PlotSeries s;
    s.method_id = chosen[j];
    for (std::size_t i = 0; i < out.datasets.size(); ++i) s.points.push_back({out.datasets[i], t.cells[i][j]});
    out.series.push_back(std::move(s));
  }
  return out;
}

std::string PlotData::to_csv() const {
  std::string out = "kind,method_id,dataset_id,accuracy\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      out += std::string(rusgroup::to_string(kind)) + "," + csv_field(s.method_id) + "," + csv_field(p.dataset_id) +
             "," + (p.accuracy ? text::format_double(*p.accuracy) : std::string{}) + "\n";
    }
  }
  return out;
}

json PlotData::to_json() const {
  json axis;
  if (kind == PlotKind::radar_cross_dataset) {
    axis = {{"type", "radar"}, {"spokes", datasets}, {"value", "accuracy (%)"}, {"min", 0}, {"max", 100}};
  } else {
    axis = {{"type", "bar"}, {"x", "dataset_id"}, {"categories", datasets}, {"y", "accuracy (%)"},
            {"min", 0},      {"max", 100}};
  }
  json s = json::array();
  for (const auto& series_item : series) {
    json values = json::array();
    for (const auto& p : series_item.points) values.push_back(p.accuracy ? json(*p.accuracy) : json(nullptr));
    s.push_back({{"method_id", series_item.method_id}, {"values", values}});
  }
  return json{{"kind", rusgroup::to_string(kind)}, {"axis", axis}, {"datasets", datasets}, {"series", s}};
}

PlotData parse_plot_csv(std::string_view csv) {
  const std::vector<std::string> lines = lines_of(csv);
  if (lines.empty() || lines.front() != "kind,method_id,dataset_id,accuracy") {
    throw InputError("plot csv: unexpected header");
  }
  PlotData out;
  bool have_kind = false;
  std::set<std::string> seen_datasets;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 4) throw InputError("plot csv line " + std::to_string(i + 1) + ": expected 4 fields");
    const PlotKind kind = parse_plot_kind(f[0]);
    if (have_kind && kind != out.kind) throw InputError("plot csv: mixed kinds");
    out.kind = kind;
    have_kind = true;
    if (out.series.empty() || out.series.back().method_id != f[1]) out.series.push_back({f[1], {}});
    std::optional<double> acc;
    if (!f[3].empty()) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), v);
      if (ec != std::errc{} || ptr != f[3].data() + f[3].size()) {
        throw InputError("plot csv line " + std::to_string(i + 1) + ": bad accuracy '" + f[3] + "'");
      }
      acc = v;
    }
    out.series.back().points.push_back({f[2], acc});
    if (seen_datasets.insert(f[2]).second) out.datasets.push_back(f[2]);
  }
  return out;
}

// ---- JSONL ------------------------------------------------------------------

std::vector<EvalResult> parse_eval_results_jsonl(std::string_view contents) {
  std::vector<EvalResult> out;
  const auto lines = lines_of(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      out.push_back(json::parse(lines[i]).get<EvalResult>());
    } catch (const json::exception& e) {
      throw InputError("eval results line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalResult> read_eval_results_jsonl(const std::filesystem::path& path) {
  try {
    return parse_eval_results_jsonl(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string eval_results_to_jsonl(std::span<const EvalResult> results) {
  std::string out;
  for (const auto& r : results) out += json(r).dump() + "\n";
  return out;
}

std::vector<Prediction> read_predictions_jsonl(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  const auto lines = lines_of(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      out.push_back(json::parse(lines[i]).get<Prediction>());
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void to_json(json& j, const InstanceOutcome& v) {
  j = json{{"instance_id", v.instance_id}, {"predicted", v.predicted}, {"gold", v.gold}, {"correct", v.correct}};
}

void from_json(const json& j, InstanceOutcome& v) {
  v.instance_id = j.at("instance_id").get<std::string>();
  v.predicted = j.at("predicted").get<std::string>();
  v.gold = j.at("gold").get<std::string>();
  v.correct = j.at("correct").get<bool>();
}

void to_json(json& j, const EvalResult& v) {
  j = json{{"dataset_id", v.dataset_id},
           {"method_id", v.method_id},
           {"accuracy", v.accuracy ? json(*v.accuracy) : json(nullptr)},
           {"n", v.n ? json(*v.n) : json(nullptr)},
           {"metric", v.metric},
           {"per_instance", v.per_instance},
           {"missing", v.missing}};
}

void from_json(const json& j, EvalResult& v) {
  v.dataset_id = j.at("dataset_id").get<std::string>();
  v.method_id = j.at("method_id").get<std::string>();
  const json& acc = j.at("accuracy");
  v.accuracy = acc.is_null() ? std::nullopt : std::optional<double>(acc.get<double>());
  if (v.accuracy && (*v.accuracy < 0.0 || *v.accuracy > 100.0)) {
    throw InputError("accuracy out of [0, 100] for (" + v.dataset_id + ", " + v.method_id + ")");
  }
  v.n = j.contains("n") && !j["n"].is_null() ? std::optional<std::size_t>(j["n"].get<std::size_t>()) : std::nullopt;
  v.metric = j.value("metric", std::string{});
  v.per_instance = j.value("per_instance", std::vector<InstanceOutcome>{});
  v.missing = j.value("missing", std::vector<std::string>{});
}

void to_json(json& j, const Prediction& v) { j = json{{"instance_id", v.instance_id}, {"text", v.text}}; }

void from_json(const json& j, Prediction& v) {
  v.instance_id = j.at("instance_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
}

}  // namespace rusgroup
