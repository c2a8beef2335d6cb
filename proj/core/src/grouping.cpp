#include "rusgroup/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "rusgroup/text.hpp"

namespace rusgroup {

using nlohmann::json;

namespace {

void require_distinct(std::span<const MiScoreReport> reports) {
  std::set<std::string_view> seen;
  for (const auto& r : reports) {
    if (!seen.insert(r.dataset_id).second) throw InputError("duplicate dataset_id: " + r.dataset_id);
  }
}

GroupAssignment empty_assignment(GroupMethod method) {
  GroupAssignment a;
  a.method = method;
  for (Interaction i : kAllInteractions) a.groups[i] = {};
  return a;
}

// Fills centroids and within_sse from the members' scores.
void add_statistics(GroupAssignment& a, std::span<const MiScoreReport> reports) {
  std::map<std::string_view, double> score;
  for (const auto& r : reports) score[r.dataset_id] = r.mi_score;
  for (const auto& [label, members] : a.groups) {
    if (members.empty()) continue;
    double mean = 0.0;
    for (const auto& id : members) mean += score[id];
    mean /= static_cast<double>(members.size());
    double sse = 0.0;
    for (const auto& id : members) sse += (score[id] - mean) * (score[id] - mean);
    a.centroids[label] = mean;
    a.within_sse[label] = sse;
  }
}

// Nearest of the anchors 0, 1, 2; a mean on a midpoint goes to the upper one.
Interaction nearest_anchor(double mean) {
  if (mean < 0.5) return Interaction::synergy;
  if (mean < 1.5) return Interaction::uniqueness;
  return Interaction::redundancy;
}

}  // namespace

DistanceMatrix distance_matrix(std::span<const MiScoreReport> reports) {
  require_distinct(reports);
  DistanceMatrix m;
  const std::size_t n = reports.size();
  m.entries.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    m.dataset_ids.push_back(reports[i].dataset_id);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::fabs(reports[i].mi_score - reports[j].mi_score);
      m.entries[i][j] = d;
      m.entries[j][i] = d;
    }
  }
  return m;
}

std::string to_csv(const DistanceMatrix& m) {
  std::string out;
  for (const auto& id : m.dataset_ids) out += "," + id;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.dataset_ids[i];
    for (double d : m.entries[i]) out += "," + text::format_double(d);
    out += "\n";
  }
  return out;
}

GroupAssignment group_by_anchor(std::span<const MiScoreReport> reports, const CategoryBoundaries& bounds) {
  bounds.validate();
  require_distinct(reports);
  GroupAssignment a = empty_assignment(GroupMethod::anchor);
  for (const auto& r : reports) a.groups[bounds.categorize(r.mi_score)].push_back(r.dataset_id);
  add_statistics(a, reports);
  return a;
}

Partition1D optimal_partition_1d(std::span<const double> sorted, std::size_t k) {
  const std::size_t n = sorted.size();
  if (k == 0) throw InputError("k must be >= 1");
  if (n < k) {
    throw InputError("need at least k=" + std::to_string(k) + " values to cluster, got " + std::to_string(n));
  }

  // seg[i * (n + 1) + j]: sum of squared deviations of sorted[i, j).
  const std::size_t w = n + 1;
  std::vector<double> seg(w * w, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      const double x = sorted[j];
      const double delta = x - mean;
      mean += delta / static_cast<double>(j - i + 1);
      m2 += delta * (x - mean);
      seg[i * w + j + 1] = std::max(m2, 0.0);
    }
  }

  // best[m][i]: optimal cost of sorted[i, n) in m clusters; cut[m][i]: end of
  // the first cluster in that optimum (earliest on ties).
  std::vector<std::vector<double>> best(k + 1, std::vector<double>(n + 1, 0.0));
  std::vector<std::vector<std::size_t>> cut(k + 1, std::vector<std::size_t>(n + 1, n));
  for (std::size_t i = 0; i < n; ++i) best[1][i] = seg[i * w + n];
  for (std::size_t m = 2; m <= k; ++m) {
    for (std::size_t i = 0; i + m <= n; ++i) {
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t j = i + 1; j + m - 1 <= n; ++j) lo = std::min(lo, seg[i * w + j] + best[m - 1][j]);
      const double tol = 1e-12 * (1.0 + std::fabs(lo));
      for (std::size_t j = i + 1; j + m - 1 <= n; ++j) {
        if (seg[i * w + j] + best[m - 1][j] <= lo + tol) {
          cut[m][i] = j;
          break;
        }
      }
      best[m][i] = lo;
    }
  }

  Partition1D out;
  std::size_t i = 0;
  for (std::size_t m = k; m >= 1; --m) {
    const std::size_t j = m == 1 ? n : cut[m][i];
    out.sizes.push_back(j - i);
    out.cost += seg[i * w + j];
    i = j;
  }
  return out;
}

GroupAssignment group_by_clustering(std::span<const MiScoreReport> reports, std::size_t k) {
  require_distinct(reports);
  if (k == 0) throw InputError("k must be >= 1");
  if (reports.size() < k) {
    throw InputError("group_by_clustering needs at least k=" + std::to_string(k) + " datasets, got " +
                     std::to_string(reports.size()));
  }

  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (reports[a].mi_score != reports[b].mi_score) return reports[a].mi_score < reports[b].mi_score;
    return reports[a].dataset_id < reports[b].dataset_id;
  });
  std::vector<double> sorted;
  sorted.reserve(order.size());
  for (std::size_t i : order) sorted.push_back(reports[i].mi_score);

  const Partition1D part = optimal_partition_1d(sorted, k);

  std::map<std::string_view, Interaction> label_of;
  std::map<Interaction, std::size_t> cluster_for;
  std::map<Interaction, double> mean_for;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < part.sizes.size(); ++c) {
    const std::size_t size = part.sizes[c];
    double mean = 0.0;
    for (std::size_t t = pos; t < pos + size; ++t) mean += sorted[t];
    mean /= static_cast<double>(size);
    const Interaction label = nearest_anchor(mean);
    if (auto prev = cluster_for.find(label); prev != cluster_for.end()) {
      throw LabelingConflictError("labeling conflict: cluster " + std::to_string(prev->second + 1) + " (mean " +
                                  text::format_double(mean_for[label]) + ") and cluster " + std::to_string(c + 1) +
                                  " (mean " + text::format_double(mean) + ") are both nearest anchor " +
                                  text::format_double(anchor_score(label)) + " (" +
                                  std::string(group_label(label)) + ")");
    }
    cluster_for[label] = c;
    mean_for[label] = mean;
    for (std::size_t t = pos; t < pos + size; ++t) label_of[reports[order[t]].dataset_id] = label;
    pos += size;
  }

  GroupAssignment a = empty_assignment(GroupMethod::dp_cluster);
  for (const auto& r : reports) {
    const Interaction label = label_of.at(r.dataset_id);
    a.groups[label].push_back(r.dataset_id);
    if (label != r.category) a.disagreements.push_back(r.dataset_id);
  }
  add_statistics(a, reports);
  return a;
}

void to_json(json& j, const DistanceMatrix& v) {
  j = json{{"dataset_ids", v.dataset_ids}, {"entries", v.entries}};
}

void from_json(const json& j, DistanceMatrix& v) {
  v.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
  v.entries = j.at("entries").get<std::vector<std::vector<double>>>();
  if (v.entries.size() != v.dataset_ids.size()) throw InputError("distance matrix: row count mismatch");
  for (const auto& row : v.entries) {
    if (row.size() != v.dataset_ids.size()) throw InputError("distance matrix: column count mismatch");
  }
}

}  // namespace rusgroup
