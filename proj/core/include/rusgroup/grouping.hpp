#pragma once

// Pairwise dataset distance d(A, B) = |mi(A) - mi(B)| and the two readings of
// the grouping step: nearest-anchor assignment and exact 1-D k-means.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rusgroup/error.hpp"
#include "rusgroup/types.hpp"

namespace rusgroup {

struct DistanceMatrix {
  std::vector<std::string> dataset_ids;
  std::vector<std::vector<double>> entries;

  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return entries.at(i).at(j); }
  [[nodiscard]] std::size_t size() const noexcept { return dataset_ids.size(); }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;
};

// Rows and columns follow input order. Duplicate ids are an InputError.
DistanceMatrix distance_matrix(std::span<const MiScoreReport> reports);

// Header row ",id1,id2,...", then one row per dataset.
std::string to_csv(const DistanceMatrix& m);

// Every dataset goes to the group named by bounds.categorize(mi_score).
// Members keep input order; all three labels are present, possibly empty.
GroupAssignment group_by_anchor(std::span<const MiScoreReport> reports, const CategoryBoundaries& bounds = {});

struct Partition1D {
  // Cluster sizes from the lowest values up; they sum to n.
  std::vector<std::size_t> sizes;
  double cost = 0.0;
};

// Minimum total within-cluster sum of squares over contiguous k-partitions of
// `sorted` (ascending). Ties go to the lexicographically smallest `sizes`.
Partition1D optimal_partition_1d(std::span<const double> sorted, std::size_t k);

// Two clusters whose means are nearest the same anchor.
class LabelingConflictError : public InputError {
 public:
  using InputError::InputError;
};

// Exact 1-D k-means over the scores, each cluster labeled by the anchor
// (2, 1, 0) nearest its mean. Disagreements list datasets whose report
// category differs from their cluster label.
GroupAssignment group_by_clustering(std::span<const MiScoreReport> reports, std::size_t k = 3);

void to_json(nlohmann::json& j, const DistanceMatrix& v);
void from_json(const nlohmann::json& j, DistanceMatrix& v);

}  // namespace rusgroup
