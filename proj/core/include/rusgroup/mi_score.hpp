#pragma once

// Dataset-level interaction score:
//
//   mi = (1/S) * sum_s (1/|draw_s|) * sum_{j in draw_s} [ d(y1_j, ym_j) + d(y2_j, ym_j) ]
//
// where d is a SimilarityFunction. The score lives in [0, 2].

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rusgroup/similarity.hpp"
#include "rusgroup/types.hpp"

namespace rusgroup {

struct DrawResult {
  std::vector<std::size_t> indices;
  // True when draw_size exceeded the dataset and was clamped.
  bool clamped = false;
};

// Indices are a pure function of (seed, draw_index, dataset_size). Without
// replacement the indices are distinct.
DrawResult draw_indices(const SamplingPlan& plan, std::size_t dataset_size, std::size_t draw_index);

// dataset_id -> instance_id -> triplet.
class TripletStore {
 public:
  void add(std::string_view dataset_id, PredictionTriplet triplet);
  void add_all(std::string_view dataset_id, std::span<const PredictionTriplet> triplets);

  [[nodiscard]] const PredictionTriplet* find(std::string_view dataset_id, std::string_view instance_id) const;
  [[nodiscard]] bool contains_dataset(std::string_view dataset_id) const;
  [[nodiscard]] std::size_t size(std::string_view dataset_id) const;

 private:
  std::map<std::string, std::map<std::string, PredictionTriplet, std::less<>>, std::less<>> data_;
};

// `instance_ids` fixes the index space the draws sample from.
MiScoreReport mi_score(std::string_view dataset_id, std::span<const std::string> instance_ids,
                       const TripletStore& store, const SimilarityFunction& fn, const SamplingPlan& plan,
                       const CategoryBoundaries& bounds = {});

// Convenience overload: triplets in instance order.
MiScoreReport mi_score(std::string_view dataset_id, std::span<const PredictionTriplet> triplets,
                       const SimilarityFunction& fn, const SamplingPlan& plan,
                       const CategoryBoundaries& bounds = {});

struct CorpusEntry {
  std::string dataset_id;
  std::vector<std::string> instance_ids;
  // Options present on any instance; drives the "auto" similarity choice.
  bool has_options = false;
};

using SimilaritySelector = std::function<const SimilarityFunction&(const CorpusEntry&)>;

// One report per dataset, ordered by dataset_id. Errors are rethrown with the
// dataset_id prefixed.
std::vector<MiScoreReport> score_corpus(std::span<const CorpusEntry> datasets, const TripletStore& store,
                                        const SimilaritySelector& select, const SamplingPlan& plan,
                                        const CategoryBoundaries& bounds = {});

std::vector<MiScoreReport> score_corpus(std::span<const CorpusEntry> datasets, const TripletStore& store,
                                        const SimilarityFunction& fn, const SamplingPlan& plan,
                                        const CategoryBoundaries& bounds = {});

}  // namespace rusgroup
