#include "rusgroup/mi_score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "rusgroup/error.hpp"

namespace rusgroup {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in [0, bound) by rejection; std::uniform_int_distribution is not
// specified bit-for-bit across standard libraries.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

}  // namespace

DrawResult draw_indices(const SamplingPlan& plan, std::size_t dataset_size, std::size_t draw_index) {
  plan.validate();
  if (dataset_size == 0) throw InputError("cannot draw from an empty dataset");
  std::mt19937_64 rng(splitmix64(plan.seed ^ splitmix64(static_cast<std::uint64_t>(draw_index))));

  DrawResult out;
  if (plan.replacement_within_draw) {
    out.indices.resize(plan.draw_size);
    for (auto& i : out.indices) i = static_cast<std::size_t>(below(rng, dataset_size));
  } else {
    const std::size_t k = plan.effective_draw_size(dataset_size);
    out.clamped = k < plan.draw_size;
    std::vector<std::size_t> pool(dataset_size);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(rng, dataset_size - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    out.indices = std::move(pool);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

void TripletStore::add(std::string_view dataset_id, PredictionTriplet triplet) {
  auto& per = data_[std::string(dataset_id)];
  const std::string id = triplet.instance_id;
  per.insert_or_assign(id, std::move(triplet));
}

void TripletStore::add_all(std::string_view dataset_id, std::span<const PredictionTriplet> triplets) {
  for (const auto& t : triplets) add(dataset_id, t);
}

const PredictionTriplet* TripletStore::find(std::string_view dataset_id, std::string_view instance_id) const {
  auto d = data_.find(dataset_id);
  if (d == data_.end()) return nullptr;
  auto t = d->second.find(instance_id);
  return t == d->second.end() ? nullptr : &t->second;
}

bool TripletStore::contains_dataset(std::string_view dataset_id) const {
  return data_.find(dataset_id) != data_.end();
}

std::size_t TripletStore::size(std::string_view dataset_id) const {
  auto d = data_.find(dataset_id);
  return d == data_.end() ? 0 : d->second.size();
}

MiScoreReport mi_score(std::string_view dataset_id, std::span<const std::string> instance_ids,
                       const TripletStore& store, const SimilarityFunction& fn, const SamplingPlan& plan,
                       const CategoryBoundaries& bounds) {
  plan.validate();
  bounds.validate();
  if (instance_ids.empty()) throw InputError("dataset " + std::string(dataset_id) + " has no instances");
  const std::size_t n = instance_ids.size();

  MiScoreReport report;
  report.dataset_id = std::string(dataset_id);
  report.similarity_id = fn.id();
  report.sampling_plan = plan;

  std::vector<DrawResult> draws;
  draws.reserve(plan.num_draws);
  std::vector<bool> needed(n, false);
  for (std::size_t s = 0; s < plan.num_draws; ++s) {
    draws.push_back(draw_indices(plan, n, s));
    for (std::size_t i : draws.back().indices) needed[i] = true;
  }
  if (draws.front().clamped) {
    report.warnings.push_back("draw_size " + std::to_string(plan.draw_size) + " exceeds dataset size " +
                              std::to_string(n) + "; clamped to " + std::to_string(n));
  }

  std::vector<const PredictionTriplet*> triplets(n, nullptr);
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < n; ++i) {
    if (!needed[i]) continue;
    triplets[i] = store.find(dataset_id, instance_ids[i]);
    if (!triplets[i]) missing.push_back(instance_ids[i]);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = "missing prediction triplets for " + std::to_string(missing.size()) + " sampled instance(s):";
    for (const auto& id : missing) msg += " " + id;
    throw InputError(msg);
  }

  // One similarity pass over every sampled instance: d(y1, ym) + d(y2, ym).
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::size_t> slot(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!needed[i]) continue;
    slot[i] = pairs.size() / 2;
    pairs.emplace_back(triplets[i]->y1, triplets[i]->ym);
    pairs.emplace_back(triplets[i]->y2, triplets[i]->ym);
  }
  const std::vector<double> sims = fn.batch(pairs);
  std::vector<double> per_instance(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (needed[i]) per_instance[i] = sims[2 * slot[i]] + sims[2 * slot[i] + 1];
  }

  for (const auto& draw : draws) {
    double sum = 0.0;
    for (std::size_t i : draw.indices) sum += per_instance[i];
    report.per_draw_scores.push_back(std::clamp(sum / static_cast<double>(draw.indices.size()), 0.0, 2.0));
  }
  const double S = static_cast<double>(report.per_draw_scores.size());
  const double mean =
      std::accumulate(report.per_draw_scores.begin(), report.per_draw_scores.end(), 0.0) / S;
  report.mi_score = std::clamp(mean, 0.0, 2.0);
  if (report.per_draw_scores.size() > 1) {
    double ss = 0.0;
    for (double v : report.per_draw_scores) ss += (v - mean) * (v - mean);
    report.std_error = std::sqrt(ss / (S - 1.0)) / std::sqrt(S);
  }
  report.category = bounds.categorize(report.mi_score);
  return report;
}

MiScoreReport mi_score(std::string_view dataset_id, std::span<const PredictionTriplet> triplets,
                       const SimilarityFunction& fn, const SamplingPlan& plan, const CategoryBoundaries& bounds) {
  TripletStore store;
  std::vector<std::string> ids;
  ids.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (store.find(dataset_id, t.instance_id)) throw InputError("duplicate triplet for instance " + t.instance_id);
    ids.push_back(t.instance_id);
    store.add(dataset_id, t);
  }
  return mi_score(dataset_id, ids, store, fn, plan, bounds);
}

std::vector<MiScoreReport> score_corpus(std::span<const CorpusEntry> datasets, const TripletStore& store,
                                        const SimilaritySelector& select, const SamplingPlan& plan,
                                        const CategoryBoundaries& bounds) {
  std::vector<const CorpusEntry*> order;
  order.reserve(datasets.size());
  for (const auto& d : datasets) order.push_back(&d);
  std::sort(order.begin(), order.end(),
            [](const CorpusEntry* a, const CorpusEntry* b) { return a->dataset_id < b->dataset_id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->dataset_id == order[i - 1]->dataset_id) {
      throw InputError("duplicate dataset_id in corpus: " + order[i]->dataset_id);
    }
  }

  std::vector<MiScoreReport> out;
  out.reserve(order.size());
  for (const CorpusEntry* d : order) {
    try {
      out.push_back(mi_score(d->dataset_id, d->instance_ids, store, select(*d), plan, bounds));
    } catch (const InputError& e) {
      throw InputError(d->dataset_id + ": " + e.what());
    } catch (const TransportError& e) {
      throw TransportError(d->dataset_id + ": " + e.what(), e.status(), e.body());
    } catch (const ProtocolError& e) {
      throw ProtocolError(d->dataset_id + ": " + e.what(), e.raw_body());
    }
  }
  return out;
}

std::vector<MiScoreReport> score_corpus(std::span<const CorpusEntry> datasets, const TripletStore& store,
                                        const SimilarityFunction& fn, const SamplingPlan& plan,
                                        const CategoryBoundaries& bounds) {
  return score_corpus(
      datasets, store, [&fn](const CorpusEntry&) -> const SimilarityFunction& { return fn; }, plan, bounds);
}

}  // namespace rusgroup
