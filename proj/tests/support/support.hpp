#pragma once

// Oracles and fixtures shared by the unit tests and the acceptance runner.
// Oracles here are deliberately naive: direct loops and full enumeration.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rusgroup/inference.hpp"
#include "rusgroup/similarity.hpp"
#include "rusgroup/types.hpp"
#include "stub_server.hpp"

namespace rusgroup::testing {

std::filesystem::path data_dir();
std::filesystem::path golden_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

// ---- oracles -----------------------------------------------------------

// Multiset overlap by pairing each token with an unused equal token.
double oracle_token_f1(const std::string& a, const std::string& b, bool case_fold = true);

// Single pass over every instance: mean of d(y1, ym) + d(y2, ym).
double oracle_mi(const std::vector<PredictionTriplet>& triplets, const SimilarityFunction& fn);

// Sum of squared deviations from the mean, two-pass.
double oracle_sse(const std::vector<double>& values);

struct OraclePartition {
  double cost = 0.0;
  std::vector<std::size_t> sizes;  // only for the contiguous oracle
};

// Minimum over all compositions of n into k positive parts of `sorted`;
// ties keep the lexicographically smallest sizes.
OraclePartition oracle_contiguous_partition(const std::vector<double>& sorted, std::size_t k);

// Minimum over every set partition of `values` into exactly k non-empty blocks.
double oracle_set_partition_cost(const std::vector<double>& values, std::size_t k);

// ---- generators --------------------------------------------------------

// Words mixing ASCII, accented Latin, Greek, Cyrillic, CJK, emoji and punctuation.
std::string random_text(std::mt19937_64& rng, std::size_t max_words = 6);

// Random triplets whose answers come from a small pool so δ takes many values.
std::vector<PredictionTriplet> random_triplets(std::mt19937_64& rng, std::size_t n);

std::vector<MiScoreReport> reports_from_scores(const std::vector<double>& scores,
                                               const CategoryBoundaries& bounds = {});

// ---- fixtures ----------------------------------------------------------

struct TrainingRoster {
  std::vector<std::pair<std::string, Interaction>> datasets;
  std::map<Interaction, std::vector<std::string>> published_groups;
};
TrainingRoster load_training_roster();

// Triplets with d(y1,ym) + d(y2,ym) fixed at the anchor of `label` under exact match.
std::vector<PredictionTriplet> planted_triplets(Interaction label, std::size_t n, const std::string& prefix);

// Stub server bound to an ephemeral port with the demo answers loaded.
class StubFixture {
 public:
  explicit StubFixture(stub::StubConfig config);
  static std::unique_ptr<StubFixture> demo();
  stub::StubServer& server() { return *server_; }
  // Role configs pointing at this stub, fast backoff.
  [[nodiscard]] RoleConfigs roles(int max_retries = 3) const;

 private:
  std::unique_ptr<stub::StubServer> server_;
};

// Writes a run config for the demo corpus pointing at `stub_url`.
std::filesystem::path write_demo_config(const std::filesystem::path& dir, const std::string& chat_url,
                                        const std::filesystem::path& output_root,
                                        const std::filesystem::path& cache_dir,
                                        const nlohmann::json& extra = nlohmann::json::object());

struct CliResult {
  int code = 0;
  nlohmann::json summary;
  std::string err;
};
CliResult run_cli(const std::vector<std::string>& args);

// Every regular file under `root`, relative path -> bytes.
std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root);

}  // namespace rusgroup::testing
