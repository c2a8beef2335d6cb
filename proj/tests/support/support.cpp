#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "commands.hpp"
#include "rusgroup/dataset_io.hpp"
#include "rusgroup/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup::testing {

fs::path data_dir() { return RUSGROUP_DATA_DIR; }
fs::path golden_dir() { return RUSGROUP_GOLDEN_DIR; }

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  const fs::path p = fs::temp_directory_path() /
                     ("rusgroup-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double oracle_token_f1(const std::string& a, const std::string& b, bool case_fold) {
  const auto ta = text::tokenize(a, case_fold);
  const auto tb = text::tokenize(b, case_fold);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::vector<bool> used(tb.size(), false);
  std::size_t common = 0;
  for (const auto& t : ta) {
    for (std::size_t j = 0; j < tb.size(); ++j) {
      if (!used[j] && tb[j] == t) {
        used[j] = true;
        ++common;
        break;
      }
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(ta.size() + tb.size());
}

double oracle_mi(const std::vector<PredictionTriplet>& triplets, const SimilarityFunction& fn) {
  double total = 0.0;
  for (const auto& t : triplets) total += fn(t.y1, t.ym) + fn(t.y2, t.ym);
  return total / static_cast<double>(triplets.size());
}

double oracle_sse(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - mean) * (v - mean);
  return s;
}

OraclePartition oracle_contiguous_partition(const std::vector<double>& sorted, std::size_t k) {
  OraclePartition best;
  best.cost = std::numeric_limits<double>::infinity();
  const std::size_t n = sorted.size();
  std::vector<std::size_t> sizes;
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t start, std::size_t left, double cost) {
    if (left == 1) {
      std::vector<double> seg(sorted.begin() + static_cast<std::ptrdiff_t>(start), sorted.end());
      const double total = cost + oracle_sse(seg);
      sizes.push_back(n - start);
      // Enumeration is lexicographic, so the first of a tie wins.
      if (std::isinf(best.cost) || total < best.cost - 1e-12 * (1.0 + std::abs(best.cost))) {
        best.cost = total;
        best.sizes = sizes;
      }
      sizes.pop_back();
      return;
    }
    for (std::size_t len = 1; start + len + (left - 1) <= n; ++len) {
      std::vector<double> seg(sorted.begin() + static_cast<std::ptrdiff_t>(start),
                              sorted.begin() + static_cast<std::ptrdiff_t>(start + len));
      sizes.push_back(len);
      rec(start + len, left - 1, cost + oracle_sse(seg));
      sizes.pop_back();
    }
  };
  if (k >= 1 && n >= k) rec(0, k, 0.0);
  return best;
}

double oracle_set_partition_cost(const std::vector<double>& values, std::size_t k) {
  const std::size_t n = values.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> block(n, 0);
  // Restricted growth strings enumerate each set partition once.
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (used + (n - i) < k) return;
    if (i == n) {
      if (used != k) return;
      std::vector<std::vector<double>> parts(k);
      for (std::size_t j = 0; j < n; ++j) parts[block[j]].push_back(values[j]);
      double c = 0.0;
      for (const auto& p : parts) c += oracle_sse(p);
      best = std::min(best, c);
      return;
    }
    for (std::size_t b = 0; b <= used && b < k; ++b) {
      block[i] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  if (k >= 1 && n >= k) rec(0, 0);
  return best;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
  static const std::vector<std::string> pool = {
      "cat",  "Cat",   "CAT",    "dog",     "a",       "the",   "The",    "bridge", "Ärger", "ärger", "ÉCOLE",
      "école", "Ωμέγα", "ωμέγα", "Привет",  "привет",  "日本語", "猫",     "🙂",      "🚀x",   "naïve", "NAÏVE",
      "x-y",   "it's", "...",    "!",       "(paren)", "42",    "3.14",   "ß",      "İ",     "ﬁ",     "é"};
  std::uniform_int_distribution<std::size_t> nw(0, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> sep(0, 5);
  std::string out;
  const std::size_t words = nw(rng);
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += sep(rng) == 0 ? "  \t" : " ";
    out += pool[pick(rng)];
    if (sep(rng) == 1) out += ",";
  }
  if (sep(rng) == 2) out = "  " + out + " ";
  return out;
}

std::vector<PredictionTriplet> random_triplets(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> answers = {"yes", "no", "Yes", "a red bike", "red bike", "a bike",
                                                   "forest", "beach", "the forest", ""};
  std::uniform_int_distribution<std::size_t> pick(0, answers.size() - 1);
  std::vector<PredictionTriplet> out;
  for (std::size_t i = 0; i < n; ++i) {
    PredictionTriplet t;
    t.instance_id = "i" + std::to_string(1000 + i);
    t.y1 = answers[pick(rng)];
    t.y2 = answers[pick(rng)];
    t.ym = answers[pick(rng)];
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<MiScoreReport> reports_from_scores(const std::vector<double>& scores, const CategoryBoundaries& bounds) {
  std::vector<MiScoreReport> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    MiScoreReport r;
    r.dataset_id = "d" + std::to_string(100 + i);
    r.mi_score = scores[i];
    r.per_draw_scores = {scores[i]};
    r.category = bounds.categorize(scores[i]);
    out.push_back(std::move(r));
  }
  return out;
}

TrainingRoster load_training_roster() {
  const json j = json::parse(read_file(data_dir() / "fixtures" / "training_datasets.json"));
  TrainingRoster r;
  for (const auto& d : j.at("training_datasets")) {
    r.datasets.emplace_back(d.at("dataset_id").get<std::string>(),
                            parse_interaction(d.at("declared_interaction").get<std::string>()));
  }
  for (const auto& [label, ids] : j.at("published_groups").items()) {
    r.published_groups[parse_group_label(label)] = ids.get<std::vector<std::string>>();
  }
  return r;
}

std::vector<PredictionTriplet> planted_triplets(Interaction label, std::size_t n, const std::string& prefix) {
  std::vector<PredictionTriplet> out;
  for (std::size_t i = 0; i < n; ++i) {
    PredictionTriplet t;
    t.instance_id = prefix + "-" + std::to_string(i);
    t.ym = "answer " + std::to_string(i);
    switch (label) {
      case Interaction::redundancy:
        t.y1 = t.ym;
        t.y2 = t.ym;
        break;
      case Interaction::uniqueness:
        t.y1 = t.ym;
        t.y2 = "other";
        break;
      case Interaction::synergy:
        t.y1 = "other";
        t.y2 = "another";
        break;
    }
    out.push_back(std::move(t));
  }
  return out;
}

StubFixture::StubFixture(stub::StubConfig config) : server_(std::make_unique<stub::StubServer>(std::move(config))) {
  server_->start();
}

std::unique_ptr<StubFixture> StubFixture::demo() {
  stub::StubConfig cfg = stub::StubConfig::load(data_dir() / "demo" / "stub_answers.json");
  cfg.port = 0;
  return std::make_unique<StubFixture>(std::move(cfg));
}

RoleConfigs StubFixture::roles(int max_retries) const {
  auto make = [&](ModelRole role, const std::string& model) {
    ModelRoleConfig c;
    c.role = role;
    c.endpoint_url = server_->chat_url();
    c.model_id = model;
    c.max_output_tokens = 32;
    c.request_timeout = std::chrono::milliseconds(5000);
    c.max_retries = max_retries;
    c.initial_backoff = std::chrono::milliseconds(5);
    return c;
  };
  return RoleConfigs{make(ModelRole::unimodal1, "demo-text"), make(ModelRole::unimodal2, "demo-vision"),
                     make(ModelRole::multimodal, "demo-mm")};
}

fs::path write_demo_config(const fs::path& dir, const std::string& chat_url, const fs::path& output_root,
                           const fs::path& cache_dir, const json& extra) {
  json cfg = json::parse(read_file(data_dir() / "demo" / "config.json"));
  const fs::path demo = data_dir() / "demo";
  cfg["corpus_root"] = (demo / "corpus").string();
  cfg["exclusion_policy"] = (data_dir() / "policies" / "sample_exclusion_policy.json").string();
  cfg["published_results"] = (data_dir() / "fixtures" / "published_comparison.jsonl").string();
  for (const char* role : {"unimodal1", "unimodal2", "multimodal"}) {
    cfg["endpoints"][role]["endpoint_url"] = chat_url;
    cfg["endpoints"][role]["initial_backoff_ms"] = 5;
    cfg["endpoints"][role]["max_retries"] = 2;
  }
  cfg["output_root"] = output_root.string();
  cfg["cache_dir"] = cache_dir.string();
  for (const auto& [k, v] : extra.items()) cfg[k] = v;
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  write_file_atomic(p, cfg.dump(2));
  return p;
}

CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"rusgroup"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  const std::string s = out.str();
  r.summary = s.empty() ? json() : json::parse(s.substr(0, s.find('\n')), nullptr, false);
  r.err = err.str();
  return r;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return out;
}

}  // namespace rusgroup::testing
