// Acceptance runner: one PASS/FAIL line per primary criterion, SKIP for the
// adapter criterion (that component is not built here).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rusgroup/dataset_io.hpp"
#include "rusgroup/error.hpp"
#include "rusgroup/eval.hpp"
#include "rusgroup/grouping.hpp"
#include "rusgroup/inference.hpp"
#include "rusgroup/manifest.hpp"
#include "rusgroup/mi_score.hpp"
#include "support.hpp"

using namespace rusgroup;
namespace fs = std::filesystem;
namespace t = rusgroup::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) msgs_ += (msgs_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary + ", " + std::to_string(checks_) + " checks"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed: " + msgs_};
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::string msgs_;
};

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

Outcome mi_oracle() {
  Checker c;
  std::mt19937_64 rng(2024);
  const auto reg = SimilarityRegistry::with_builtins();
  const auto ids = reg.ids();
  for (int trial = 0; trial < 240; ++trial) {
    const std::size_t n = 1 + rng() % 50;
    const auto ts = t::random_triplets(rng, n);
    SamplingPlan plan;
    plan.num_draws = 1 + static_cast<std::uint32_t>(rng() % 6);
    plan.draw_size = static_cast<std::uint32_t>(n + rng() % 20);
    plan.seed = rng();
    plan.replacement_within_draw = false;
    const auto& fn = reg.get(ids[trial % ids.size()]);
    const double got = mi_score("ds", ts, fn, plan).mi_score;
    const double want = t::oracle_mi(ts, fn);
    c.expect(std::abs(got - want) <= 1e-9, "trial " + std::to_string(trial) + " got " + std::to_string(got) +
                                               " want " + std::to_string(want));
  }
  return c.done("240 datasets, n<=50");
}

Outcome anchor_reproduction() {
  // Group lists as published, independent of the fixture file.
  const std::map<Interaction, std::vector<std::string>> published = {
      {Interaction::redundancy, {"slake", "pathvqa", "vqarad", "ok-vqa", "nlvr", "flickr30k"}},
      {Interaction::synergy, {"mmimdb", "memecap", "hateful_memes", "ny_cartoon", "memotion", "scienceqa"}},
      {Interaction::uniqueness, {"enrico", "fer2013", "resisc45", "decimer", "ucmerced", "inaturalist"}}};
  Checker c;
  const auto roster = t::load_training_roster();
  c.expect(roster.datasets.size() == 18, "roster has " + std::to_string(roster.datasets.size()) + " datasets");
  TripletStore store;
  std::vector<CorpusEntry> entries;
  for (const auto& [id, label] : roster.datasets) {
    const auto ts = t::planted_triplets(label, 40, id);
    store.add_all(id, ts);
    CorpusEntry e{id, {}, false};
    for (const auto& x : ts) e.instance_ids.push_back(x.instance_id);
    entries.push_back(std::move(e));
  }
  SamplingPlan plan;
  plan.num_draws = 5;
  plan.draw_size = 25;
  plan.seed = 1;
  const auto reports =
      score_corpus(entries, store, SimilarityFunction::builtin(SimilarityKind::exact_match), plan);
  const auto g = group_by_anchor(reports);
  for (const auto& [label, ids] : published) {
    c.expect(sorted(g.groups.at(label)) == sorted(ids), std::string(group_label(label)) + " differs");
  }
  const auto dp = group_by_clustering(reports, 3);
  c.expect(dp.groups == g.groups, "dp_cluster disagrees with anchor grouping");
  return c.done("18 datasets, 3 groups exact");
}

Outcome pseudometric_and_clustering() {
  Checker c;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  auto scores = [&](std::size_t n) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(rng() % 3 == 0 ? static_cast<double>(rng() % 9) * 0.25 : u(rng));
    return v;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = distance_matrix(t::reports_from_scores(scores(2 + rng() % 10)));
    bool zero = true, sym = true, tri = true;
    for (std::size_t i = 0; i < m.size(); ++i) {
      zero = zero && m.at(i, i) == 0.0;
      for (std::size_t j = 0; j < m.size(); ++j) {
        sym = sym && m.at(i, j) == m.at(j, i);
        for (std::size_t k = 0; k < m.size(); ++k) tri = tri && m.at(i, k) <= m.at(i, j) + m.at(j, k) + 1e-12;
      }
    }
    c.expect(zero && sym && tri, "distance case " + std::to_string(trial));
  }
  for (int trial = 0; trial < 400; ++trial) {
    auto v = scores(1 + rng() % 8);
    const std::size_t k = 1 + rng() % std::min<std::size_t>(v.size(), 4);
    const double exhaustive = t::oracle_set_partition_cost(v, k);
    std::sort(v.begin(), v.end());
    c.expect(std::abs(optimal_partition_1d(v, k).cost - exhaustive) <= 1e-9,
             "set-partition case " + std::to_string(trial));
  }
  for (int trial = 0; trial < 400; ++trial) {
    auto v = scores(1 + rng() % 10);
    std::sort(v.begin(), v.end());
    const std::size_t k = 1 + rng() % v.size();
    const auto dp = optimal_partition_1d(v, k);
    const auto oracle = t::oracle_contiguous_partition(v, k);
    c.expect(std::abs(dp.cost - oracle.cost) <= 1e-9 && dp.sizes == oracle.sizes,
             "contiguous case " + std::to_string(trial));
  }
  return c.done("1000 distance cases, 400 n<=8 set partitions, 400 n<=10 contiguous");
}

Outcome similarity_laws() {
  Checker c;
  std::mt19937_64 rng(99);
  const auto reg = SimilarityRegistry::with_builtins();
  for (int i = 0; i < 1200; ++i) {
    const std::string a = t::random_text(rng, 8);
    const std::string b = t::random_text(rng, 8);
    for (const auto& id : reg.ids()) {
      const auto& fn = reg.get(id);
      const double ab = fn(a, b);
      c.expect(ab >= 0.0 && ab <= 1.0, id + " range");
      c.expect(ab == fn(b, a), id + " symmetry on '" + a + "','" + b + "'");
      c.expect(fn(a, a) == 1.0, id + " reflexivity on '" + a + "'");
    }
    c.expect(std::abs(token_f1_similarity(a, b) - t::oracle_token_f1(a, b)) <= 1e-12, "token_f1 oracle");
  }
  return c.done("1200 Unicode pairs x " + std::to_string(reg.ids().size()) + " scorers");
}

Outcome manifest_conformance() {
  Checker c;
  const fs::path corpus = t::data_dir() / "demo" / "corpus";
  const fs::path work = t::scratch_dir("accept-manifest");
  auto stub = t::StubFixture::demo();
  PredictionCache cache(work / "cache");
  ChatClient client;
  const auto prompts = PromptRegistry::builtin();
  PredictionContext ctx{&cache, &client, &prompts, {}, corpus};

  TripletStore store;
  std::vector<CorpusEntry> entries;
  for (const auto& d : discover_corpus(corpus)) {
    const auto ds = load_dataset(corpus, d.dataset_id);
    store.add_all(d.dataset_id, predict_dataset(ds.instances, ds.descriptor, stub->roles(), ctx));
    CorpusEntry e{d.dataset_id, {}, false};
    for (const auto& i : ds.instances) {
      e.instance_ids.push_back(i.instance_id);
      e.has_options = e.has_options || !i.options.empty();
    }
    entries.push_back(std::move(e));
  }
  const auto reg = SimilarityRegistry::with_builtins();
  const auto reports = score_corpus(
      entries, store,
      [&](const CorpusEntry& e) -> const SimilarityFunction& { return reg.get(e.has_options ? "exact_match" : "token_f1"); },
      SamplingPlan{5, 4, 7, false});
  const auto groups = group_by_anchor(reports);

  const fs::path out = work / "manifests";
  const auto index = build_group_manifests(
      groups, [&](const std::string& id) { return load_dataset(corpus, id); }, ExclusionPolicy{}, out, prompts);

  std::set<std::string> all_datasets;
  for (const auto& gm : index.groups) {
    const Interaction label = parse_group_label(gm.group_label);
    const std::string contents = read_file(out / gm.manifest_file);
    const auto records = parse_sharegpt_jsonl(contents);
    c.expect(sharegpt_to_jsonl(records) == contents, gm.group_label + " round trip");
    c.expect(records.size() == gm.instance_count, gm.group_label + " count");
    std::set<std::string> seen;
    for (const auto& r : records) {
      const auto ds = load_dataset(corpus, r.metadata.dataset_id);
      const auto it = std::find_if(ds.instances.begin(), ds.instances.end(),
                                   [&](const auto& i) { return i.instance_id == r.metadata.instance_id; });
      c.expect(it != ds.instances.end(), "record for unknown instance " + r.metadata.instance_id);
      if (it != ds.instances.end()) {
        const auto problems = check_sharegpt(r, &*it);
        c.expect(problems.empty(), r.metadata.instance_id + ": " + (problems.empty() ? "" : problems.front()));
      }
      c.expect(r.metadata.group_label == gm.group_label, "record in wrong group");
      seen.insert(r.metadata.dataset_id);
    }
    c.expect(std::vector<std::string>(seen.begin(), seen.end()) == sorted(groups.groups.at(label)),
             gm.group_label + " datasets differ from the partition");
    all_datasets.insert(seen.begin(), seen.end());
    if (gm.group_label == "G_R") {
      c.expect(read_file(out / gm.config_file) == read_file(t::golden_dir() / "training_config_G_R.yaml"),
               "G_R training config differs from golden file");
    }
  }
  c.expect(all_datasets.size() == 6, "not every demo dataset landed in a manifest");
  fs::remove_all(work);
  return c.done("30 records across 3 groups");
}

Outcome report_fidelity() {
  Checker c;
  const auto results = read_eval_results_jsonl(t::data_dir() / "fixtures" / "published_comparison.jsonl");
  const auto table = comparison_table(results);
  for (const auto& r : results) {
    const auto ri = std::find(table.rows.begin(), table.rows.end(), r.dataset_id) - table.rows.begin();
    const auto ci = std::find(table.columns.begin(), table.columns.end(), r.method_id) - table.columns.begin();
    c.expect(table.cells.at(ri).at(ci) == r.accuracy, r.dataset_id + "/" + r.method_id);
  }
  const std::string csv = table.to_csv();
  c.expect(csv.find("\nnlvr,89.1,67.3,48.5,66.3,78.2,56.4,") != std::string::npos, "nlvr row");
  const auto u = std::find(table.rows.begin(), table.rows.end(), "ucmerced") - table.rows.begin();
  const std::vector<bool> want_best = {true, false, true, false, true, false, false};
  c.expect(table.best.at(u) == want_best, "ucmerced best flags");

  const std::vector<std::string> roster = {"nlvr",       "pathvqa",   "slake",       "vqa",
                                           "hatefulmemes", "magicbrush", "nycartoon", "scienceqa",
                                           "inaturalist", "lncoco",    "screen2words", "ucmerced"};
  const auto plot = plot_data(results, PlotKind::radar_cross_dataset);
  c.expect(plot.series.size() == 7, "radar series count " + std::to_string(plot.series.size()));
  c.expect(plot.datasets == roster, "radar roster");
  for (const auto& s : plot.series) {
    c.expect(s.points.size() == 12, s.method_id + " points");
    for (std::size_t i = 0; i < s.points.size() && i < roster.size(); ++i) {
      c.expect(s.points[i].dataset_id == roster[i], s.method_id + " point order");
    }
  }
  c.expect(parse_plot_csv(plot.to_csv()) == plot, "plot csv round trip");
  return c.done("72 published cells, radar 7x12");
}

Outcome end_to_end() {
  Checker c;
  const fs::path work = t::scratch_dir("accept-e2e");
  auto stub = t::StubFixture::demo();
  const fs::path cache = work / "cache";
  const std::vector<std::string> pipeline = {"validate", "predict", "score", "distance",
                                             "group",    "manifest", "eval",  "report"};
  auto full_run = [&](const std::string& tag) {
    const fs::path cfg = t::write_demo_config(work / tag, stub->server().chat_url(), work / tag / "out", cache);
    std::string run_dir;
    for (const auto& cmd : pipeline) {
      const auto r = t::run_cli({cmd, "--config", cfg.string()});
      c.expect(r.code == 0, tag + " " + cmd + " exit " + std::to_string(r.code) + " " + r.err);
      run_dir = r.summary.value("run_dir", "");
    }
    return fs::path(run_dir);
  };
  (void)full_run("cold");
  stub->server().reset_counters();
  const auto a = t::snapshot_tree(full_run("warm1"));
  const auto b = t::snapshot_tree(full_run("warm2"));
  c.expect(stub->server().chat_requests() == 0, "warm runs hit the endpoint");
  c.expect(a.size() >= 20, "only " + std::to_string(a.size()) + " artifacts");
  c.expect(a == b, "warm runs differ");

  const fs::path cfg = t::write_demo_config(work / "faults", stub->server().chat_url(), work / "faults" / "out",
                                            work / "faults" / "cache");
  auto predict_code = [&](const stub::FaultPlan& f) {
    stub->server().set_faults(f);
    return t::run_cli({"predict", "--config", cfg.string()}).code;
  };
  stub::FaultPlan transport;
  transport.fail_first_n = 1 << 20;
  transport.fail_status = 503;
  c.expect(predict_code(transport) == 3, "transport failure exit code");
  stub::FaultPlan malformed;
  malformed.malformed_body = true;
  c.expect(predict_code(malformed) == 4, "malformed body exit code");
  stub::FaultPlan empty;
  empty.empty_choices = true;
  c.expect(predict_code(empty) == 4, "empty choices exit code");
  stub::FaultPlan non_string;
  non_string.non_string_content = true;
  c.expect(predict_code(non_string) == 4, "non-string content exit code");
  stub->server().set_faults({});
  const fs::path bad_cfg = t::write_demo_config(work / "bad", stub->server().chat_url(), work / "bad" / "out",
                                                work / "bad" / "cache", {{"sampling_plan", {{"num_draws", 0}}}});
  c.expect(t::run_cli({"score", "--config", bad_cfg.string()}).code == 2, "input error exit code");
  c.expect(t::run_cli({"group", "--config", cfg.string()}).code == 2, "missing upstream exit code");
  fs::remove_all(work);
  return c.done(std::to_string(a.size()) + " artifacts identical, exit codes 2/3/4");
}

struct Criterion {
  std::string name;
  double limit_s;  // 0: no limit stated
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"mi_score_oracle_equivalence", 10.0, mi_oracle},
      {"anchor_reproduction", 5.0, anchor_reproduction},
      {"pseudometric_and_clustering", 30.0, pseudometric_and_clustering},
      {"similarity_laws", 10.0, similarity_laws},
      {"manifest_conformance", 0.0, manifest_conformance},
      {"report_fidelity", 0.0, report_fidelity},
      {"end_to_end_determinism", 0.0, end_to_end},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_s > 0 && secs >= cr.limit_s) {
      o.pass = false;
      o.detail += "; over time limit";
    }
    char timing[64];
    if (cr.limit_s > 0) {
      std::snprintf(timing, sizeof timing, "%.2fs < %.0fs", secs, cr.limit_s);
    } else {
      std::snprintf(timing, sizeof timing, "%.2fs", secs);
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " [PRIMARY] " << cr.name << " (" << timing << ") " << o.detail
              << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << "SKIP [SECONDARY] adapter_conformance (local adapter is not part of this build)" << std::endl;
  return failed == 0 ? 0 : 1;
}
