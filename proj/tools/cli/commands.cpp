#include "commands.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rusgroup/cache.hpp"
#include "rusgroup/dataset_io.hpp"
#include "rusgroup/error.hpp"
#include "rusgroup/eval.hpp"
#include "rusgroup/grouping.hpp"
#include "rusgroup/inference.hpp"
#include "rusgroup/manifest.hpp"
#include "rusgroup/mi_score.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup::cli {
namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string similarity;
  std::uint32_t draws = 0;
  std::uint32_t draw_size = 0;
  std::size_t k = 0;
  std::string out;
  std::string method;
  std::string predictions;
  std::string method_id;
  std::vector<std::string> kinds;
  std::size_t parallelism = 0;
};

class Run {
 public:
  Run(RunConfig cfg, Flags flags)
      : cfg_(std::move(cfg)), flags_(std::move(flags)), dir_(cfg_.output_root / cfg_.run_id()) {}

  const RunConfig& config() const { return cfg_; }
  const fs::path& dir() const { return dir_; }
  const Flags& flags() const { return flags_; }

  void emit(const std::string& rel, std::string_view contents) {
    write_file_atomic(dir_ / rel, contents);
    artifacts_.push_back(rel);
  }
  void note_artifact(const std::string& rel) { artifacts_.push_back(rel); }
  const std::vector<std::string>& artifacts() const { return artifacts_; }

  // Reads an upstream artifact or names the subcommand that produces it.
  json read_upstream(const std::string& rel, const std::string& producer) const {
    const fs::path p = dir_ / rel;
    if (!fs::exists(p)) {
      throw InputError("missing " + rel + " for this run; run `rusgroup " + producer + "` first");
    }
    try {
      return json::parse(read_file(p));
    } catch (const json::exception& e) {
      throw InputError(rel + ": " + e.what());
    }
  }

  std::vector<DatasetDescriptor> corpus() const { return discover_corpus(cfg_.corpus_root); }

 private:
  RunConfig cfg_;
  Flags flags_;
  fs::path dir_;
  std::vector<std::string> artifacts_;
};

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

std::vector<MiScoreReport> read_reports(const Run& run) {
  const json j = run.read_upstream("mi_scores.json", "score");
  return j.at("reports").get<std::vector<MiScoreReport>>();
}

// ---- subcommands -------------------------------------------------------------

int cmd_validate(Run& run, json& summary) {
  const PromptRegistry prompts = run.config().prompt_registry();
  json reports = json::array();
  bool accepted = true;
  std::size_t errors = 0;
  for (const auto& d : run.corpus()) {
    const LoadedDataset ds = load_dataset(run.config().corpus_root, d.dataset_id);
    ValidationReport r = validate_dataset(ds.instances, ds.descriptor);
    if (!prompts.contains(ds.descriptor.prompt_template_id)) {
      r.errors.push_back({"", "unknown_prompt_template",
                          "prompt template not registered: " + ds.descriptor.prompt_template_id});
    }
    accepted = accepted && r.accepted();
    errors += r.errors.size();
    reports.push_back(r);
  }
  run.emit("validation.json", dump_json(json{{"accepted", accepted}, {"datasets", reports}}));
  summary["datasets"] = reports.size();
  summary["errors"] = errors;
  summary["accepted"] = accepted;
  if (!accepted) {
    summary["status"] = "error";
    summary["category"] = "input";
    summary["message"] = "validation found " + std::to_string(errors) + " error(s); see validation.json";
    return kExitInput;
  }
  return kExitOk;
}

int cmd_predict(Run& run, json& summary) {
  const RunConfig& cfg = run.config();
  if (!cfg.endpoints) throw InputError("predict needs an \"endpoints\" block in the run config");
  PredictionCache cache(cfg.cache_dir);
  ChatClient client;
  const PromptRegistry prompts = cfg.prompt_registry();
  PredictionContext ctx;
  ctx.cache = &cache;
  ctx.client = &client;
  ctx.prompts = &prompts;
  ctx.render = cfg.render;
  ctx.media_root = cfg.media_root;

  std::size_t instances = 0;
  std::size_t hits = 0;
  const auto corpus = run.corpus();
  for (const auto& d : corpus) {
    const LoadedDataset ds = load_dataset(cfg.corpus_root, d.dataset_id);
    PredictOptions opts;
    opts.parallelism = cfg.parallelism;
    opts.checkpoint_path = run.dir() / "predictions" / (d.dataset_id + ".checkpoint.json");
    fs::create_directories(opts.checkpoint_path.parent_path());
    const auto triplets = predict_dataset(ds.instances, ds.descriptor, *cfg.endpoints, ctx, opts);
    for (const auto& t : triplets) {
      hits += t.provenance.unimodal1.cache_hit + t.provenance.unimodal2.cache_hit + t.provenance.multimodal.cache_hit;
    }
    instances += triplets.size();
    run.emit("predictions/" + d.dataset_id + ".jsonl", triplets_to_jsonl(triplets));
  }
  summary["datasets"] = corpus.size();
  summary["instances"] = instances;
  summary["requests_sent"] = client.requests_sent();
  summary["cache_hits"] = hits;
  return kExitOk;
}

int cmd_score(Run& run, json& summary) {
  const RunConfig& cfg = run.config();
  TripletStore store;
  std::vector<CorpusEntry> entries;
  for (const auto& d : run.corpus()) {
    const fs::path p = run.dir() / "predictions" / (d.dataset_id + ".jsonl");
    if (!fs::exists(p)) {
      throw InputError("missing predictions/" + d.dataset_id + ".jsonl for this run; run `rusgroup predict` first");
    }
    const LoadedDataset ds = load_dataset(cfg.corpus_root, d.dataset_id);
    store.add_all(d.dataset_id, read_triplets_jsonl(p));
    CorpusEntry e;
    e.dataset_id = d.dataset_id;
    for (const auto& inst : ds.instances) {
      e.instance_ids.push_back(inst.instance_id);
      e.has_options = e.has_options || !inst.options.empty();
    }
    entries.push_back(std::move(e));
  }

  const SimilarityRegistry registry = cfg.similarity_registry();
  std::set<std::string> used;
  const SimilaritySelector select = [&](const CorpusEntry& e) -> const SimilarityFunction& {
    std::string id = cfg.similarity_id;
    if (id == "auto") id = e.has_options ? "exact_match" : "token_f1";
    used.insert(id);
    return registry.get(id);
  };
  const auto reports = score_corpus(entries, store, select, cfg.sampling_plan, cfg.category_boundaries);

  json sims = json::array();
  for (const auto& id : used) sims.push_back(describe(registry.get(id)));
  run.emit("mi_scores.json", dump_json(json{{"similarity_id", cfg.similarity_id},
                                            {"similarities", sims},
                                            {"sampling_plan", cfg.sampling_plan},
                                            {"category_boundaries", cfg.category_boundaries},
                                            {"reports", reports}}));
  json scores = json::object();
  for (const auto& r : reports) scores[r.dataset_id] = r.mi_score;
  summary["datasets"] = reports.size();
  summary["mi_scores"] = scores;
  return kExitOk;
}

int cmd_distance(Run& run, json& summary) {
  const auto reports = read_reports(run);
  const DistanceMatrix m = distance_matrix(reports);
  run.emit("distance.json", dump_json(m));
  run.emit("distance.csv", to_csv(m));
  summary["datasets"] = m.size();
  return kExitOk;
}

int cmd_group(Run& run, json& summary) {
  const RunConfig& cfg = run.config();
  const auto reports = read_reports(run);
  const GroupAssignment anchor = group_by_anchor(reports, cfg.category_boundaries);
  std::optional<GroupAssignment> clustered;
  std::string cluster_error;
  try {
    clustered = group_by_clustering(reports, cfg.k);
  } catch (const InputError& e) {
    if (cfg.group_method == GroupMethod::dp_cluster) throw;
    cluster_error = e.what();
  }
  const GroupAssignment& selected = cfg.group_method == GroupMethod::anchor ? anchor : *clustered;
  run.emit("groups.json",
           dump_json(json{{"selected_method", to_string(cfg.group_method)},
                          {"k", cfg.k},
                          {"selected", selected},
                          {"anchor", anchor},
                          {"dp_cluster", clustered ? json(*clustered) : json{{"error", cluster_error}}}}));
  json sizes = json::object();
  for (const auto& [label, members] : selected.groups) sizes[std::string(group_label(label))] = members.size();
  summary["method"] = to_string(cfg.group_method);
  summary["group_sizes"] = sizes;
  summary["disagreements"] = clustered ? clustered->disagreements.size() : 0;
  if (!cluster_error.empty()) summary["dp_cluster_error"] = cluster_error;
  return kExitOk;
}

int cmd_manifest(Run& run, json& summary) {
  const RunConfig& cfg = run.config();
  const json groups = run.read_upstream("groups.json", "group");
  const GroupAssignment selected = groups.at("selected").get<GroupAssignment>();
  const ExclusionPolicy policy = cfg.exclusion_policy.empty() ? ExclusionPolicy{} : ExclusionPolicy::load(cfg.exclusion_policy);
  ManifestOptions opts;
  opts.base_config.apply_overrides(cfg.training_overrides);
  opts.parallelism = cfg.parallelism;
  const PromptRegistry prompts = cfg.prompt_registry();
  const fs::path root = cfg.corpus_root;
  const ManifestIndex index = build_group_manifests(
      selected, [&root](const std::string& id) { return load_dataset(root, id); }, policy, run.dir() / "manifests",
      prompts, opts);
  json counts = json::object();
  for (const auto& g : index.groups) {
    run.note_artifact("manifests/" + g.manifest_file);
    run.note_artifact("manifests/" + g.config_file);
    counts[g.group_label] = g.instance_count;
  }
  run.note_artifact("manifests/audit.jsonl");
  run.note_artifact("manifests/index.json");
  summary["instances"] = counts;
  summary["excluded"] = index.excluded.size();
  summary["warnings"] = index.warnings;
  return kExitOk;
}

int cmd_eval(Run& run, json& summary) {
  const RunConfig& cfg = run.config();
  const SimilarityRegistry registry = cfg.similarity_registry();
  const SimilarityFunction& fn = registry.get(cfg.eval_similarity_id);
  const bool from_triplets = run.flags().predictions.empty();
  std::string method_id = run.flags().method_id;
  if (method_id.empty()) method_id = from_triplets ? "multimodal_ym" : "mint";
  if (method_id.find_first_of("/\\") != std::string::npos || method_id == "." || method_id == "..") {
    throw InputError("method id must be a plain name: " + method_id);
  }

  std::vector<EvalResult> results;
  std::vector<std::string> skipped;
  for (const auto& d : run.corpus()) {
    if (!native_scoring_supported(d.dataset_id)) {
      skipped.push_back(d.dataset_id);
      continue;
    }
    std::vector<Prediction> preds;
    if (from_triplets) {
      const fs::path p = run.dir() / "predictions" / (d.dataset_id + ".jsonl");
      if (!fs::exists(p)) {
        throw InputError("missing predictions/" + d.dataset_id + ".jsonl for this run; run `rusgroup predict` first "
                         "or pass --predictions");
      }
      for (const auto& t : read_triplets_jsonl(p)) preds.push_back({t.instance_id, t.ym});
    } else {
      const fs::path p = fs::path(run.flags().predictions) / (d.dataset_id + ".jsonl");
      if (!fs::exists(p)) {
        skipped.push_back(d.dataset_id);
        continue;
      }
      preds = read_predictions_jsonl(p);
    }
    const LoadedDataset gold = load_dataset(cfg.corpus_root, d.dataset_id);
    results.push_back(score_predictions(method_id, preds, gold, fn, cfg.eval_threshold));
  }
  if (results.empty()) throw InputError("no dataset had predictions to score");
  run.emit("eval/" + method_id + ".jsonl", eval_results_to_jsonl(results));
  json acc = json::object();
  for (const auto& r : results) acc[r.dataset_id] = *r.accuracy;
  summary["method_id"] = method_id;
  summary["accuracy"] = acc;
  summary["skipped"] = skipped;
  return kExitOk;
}

int cmd_report(Run& run, json& summary) {
  const RunConfig& cfg = run.config();
  std::vector<EvalResult> results;
  if (!cfg.published_results.empty()) results = read_eval_results_jsonl(cfg.published_results);
  const fs::path eval_dir = run.dir() / "eval";
  if (fs::is_directory(eval_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(eval_dir)) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto more = read_eval_results_jsonl(f);
      results.insert(results.end(), more.begin(), more.end());
    }
  }
  if (results.empty()) {
    throw InputError("no evaluation results for this run; run `rusgroup eval` first or set published_results");
  }

  const ComparisonTable table = comparison_table(results);
  run.emit("report/table.txt", table.to_text());
  run.emit("report/table.csv", table.to_csv());

  std::vector<PlotKind> kinds;
  const bool explicit_kinds = !run.flags().kinds.empty();
  for (const auto& k : run.flags().kinds) kinds.push_back(parse_plot_kind(k));
  if (!explicit_kinds) {
    kinds = {PlotKind::bar_single_vs_group, PlotKind::radar_cross_dataset, PlotKind::bar_opensource};
  }
  json plots = json::array();
  json skipped = json::array();
  for (PlotKind kind : kinds) {
    PlotData data;
    try {
      data = plot_data(results, kind);
    } catch (const InputError& e) {
      if (explicit_kinds) throw;
      skipped.push_back({{"kind", to_string(kind)}, {"reason", e.what()}});
      continue;
    }
    const std::string base = "report/" + std::string(to_string(kind));
    run.emit(base + ".csv", data.to_csv());
    run.emit(base + ".json", dump_json(data.to_json()));
    plots.push_back(to_string(kind));
  }
  summary["rows"] = table.rows.size();
  summary["columns"] = table.columns.size();
  summary["plots"] = plots;
  summary["skipped_plots"] = skipped;
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input:
      return kExitInput;
    case ErrorKind::transport:
      return kExitTransport;
    case ErrorKind::protocol:
      return kExitProtocol;
  }
  return kExitInternal;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interaction-type dataset grouping pipeline"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("-c,--config", flags.config, "Run config JSON")->required();
  auto* seed = app.add_option("--seed", flags.seed, "Sampling seed");
  auto* similarity = app.add_option("--similarity", flags.similarity, "Similarity id, or auto");
  auto* draws = app.add_option("--draws", flags.draws, "Number of draws S");
  auto* draw_size = app.add_option("--draw-size", flags.draw_size, "Instances per draw C");
  auto* k = app.add_option("--k", flags.k, "Number of clusters");
  auto* out_root = app.add_option("--out", flags.out, "Output root");
  auto* method = app.add_option("--method", flags.method, "Grouping method: anchor or dp_cluster");
  auto* parallelism = app.add_option("--parallelism", flags.parallelism, "Concurrent requests / writers");
  app.add_option("--predictions", flags.predictions, "Directory of <dataset_id>.jsonl predictions (eval)");
  app.add_option("--method-id", flags.method_id, "Method id recorded by eval");
  app.add_option("--kind", flags.kinds, "Plot kind(s) for report");

  using Handler = int (*)(Run&, json&);
  const std::vector<std::pair<std::string, Handler>> commands = {
      {"validate", cmd_validate}, {"predict", cmd_predict},   {"score", cmd_score}, {"distance", cmd_distance},
      {"group", cmd_group},       {"manifest", cmd_manifest}, {"eval", cmd_eval},   {"report", cmd_report}};
  const std::map<std::string, std::string> help = {
      {"validate", "Check every dataset in the corpus"},
      {"predict", "Collect y1, y2, ym from the configured endpoints"},
      {"score", "Compute per-dataset interaction scores"},
      {"distance", "Pairwise dataset distance matrix"},
      {"group", "Partition datasets into G_R, G_U, G_S"},
      {"manifest", "Emit per-group ShareGPT manifests and training configs"},
      {"eval", "Score test-split predictions"},
      {"report", "Comparison table and plot data"}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n";
    out << json{{"status", "error"}, {"category", "input"}, {"message", e.what()}}.dump() << "\n";
    return kExitInput;
  }

  std::string name;
  Handler handler = nullptr;
  for (const auto& [n, fn] : commands) {
    if (app.got_subcommand(n)) {
      name = n;
      handler = fn;
    }
  }

  json summary{{"subcommand", name}, {"status", "ok"}};
  int code = kExitOk;
  try {
    RunConfig cfg = RunConfig::load(flags.config);
    if (seed->count()) cfg.set_seed(flags.seed);
    if (similarity->count()) cfg.set_similarity(flags.similarity);
    if (draws->count()) cfg.set_draws(flags.draws);
    if (draw_size->count()) cfg.set_draw_size(flags.draw_size);
    if (k->count()) cfg.set_k(flags.k);
    if (method->count()) cfg.set_group_method(parse_group_method(flags.method));
    if (out_root->count()) cfg.set_output_root(flags.out);
    if (parallelism->count()) {
      if (flags.parallelism < 1) throw InputError("--parallelism must be >= 1");
      cfg.parallelism = flags.parallelism;
    }
    Run run(std::move(cfg), flags);
    summary["run_id"] = run.config().run_id();
    summary["run_dir"] = run.dir().string();
    fs::create_directories(run.dir());
    code = handler(run, summary);
    summary["artifacts"] = run.artifacts();
  } catch (const Error& e) {
    code = exit_code_for(e.kind());
    summary["status"] = "error";
    summary["category"] = to_string(e.kind());
    summary["message"] = e.what();
    err << "rusgroup " << name << ": " << to_string(e.kind()) << " error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    code = kExitInternal;
    summary["status"] = "error";
    summary["category"] = "internal";
    summary["message"] = e.what();
    err << "rusgroup " << name << ": internal error: " << e.what() << "\n";
  }
  out << summary.dump() << "\n";
  return code;
}

}  // namespace rusgroup::cli
