// rfqa: feature extraction, forest training, hybrid scoring, evaluation and
// the consensus threshold sweep.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include "rfqa/config.hpp"
#include "rfqa/eval.hpp"
#include "rfqa/forest.hpp"
#include "rfqa/geometry.hpp"
#include "rfqa/qa_engine.hpp"
#include "rfqa/structure_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rfqa;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "rfqa: " << msg << '\n'; }

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string("missing required ") + flag);
}

void write_output(const RunConfig& cfg, const std::string& name, const std::string& content) {
  fs::create_directories(cfg.out);
  text::write_file(cfg.out / name, content);
  log("wrote " + (cfg.out / name).string());
}

struct TargetDir {
  std::string id;
  fs::path dir;
};

/// Either a directory of per-target subdirectories, or a single target
/// directory holding the model files itself.
std::vector<TargetDir> list_targets(const fs::path& pools) {
  if (!fs::is_directory(pools)) throw Error(ErrorCode::io, "pool directory " + pools.string() + " not found");
  if (!list_pdb_files(pools).empty()) return {{pools.filename().string(), pools}};
  std::vector<TargetDir> out;
  for (const auto& e : fs::directory_iterator(pools))
    if (e.is_directory()) out.push_back({e.path().filename().string(), e.path()});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (out.empty()) throw Error(ErrorCode::io, "no target directories under " + pools.string());
  return out;
}

std::optional<StructureModel> load_native(const RunConfig& cfg, const std::string& target) {
  if (cfg.natives.empty()) return std::nullopt;
  auto path = cfg.natives / (target + ".pdb");
  if (!fs::exists(path)) return std::nullopt;
  return parse_pdb(text::read_file(path), "native", target);
}

std::optional<AnnotationFile> load_annotation(const RunConfig& cfg, const std::string& target) {
  if (cfg.annotations.empty()) return std::nullopt;
  auto path = cfg.annotations / (target + ".ann");
  if (!fs::exists(path)) return std::nullopt;
  return parse_annotation_file(text::read_file(path));
}

/// Target sequence from the annotation file, else from a gap-free native.
std::optional<std::string> target_sequence(const RunConfig& cfg, const std::string& target,
                                           const std::optional<StructureModel>& native) {
  if (auto ann = load_annotation(cfg, target)) return ann->sequence;
  if (!native) return std::nullopt;
  std::string seq;
  for (const auto& r : native->residues) {
    if (r.seq_index != static_cast<int>(seq.size()) + 1) return std::nullopt;
    seq += r.aa;
  }
  return seq;
}

ModelPool load_target_pool(const TargetDir& t, const std::string& sequence) {
  auto loaded = load_pool(list_pdb_files(t.dir), t.id, sequence);
  for (const auto& d : loaded.diagnostics) log("warning: " + d);
  return std::move(loaded.pool);
}

TargetScores truths_from_natives(const RunConfig& cfg, const std::vector<TargetDir>& targets) {
  TargetScores out;
  for (const auto& t : targets) {
    auto native = load_native(cfg, t.id);
    if (!native) {
      log("warning: target " + t.id + ": no native structure, no truth scores");
      continue;
    }
    auto seq = target_sequence(cfg, t.id, native);
    if (!seq) {
      log("warning: target " + t.id + ": no sequence available, skipped");
      continue;
    }
    for (const auto& m : load_target_pool(t, *seq).models) {
      try {
        out[t.id][m.model_id] = gdt_ts(m, *native).gdt_ts;
      } catch (const Error& e) {
        log(std::string("warning: ") + e.what());
      }
    }
  }
  return out;
}

TargetScores load_truths(const RunConfig& cfg, const std::vector<TargetDir>* targets) {
  if (!cfg.truths.empty()) return parse_truth_file(text::read_file(cfg.truths));
  if (cfg.natives.empty() || !targets) throw UsageError("need --truths, or --natives with --pools");
  return truths_from_natives(cfg, *targets);
}

// ---------------------------------------------------------------------------

int cmd_extract_features(const RunConfig& cfg) {
  require(cfg.pools, "--pools");
  require(cfg.natives, "--natives");
  require(cfg.annotations, "--annotations");
  auto targets = list_targets(cfg.pools);
  if (!fs::is_directory(cfg.natives) || list_pdb_files(cfg.natives).empty())
    throw Error(ErrorCode::io, "no native structures in " + cfg.natives.string());

  std::vector<TrainingTarget> training;
  for (const auto& t : targets) {
    auto ann = load_annotation(cfg, t.id);
    if (!ann) {
      log("warning: target " + t.id + ": no annotation file, skipped");
      continue;
    }
    auto native = load_native(cfg, t.id);
    if (!native) log("warning: target " + t.id + ": no native in " + cfg.natives.string() + ", skipped");
    training.push_back({load_target_pool(t, ann->sequence), native, ann->annotations});
  }
  auto ds = build_dataset(training, cfg.threads, cfg.d0);
  for (const auto& d : ds.diagnostics) log("warning: " + d);
  if (ds.samples.empty()) throw Error(ErrorCode::validation, "no labelled samples extracted");

  std::array<std::size_t, kQualityClasses> hist{};
  for (const auto& s : ds.samples) ++hist[static_cast<std::size_t>(quality_class(s.true_quality))];
  log("extracted " + std::to_string(ds.samples.size()) + " samples");
  for (std::size_t c = 0; c < hist.size(); ++c)
    log("  quality [" + text::fixed(0.2 * double(c), 1) + "," + text::fixed(0.2 * double(c + 1), 1) +
        (c + 1 == hist.size() ? "]" : ")") + ": " + std::to_string(hist[c]));
  write_output(cfg, "features.tsv", write_feature_table(ds.samples));
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require(cfg.features, "--features");
  auto samples = parse_feature_table(text::read_file(cfg.features));
  if (samples.empty()) throw Error(ErrorCode::validation, "feature table " + cfg.features.string() + " has no rows");
  auto balanced = balanced_sample(samples, cfg.per_class, cfg.seed);
  for (const auto& d : balanced.diagnostics) log("note: " + d);
  auto data = to_training_set(balanced.samples);
  log("training " + std::to_string(cfg.forest.n_trees) + " trees on " + std::to_string(data.size()) + " samples");
  auto forest = train_forest(data, cfg.forest, cfg.seed, cfg.threads);

  std::optional<std::string> report;
  if (cfg.cv_folds == 0) {
    log("cross-validation disabled");
  } else if (data.size() < cfg.cv_folds) {
    log("warning: " + std::to_string(data.size()) + " samples, fewer than " + std::to_string(cfg.cv_folds) +
        " folds; cross-validation skipped");
  } else {
    auto cv = k_fold_cv(data, cfg.cv_folds, cfg.forest, derive_seed(cfg.seed, {0xC5ULL}), cfg.cv_repeats, cfg.threads);
    double mean = 0, baseline = 0;
    for (double y : data.y) mean += y;
    mean /= double(data.size());
    for (double y : data.y) baseline += std::abs(y - mean);
    baseline /= double(data.size());
    log("cross-validation MAE " + text::fixed(cv.mean_mae, 4) + " (sd " + text::fixed(cv.sd_mae, 4) +
        "), constant-mean baseline " + text::fixed(baseline, 4));
    report = write_cv_report(cv);
  }
  write_output(cfg, "forest.model", save_forest(forest));
  if (report) write_output(cfg, "cv_report.tsv", *report);
  return 0;
}

int cmd_score(const RunConfig& cfg) {
  require(cfg.pools, "--pools");
  require(cfg.annotations, "--annotations");
  require(cfg.model, "--model");
  auto forest = load_forest(text::read_file(cfg.model));
  forest.require_layout(kFeatureLayoutVersion, kFeatureCount);
  std::optional<std::map<std::string, double>> overrides;
  if (!cfg.scores.empty()) overrides = parse_score_file(text::read_file(cfg.scores));
  auto targets = list_targets(cfg.pools);

  std::vector<std::pair<std::string, std::string>> outputs;
  for (const auto& t : targets) {
    auto ann = load_annotation(cfg, t.id);
    if (!ann) {
      log("warning: target " + t.id + ": no annotation file, skipped");
      continue;
    }
    auto pool = load_target_pool(t, ann->sequence);
    QaOptions opt{cfg.gate, cfg.d0, cfg.cap, cfg.threads};
    auto pred = predict_pool(pool, ann->annotations, forest, opt, overrides ? &*overrides : nullptr);
    log("target " + t.id + ": " + std::to_string(pool.models.size()) + " models, pool_max " +
        (pred.pool_max ? text::fixed(*pred.pool_max, 4) : std::string("n/a")) + ", method " + to_string(pred.method));
    outputs.emplace_back(t.id + ".qa", write_qa_output(t.id, to_qa_records(pred, ann->sequence.size()), cfg.cap));
  }
  if (outputs.empty()) throw Error(ErrorCode::validation, "no target could be scored");
  for (const auto& [name, content] : outputs) write_output(cfg, name, content);
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  require(cfg.predictions, "--predictions");
  if (!fs::is_directory(cfg.predictions))
    throw Error(ErrorCode::io, "prediction directory " + cfg.predictions.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.predictions))
    if (e.is_regular_file() && e.path().extension() == ".qa") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::io, "no .qa files in " + cfg.predictions.string());

  std::map<std::string, QaFile> qa;
  TargetScores predicted;
  for (const auto& f : files) {
    auto parsed = parse_qa_output(text::read_file(f));
    for (const auto& r : parsed.records) predicted[parsed.target_id][r.model_id] = r.global_score;
    qa[parsed.target_id] = std::move(parsed);
  }

  std::optional<std::vector<TargetDir>> targets;
  if (!cfg.pools.empty()) targets = list_targets(cfg.pools);
  auto truths = load_truths(cfg, targets ? &*targets : nullptr);
  auto report = evaluate_global(predicted, truths);
  for (const auto& d : report.diagnostics) log("note: " + d);

  // local errors need the models and natives
  std::vector<double> real, guess;
  if (targets && !cfg.natives.empty()) {
    for (const auto& t : *targets) {
      auto it = qa.find(t.id);
      auto native = load_native(cfg, t.id);
      if (it == qa.end() || !native) continue;
      auto seq = target_sequence(cfg, t.id, native);
      if (!seq) continue;
      auto pool = load_target_pool(t, *seq);
      for (const auto& rec : it->second.records) {
        auto m = std::find_if(pool.models.begin(), pool.models.end(),
                              [&](const StructureModel& s) { return s.model_id == rec.model_id; });
        if (m == pool.models.end()) continue;
        for (const auto& rd : per_residue_distances(*m, *native)) {
          auto slot = static_cast<std::size_t>(rd.seq_index - 1);
          if (slot < rec.distances.size() && rec.distances[slot]) {
            real.push_back(rd.distance);
            guess.push_back(*rec.distances[slot]);
          }
        }
      }
    }
  } else {
    log("note: local error bins need --pools and --natives; bins left empty");
  }
  report.local_bins = local_binned_error(real, guess);
  log("ave_corr " + (report.ave_corr ? text::fixed(*report.ave_corr, 4) : std::string("n/a")) + ", over_corr " +
      (report.over_corr ? text::fixed(*report.over_corr, 4) : std::string("n/a")) + ", ave_loss " +
      text::fixed(report.ave_loss, 4));
  write_output(cfg, "global_summary.tsv", write_global_summary(report));
  write_output(cfg, "per_target.tsv", write_per_target(report));
  write_output(cfg, "local_bins.tsv", write_local_bins(report.local_bins));
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  require(cfg.pools, "--pools");
  auto targets = list_targets(cfg.pools);
  auto truths = load_truths(cfg, &targets);
  std::vector<SweepInput> inputs;
  for (const auto& t : targets) {
    auto seq = target_sequence(cfg, t.id, load_native(cfg, t.id));
    if (!seq) {
      log("warning: target " + t.id + ": no sequence available (annotation or native), skipped");
      continue;
    }
    auto pool = load_target_pool(t, *seq);
    if (pool.models.size() < 2) {
      log("note: target " + t.id + ": single-model pool, skipped");
      continue;
    }
    auto c = pairwise_scores(pool, cfg.threads);
    auto tt = truths.find(t.id);
    inputs.push_back(make_sweep_input(c, t.id, tt == truths.end() ? ScoreMap{} : tt->second));
    log("target " + t.id + ": pool_max " + text::fixed(c.pool_max, 4));
  }
  if (inputs.empty()) throw Error(ErrorCode::validation, "no multi-model pool to sweep");
  write_output(cfg, "sweep.tsv", write_sweep(threshold_sweep(inputs, cfg.thresholds)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Protein model quality assessment: hybrid consensus/single-model scoring"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  struct Flag {
    CLI::Option* option;
    std::string key;
    std::string* value;
  };
  std::vector<Flag> flags;
  std::map<std::string, std::string> values;
  std::string config_path;

  auto add = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    auto* value = &values[sub->get_name() + "/" + key];
    flags.push_back({sub->add_option(name, *value, help), key, value});
  };
  auto shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    add(sub, "--seed", "seed", "Random seed");
    add(sub, "--threads", "threads", "Worker threads (default: all cores)");
    add(sub, "--out", "out", "Output directory");
  };

  auto* extract = app.add_subcommand("extract-features", "Label residues of training pools and write features.tsv");
  shared(extract);
  add(extract, "--pools", "pools", "Directory of <target>/ model directories");
  add(extract, "--natives", "natives", "Directory of <target>.pdb native structures");
  add(extract, "--annotations", "annotations", "Directory of <target>.ann predicted annotations");
  add(extract, "--d0", "d0", "S-score distance scale");

  auto* train = app.add_subcommand("train", "Train the forest and write forest.model and cv_report.tsv");
  shared(train);
  add(train, "--features", "features", "Feature table from extract-features");
  add(train, "--trees", "trees", "Number of trees");
  add(train, "--mtry", "mtry", "Features tried per split (0: floor(sqrt(p)))");
  add(train, "--min-leaf", "min_leaf", "Minimum samples per leaf");
  add(train, "--max-depth", "max_depth", "Maximum depth (0: unlimited)");
  add(train, "--per-class", "per_class", "Samples drawn per quality class");
  add(train, "--cv-folds", "cv_folds", "Cross-validation folds (0: off)");
  add(train, "--cv-repeats", "cv_repeats", "Cross-validation repeats");

  auto* score = app.add_subcommand("score", "Score model pools and write <target>.qa");
  shared(score);
  add(score, "--pools", "pools", "Directory of <target>/ model directories, or one target directory");
  add(score, "--annotations", "annotations", "Directory of <target>.ann predicted annotations");
  add(score, "--model", "model", "Forest file from train");
  add(score, "--scores", "scores", "External single-model scores, '<model> <score>' per line");
  add(score, "--gate", "gate", "Consensus gate on the pool's best pairwise score");
  add(score, "--cap", "cap", "Distance cap in Å");
  add(score, "--d0", "d0", "S-score distance scale");

  auto* evaluate = app.add_subcommand("evaluate", "Compare QA files with true scores");
  shared(evaluate);
  add(evaluate, "--predictions", "predictions", "Directory of .qa files");
  add(evaluate, "--truths", "truths", "True scores, '<target> <model> <gdt_ts>' per line");
  add(evaluate, "--pools", "pools", "Model pools (for local errors or truths from natives)");
  add(evaluate, "--natives", "natives", "Native structures");
  add(evaluate, "--annotations", "annotations", "Directory of <target>.ann (sequence source)");

  auto* sweep = app.add_subcommand("sweep-threshold", "Average consensus correlation by pool_max threshold");
  shared(sweep);
  add(sweep, "--pools", "pools", "Directory of <target>/ model directories");
  add(sweep, "--truths", "truths", "True scores, '<target> <model> <gdt_ts>' per line");
  add(sweep, "--natives", "natives", "Native structures (truths when --truths is absent)");
  add(sweep, "--annotations", "annotations", "Directory of <target>.ann (sequence source)");
  add(sweep, "--thresholds", "thresholds", "Comma-separated thresholds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  CLI::App* active = app.get_subcommands().front();
  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(text::read_file(config_path));
    for (const auto& f : flags)
      if (f.option->count()) cfg.set(f.key, *f.value);
    cfg.validate();
  } catch (const std::exception& e) {
    log(std::string("configuration error: ") + e.what());
    return kUsageError;
  }

  try {
    const std::string name = active->get_name();
    if (name == "extract-features") return cmd_extract_features(cfg);
    if (name == "train") return cmd_train(cfg);
    if (name == "score") return cmd_score(cfg);
    if (name == "evaluate") return cmd_evaluate(cfg);
    return cmd_sweep(cfg);
  } catch (const UsageError& e) {
    log(std::string("usage error: ") + e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kDataError;
  }
}
