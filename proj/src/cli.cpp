#include "bvae/cli.hpp"

#include "bvae/checkpoint.hpp"
#include "bvae/config.hpp"
#include "bvae/errors.hpp"
#include "bvae/evaluation.hpp"
#include "bvae/latentviz.hpp"
#include "bvae/scoring.hpp"
#include "bvae/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace bvae::cli {

namespace fs = std::filesystem;

fs::path create_run_directory(const fs::path& root, const std::string& prefix) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (!fs::is_directory(root)) throw IoError("cannot create output root " + root.string());
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &utc);
  const std::string base = prefix + "-" + stamp;
  for (int n = 1; n < 10000; ++n) {
    const fs::path dir = root / (n == 1 ? base : base + "-" + std::to_string(n));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  }
  throw IoError("no free run directory name under " + root.string());
}

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int runs = 1;
  std::vector<std::string> sets;
  bool has_seed = false;
  bool has_runs = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value experiment file");
  sub->add_option("--out", c.out, std::string("output root (default $") + kOutputRootEnv + " or ./runs)");
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&c](const std::uint64_t& v) {
        c.seed = v;
        c.has_seed = true;
      },
      "master seed");
  sub->add_option_function<int>(
      "--runs",
      [&c](const int& v) {
        c.runs = v;
        c.has_runs = true;
      },
      "number of runs (seeds seed .. seed+runs-1)");
  sub->add_option("--set", c.sets, "override one config key (key=value); repeatable");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.has_seed) cfg.seed = c.seed;
  if (c.has_runs) cfg.runs = c.runs;
  cfg.tsne.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

fs::path output_root(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "runs";
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file);
  os << text;
  if (!os) throw IoError("cannot write " + file.string());
}

std::string run_name(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "run-%02d", r);
  return buf;
}

void write_training_log(const fs::path& file, const std::vector<EpochLog>& log) {
  std::ofstream os(file);
  os << "epoch,recon,kl,elbo_loss,grad_loss,total_J,val_loss,lr\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train.recon, e.train.kl, e.train.elbo_loss,
                  e.train.grad_loss, e.train.total_J, e.val_loss, e.lr);
    os << buf;
  }
  if (!os) throw IoError("cannot write " + file.string());
}

fs::path checkpoint_file(const std::string& arg) {
  fs::path p(arg);
  if (fs::is_directory(p)) p /= "model.ckpt";
  if (!fs::exists(p)) throw ConfigError("checkpoint: '" + p.string() + "' does not exist");
  return p;
}

std::vector<ScoreKind> kinds_for(const std::string& arg, ModelKind model) {
  if (arg == "all") return score_kinds_for(model);
  const ScoreKind k = parse_score_kind(arg);
  if (k == ScoreKind::elbo && model == ModelKind::cae) throw ConfigError("kind: elbo is undefined for a cae");
  return {k};
}

std::map<std::string, std::string> score_metadata(const TrainedModel& trained, const ScoringConfig& scoring) {
  return {{"model_kind", to_string(trained.model.spec().kind)},
          {"beta", format_real(trained.config.beta)},
          {"alpha", format_real(trained.config.alpha)},
          {"gamma", format_real(scoring.gamma)},
          {"elbo_beta", format_real(scoring.elbo_beta)},
          {"threshold_strategy", scoring.threshold.str()},
          {"fingerprint", trained.fingerprint},
          {"seed", std::to_string(trained.config.seed)}};
}

void print_metrics(std::ostream& out, const std::string& what, const std::vector<ScoreRecord>& records) {
  bool labelled = !records.empty();
  for (const auto& r : records) labelled = labelled && r.ground_truth && *r.ground_truth != Label::unknown;
  if (!labelled) return;
  const ConfusionCounts c = confusion(records);
  const Metrics m = precision_recall_f1(c);
  char buf[160];
  std::snprintf(buf, sizeof buf, "  %-8s tp=%lld fp=%lld tn=%lld fn=%lld  P=%.3f R=%.3f F1=%.3f%s\n", what.c_str(),
                static_cast<long long>(c.tp), static_cast<long long>(c.fp), static_cast<long long>(c.tn),
                static_cast<long long>(c.fn), m.precision, m.recall, m.f1, m.degenerate() ? "  (degenerate)" : "");
  out << buf;
  if (c.tp + c.fn == 0) out << "  warning: no positives in the test set\n";
}

std::vector<ScoreRecord> score_all(TrainedModel& trained, const DatasetSplit& split, const std::vector<ScoreKind>& kinds,
                                   const ScoringConfig& scoring, std::ostream& out) {
  std::vector<ScoreRecord> all;
  for (ScoreKind k : kinds) {
    ScoreReport rep = score_split(trained, split, k, scoring);
    out << "  " << to_string(k) << " threshold " << rep.threshold << " (" << scoring.threshold.str() << ")\n";
    print_metrics(out, to_string(k), rep.records);
    all.insert(all.end(), rep.records.begin(), rep.records.end());
  }
  return all;
}

void save_scores(const fs::path& file, const std::vector<ScoreRecord>& records, const std::map<std::string, std::string>& meta) {
  std::ofstream os(file);
  write_scores_csv(os, records, meta);
  if (!os) throw IoError("cannot write " + file.string());
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = resolve(c);
  const DatasetSplit split = load_dataset(cfg);
  const fs::path dir = create_run_directory(output_root(c), "train");
  write_text(dir / "config.resolved", cfg.resolved());
  out << "run directory: " << dir.string() << '\n';
  for (int r = 0; r < cfg.runs; ++r) {
    const fs::path rdir = dir / run_name(r);
    fs::create_directory(rdir);
    out << "run " << r + 1 << "/" << cfg.runs << " (seed " << cfg.seed + static_cast<std::uint64_t>(r) << ")\n";
    const TrainingConfig tcfg = effective_config(cfg.model, cfg.training_for_run(r));
    const std::string fp = training_fingerprint(cfg.model, tcfg);
    TrainHooks hooks{&out, [&](const EpochLog& row, Network& model, const GradientState& state, bool is_best) {
                       if (is_best) save_checkpoint(model, state, tcfg, fp, row.epoch, state.k, rdir / "best.ckpt");
                       if (cfg.checkpoint_every > 0 && row.epoch % cfg.checkpoint_every == 0) {
                         char name[32];
                         std::snprintf(name, sizeof name, "epoch-%04d.ckpt", row.epoch);
                         save_checkpoint(model, state, tcfg, fp, row.epoch, state.k, rdir / name);
                       }
                     }};
    TrainedModel trained = train(split, cfg.model, tcfg, hooks);
    save_checkpoint(trained, rdir / "model.ckpt");
    write_training_log(rdir / "training_log.csv", trained.log);
    out << "  best epoch " << trained.best_epoch << ", checkpoint " << (rdir / "model.ckpt").string() << '\n';
  }
  return kOk;
}

int cmd_score(const Common& c, const std::string& checkpoint, const std::string& kind_arg, std::ostream& out) {
  const ExperimentConfig cfg = resolve(c);
  TrainedModel trained = load_checkpoint(checkpoint_file(checkpoint));
  const auto kinds = kinds_for(kind_arg, trained.model.spec().kind);
  const DatasetSplit split = load_dataset(cfg);
  const fs::path dir = create_run_directory(output_root(c), "score");
  write_text(dir / "config.resolved", cfg.resolved());
  const auto records = score_all(trained, split, kinds, cfg.scoring, out);
  save_scores(dir / "scores.csv", records, score_metadata(trained, cfg.scoring));
  out << "scores: " << (dir / "scores.csv").string() << '\n';
  return kOk;
}

int cmd_eval(const Common& c, const std::vector<std::string>& files, std::ostream& out) {
  const ExperimentConfig cfg = resolve(c);
  (void)cfg;
  std::map<std::pair<ModelKind, ScoreKind>, std::vector<std::vector<ScoreRecord>>> runs;
  for (const auto& f : files) {
    std::ifstream is(f);
    if (!is) throw ConfigError("scores: cannot read '" + f + "'");
    const ScoreFile sf = read_scores_csv(is);
    const auto mk = sf.metadata.find("model_kind");
    if (mk == sf.metadata.end()) throw ConfigError("scores: '" + f + "' lacks the model_kind header");
    const ModelKind model = parse_model_kind(mk->second);
    std::map<ScoreKind, std::vector<ScoreRecord>> by_kind;
    for (const auto& r : sf.records) by_kind[r.kind].push_back(r);
    for (auto& [k, recs] : by_kind) runs[{model, k}].push_back(std::move(recs));
  }
  std::vector<std::vector<ScoreRecord>> everything;
  for (const auto& [key, list] : runs) everything.insert(everything.end(), list.begin(), list.end());
  require_same_test_set(everything);

  std::map<std::pair<ModelKind, ScoreKind>, RunAggregate> cells;
  for (const auto& [key, list] : runs) {
    std::vector<Metrics> metrics;
    for (const auto& recs : list) metrics.push_back(precision_recall_f1(confusion(recs)));
    cells[key] = aggregate_runs(metrics);
  }
  const ResultGrid grid = method_grid(cells);
  std::ostringstream text;
  write_grid_text(text, grid);
  out << text.str();
  const fs::path dir = create_run_directory(output_root(c), "eval");
  write_text(dir / "report.txt", text.str());
  std::ostringstream csv;
  write_grid_csv(csv, grid);
  write_text(dir / "report.csv", csv.str());
  out << "report: " << (dir / "report.csv").string() << '\n';
  return kOk;
}

int cmd_visualize(const Common& c, const std::string& checkpoint, std::ostream& out) {
  const ExperimentConfig cfg = resolve(c);
  TrainedModel trained = load_checkpoint(checkpoint_file(checkpoint));
  const DatasetSplit split = load_dataset(cfg);
  const fs::path dir = create_run_directory(output_root(c), "visualize");
  write_text(dir / "config.resolved", cfg.resolved());

  const Eigen::MatrixXd latents = collect_latents(trained, split.test);
  std::vector<Label> labels;
  std::vector<std::string> ids;
  for (const auto& s : split.test) {
    labels.push_back(s.label);
    ids.push_back(s.id);
  }
  const Embedding2D emb = tsne_embed(latents, cfg.tsne, labels, ids);
  render_scatter(emb, dir / "tsne.png", display_name(trained.model.spec().kind) + " latent means (t-SNE)");
  {
    std::ofstream os(dir / "embedding.csv");
    write_embedding_csv(os, emb);
  }
  out << "t-SNE: lowest KL " << emb.tsne_kl << " at restart " << emb.selected << " of " << emb.restart_kls.size() << '\n';

  ScoreKind kind = cfg.scoring.score_kind;
  if (kind == ScoreKind::elbo && !trained.model.spec().variational()) kind = ScoreKind::recon;
  if (kind == ScoreKind::gradcon && trained.gradients.k == 0) kind = ScoreKind::recon;
  const ScoreReport rep = score_split(trained, split, kind, cfg.scoring);
  std::map<std::string, const ScoreRecord*> by_id;
  for (const auto& r : rep.records) by_id[r.id] = &r;

  std::vector<std::size_t> normals, abnormals;
  for (std::size_t i = 0; i < split.test.size(); ++i) (split.test[i].label == Label::abnormal ? abnormals : normals).push_back(i);
  std::vector<std::size_t> picked;
  for (std::size_t j = 0; picked.size() < static_cast<std::size_t>(cfg.grid_pairs) && (j < normals.size() || j < abnormals.size()); ++j) {
    if (j < normals.size()) picked.push_back(normals[j]);
    if (j < abnormals.size() && picked.size() < static_cast<std::size_t>(cfg.grid_pairs)) picked.push_back(abnormals[j]);
  }
  std::vector<ImageSample> chosen;
  for (auto i : picked) chosen.push_back(split.test[i]);
  if (!chosen.empty()) {
    const Evaluation e = evaluate(trained.model, chosen);
    const Index m = e.reconstruction.sample_size();
    std::vector<ReconstructionPair> pairs;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      const ScoreRecord& r = *by_id.at(chosen[i].id);
      pairs.push_back({chosen[i], e.reconstruction.array().segment(static_cast<Index>(i) * m, m), r.verdict, r.score});
    }
    render_reconstruction_grid(pairs, dir / "reconstructions.png");
  }
  out << "plots: " << dir.string() << '\n';
  return kOk;
}

int cmd_synth(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = resolve(c);
  fs::path dir;
  if (!c.out.empty()) {
    dir = c.out;
    std::error_code ec;
    if (fs::exists(dir) && !fs::is_empty(dir, ec)) throw ConfigError("out: '" + dir.string() + "' exists and is not empty");
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create " + dir.string());
  } else {
    dir = create_run_directory(output_root(c), "synth");
  }
  const auto images = generate_synthetic_images(cfg.synth, cfg.synth_seed);
  write_synthetic(images, dir);
  write_text(dir / "config.resolved", cfg.resolved());
  std::map<std::string, int> counts;
  for (const auto& im : images) counts[fs::path(im.relative_path).parent_path().string()]++;
  for (const auto& [d, n] : counts) out << d << ": " << n << '\n';
  out << "dataset: " << dir.string() << '\n';
  return kOk;
}

int cmd_sweep_beta(const Common& c, const std::string& betas_arg, std::ostream& out) {
  ExperimentConfig cfg = resolve(c);
  if (!betas_arg.empty()) {
    set_key(cfg, "sweep_betas", betas_arg);
    cfg.validate();
  }
  if (cfg.model.kind == ModelKind::cae) throw ConfigError("model_kind: the beta sweep needs a variational model");
  cfg.model.kind = ModelKind::beta_vae;
  const DatasetSplit split = load_dataset(cfg);
  const fs::path dir = create_run_directory(output_root(c), "sweep-beta");
  write_text(dir / "config.resolved", cfg.resolved());
  const ScoreKind kind = cfg.scoring.score_kind;

  std::vector<std::pair<double, RunAggregate>> cells;
  for (double beta : cfg.sweep_betas) {
    const fs::path bdir = dir / ("beta-" + format_real(beta));
    fs::create_directory(bdir);
    std::vector<Metrics> metrics;
    for (int r = 0; r < cfg.runs; ++r) {
      out << "beta " << beta_label(beta) << ", run " << r + 1 << "/" << cfg.runs << '\n';
      TrainingConfig t = cfg.training_for_run(r);
      t.beta = beta;
      TrainedModel trained = train(split, cfg.model, t, {});
      const ScoreReport rep = score_split(trained, split, kind, cfg.scoring);
      save_scores(bdir / (run_name(r) + "-scores.csv"), rep.records, score_metadata(trained, cfg.scoring));
      metrics.push_back(precision_recall_f1(confusion(rep.records)));
      print_metrics(out, to_string(kind), rep.records);
    }
    cells.emplace_back(beta, aggregate_runs(metrics));
  }
  const ResultGrid grid = beta_grid(cells);
  std::ostringstream text, csv;
  write_grid_text(text, grid);
  write_grid_csv(csv, grid);
  out << text.str();
  write_text(dir / "sweep.txt", text.str());
  write_text(dir / "sweep.csv", csv.str());
  out << "report: " << (dir / "sweep.csv").string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"beta-VAE anomaly detection: train, score, evaluate and visualize"};
  app.name(args.empty() ? "bvae" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  Common common;
  auto* train_cmd = app.add_subcommand("train", "train models and write checkpoints");
  add_common(train_cmd, common);

  std::string checkpoint, kind = "all";
  auto* score_cmd = app.add_subcommand("score", "score the test split with a checkpoint");
  add_common(score_cmd, common);
  score_cmd->add_option("--checkpoint", checkpoint, "checkpoint file or run directory")->required();
  score_cmd->add_option("--kind", kind, "recon, elbo, gradcon or all");

  std::vector<std::string> files;
  auto* eval_cmd = app.add_subcommand("eval", "aggregate scores CSVs into a method x score table");
  add_common(eval_cmd, common);
  eval_cmd->add_option("scores", files, "scores CSV files, one per run")->required();

  auto* viz_cmd = app.add_subcommand("visualize", "t-SNE scatter and reconstruction grid");
  add_common(viz_cmd, common);
  viz_cmd->add_option("--checkpoint", checkpoint, "checkpoint file or run directory")->required();

  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic fixture as an image directory");
  add_common(synth_cmd, common);

  std::string betas;
  auto* sweep_cmd = app.add_subcommand("sweep-beta", "train and score once per beta value");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--betas", betas, "comma-separated beta values (default 0.01,0.1,1,3,10)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("bvae");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(common, out);
    if (*score_cmd) return cmd_score(common, checkpoint, kind, out);
    if (*eval_cmd) return cmd_eval(common, files, out);
    if (*viz_cmd) return cmd_visualize(common, checkpoint, out);
    if (*synth_cmd) return cmd_synth(common, out);
    if (*sweep_cmd) return cmd_sweep_beta(common, betas, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kConfigError;
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << '\n';
    return kTrainingAborted;
  } catch (const NumericError& e) {
    err << "training aborted: " << e.what() << '\n';
    return kTrainingAborted;
  } catch (const VersionMismatch& e) {
    err << "checkpoint version mismatch: " << e.what() << '\n';
    return kVersionMismatch;
  } catch (const TestSetMismatch& e) {
    err << "mismatched test sets: " << e.what() << '\n';
    return kTestSetMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace bvae::cli
