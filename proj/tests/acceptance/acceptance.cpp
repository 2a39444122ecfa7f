// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "bvae/checkpoint.hpp"
#include "bvae/cli.hpp"
#include "bvae/config.hpp"
#include "bvae/evaluation.hpp"
#include "bvae/latentviz.hpp"
#include "bvae/scoring.hpp"
#include "bvae/step.hpp"
#include "bvae/trainer.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace bvae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Outcome objective_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mu_dist(-2.0, 2.0), lv_dist(-0.3, 0.3);
  std::normal_distribution<double> normal;
  double worst = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const double mu = mu_dist(rng), lv = lv_dist(rng), sigma = std::exp(0.5 * lv);
    LatentMatrix<double> m(1, 1), v(1, 1);
    m(0, 0) = mu;
    v(0, 0) = lv;
    const double closed = kl_divergence(m, v);
    // E_q[log q(z) - log p(z)] with antithetic draws.
    double sum = 0;
    const int draws = 1'000'000;
    for (int i = 0; i < draws / 2; ++i) {
      const double e = normal(rng);
      for (double s : {e, -e}) {
        const double z = mu + sigma * s;
        sum += -0.5 * lv - 0.5 * s * s + 0.5 * z * z;
      }
    }
    worst = std::max(worst, std::abs(sum / draws - closed));
  }
  o.require(worst < 1e-3, "Monte-Carlo KL gap " + fmt("%.3g", worst));

  const LatentMatrix<double> zero = LatentMatrix<double>::Zero(4, 16);
  o.require(kl_divergence(zero, zero) == 0.0, "KL(0, 1) is not exactly 0");

  const auto x = test::random_tensor<double>(3, 3, 8, 8, 5);
  auto y = x;
  y.array() += 0.5;
  o.require(recon_loss(x, x) == 0.0, "recon_loss(x, x) != 0");
  o.require(recon_loss(x, y) == recon_loss(y, x), "recon_loss not symmetric");
  o.require(recon_loss(y, x) == 0.25, "recon_loss of a constant shift");
  o.require(recon_per_sample(y, x).mean() == recon_loss(y, x), "per-sample mean differs from batch loss");

  const double secs = seconds_since(t0);
  o.require(secs < 60, "runtime " + fmt("%.1f s", secs));
  if (o.pass) o.detail = "max MC gap " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs);
  return o;
}

// ---------------------------------------------------------------------------

struct FdTally {
  Index total = 0, within = 0;
  double fraction() const { return static_cast<double>(within) / static_cast<double>(total); }
};

void tally(FdTally& t, double numeric, double analytic) {
  const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
  ++t.total;
  if (std::abs(numeric - analytic) / denom < 1e-4) ++t.within;
}

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  Model<double> model(test::micro_spec(), 31);
  const auto x = test::random_tensor<double>(4, 2, 8, 8, 32);
  const LatentMatrix<double> eps = test::random_matrix(4, model.latent_dim(), 33);
  const auto params = model.parameters();
  Eigen::VectorXd theta = flatten_values(params);

  StepOptions recon_only;
  recon_only.beta = 0.0;
  StepOptions with_kl;
  with_kl.beta = 1.0;
  compute_gradients(model, x, eps, GradientState{}, recon_only, nn::Mode::probe);
  const Eigen::VectorXd g_recon = flatten_grads(params);
  compute_gradients(model, x, eps, GradientState{}, with_kl, nn::Mode::probe);
  const Eigen::VectorXd g_kl = flatten_grads(params) - g_recon;

  const auto recon_at = [&] {
    const LatentMatrix<double> z = reparameterize(model.encode(x, nn::Mode::probe), eps);
    return recon_loss(model.decode(z, nn::Mode::probe), x);
  };
  const auto kl_at = [&] {
    const auto e = model.encode(x, nn::Mode::probe);
    return kl_divergence(e.mu, e.log_var);
  };

  FdTally recon, kl;
  const double h = 1e-5;
  for (Index i = 0; i < theta.size(); ++i) {
    const double old = theta[i];
    theta[i] = old + h;
    assign_values(params, theta);
    const double ru = recon_at(), ku = kl_at();
    theta[i] = old - h;
    assign_values(params, theta);
    const double rd = recon_at(), kd = kl_at();
    theta[i] = old;
    tally(recon, (ru - rd) / (2 * h), g_recon[i]);
    tally(kl, (ku - kd) / (2 * h), g_kl[i]);
  }
  assign_values(params, theta);
  o.require(recon.fraction() >= 0.99, "recon agreement " + fmt("%.4f", recon.fraction()));
  o.require(kl.fraction() >= 0.99, "kl agreement " + fmt("%.4f", kl.fraction()));
  const double secs = seconds_since(t0);
  o.require(secs < 120, "runtime " + fmt("%.1f s", secs));
  if (o.pass)
    o.detail = std::to_string(recon.total) + " parameters, recon " + fmt("%.4f", recon.fraction()) + ", kl " +
               fmt("%.4f", kl.fraction()) + " within 1e-4";
  return o;
}

// ---------------------------------------------------------------------------

Outcome cosine_suite() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> size(1, 40), layers(1, 5);
  const auto random_vec = [&](Index n) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  int out_of_bounds = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GradientState s;
    LayerGradients g;
    const int l = layers(rng);
    for (int i = 0; i < l; ++i) {
      const Index n = size(rng);
      s.average.push_back(random_vec(n) * std::exp(normal(rng) * 3));
      g.push_back(random_vec(n) * std::exp(normal(rng) * 3));
    }
    s.k = 1 + trial % 50;
    const double v = gradient_loss(g, s);
    if (!(v >= -1.0 && v <= 1.0)) ++out_of_bounds;
  }
  o.require(out_of_bounds == 0, std::to_string(out_of_bounds) + " losses outside [-1, 1]");

  GradientState s;
  s.k = 3;
  s.average = {Eigen::Vector3d(1, 2, 3), Eigen::Vector2d(1, 0)};
  o.require(gradient_loss({Eigen::Vector3d(1, 2, 3), Eigen::Vector2d(1, 0)}, s) == -1.0, "identical != -1");
  o.require(gradient_loss({Eigen::Vector3d(2, 4, 6), Eigen::Vector2d(5, 0)}, s) == -1.0, "scaled identical != -1");
  o.require(gradient_loss({Eigen::Vector3d(-1, -2, -3), Eigen::Vector2d(-1, 0)}, s) == 1.0, "anti-aligned != 1");
  o.require(gradient_loss({Eigen::Vector3d(3, 0, -1), Eigen::Vector2d(0, 2)}, s) == 0.0, "orthogonal != 0");

  double worst = 0;
  for (int seq = 0; seq < 5; ++seq) {
    GradientState acc;
    std::vector<LayerGradients> history;
    for (int t = 0; t < 100; ++t) {
      LayerGradients g{random_vec(17), random_vec(5) * 10.0};
      accumulate_gradient(acc, g);
      history.push_back(g);
    }
    for (std::size_t l = 0; l < 2; ++l) {
      Eigen::VectorXd direct = Eigen::VectorXd::Zero(acc.average[l].size());
      for (const auto& g : history) direct += g[l];
      direct /= static_cast<double>(history.size());
      worst = std::max(worst, (direct - acc.average[l]).cwiseAbs().maxCoeff());
    }
    o.require(acc.k == 100, "k after 100 steps is " + std::to_string(acc.k));
  }
  o.require(worst < 1e-10, "running mean deviates by " + fmt("%.3g", worst));
  if (o.pass) o.detail = "1000 random states in bounds, running mean within " + fmt("%.1e", worst);
  return o;
}

// ---------------------------------------------------------------------------

DatasetSplit small_split() {
  SynthConfig c = test::tiny_synth();
  return generate_synthetic(c, 7);
}

Outcome reduction_suite() {
  Outcome o;
  const DatasetSplit split = small_split();

  Network bv(test::small_spec(ModelKind::beta_vae), 5), v(test::small_spec(ModelKind::vae), 5);
  const Tensor<float> x = make_batch(split.train);
  const LatentMatrix<float> eps = test::random_matrix(x.n(), bv.latent_dim(), 6).cast<float>();
  StepOptions one;
  one.beta = 1.0;
  const StepResult a = compute_gradients(bv, x, eps, GradientState{}, one);
  const StepResult b = compute_gradients(v, x, eps, GradientState{}, one);
  o.require(a.losses.elbo_loss == b.losses.elbo_loss, "beta=1 loss differs from the VAE loss");
  o.require(flatten_grads(bv.parameters()) == flatten_grads(v.parameters()), "beta=1 gradients differ from the VAE's");

  TrainingConfig cfg = test::quick_training(2);
  cfg.beta = 1.0;
  TrainedModel tb = train(split, test::small_spec(ModelKind::beta_vae), cfg);
  TrainedModel tv = train(split, test::small_spec(ModelKind::vae), cfg);
  bool same_log = tb.log.size() == tv.log.size();
  for (std::size_t i = 0; same_log && i < tb.log.size(); ++i)
    same_log = tb.log[i].train.total_J == tv.log[i].train.total_J && tb.log[i].val_loss == tv.log[i].val_loss;
  o.require(same_log, "beta=1 training log differs from the VAE's");

  std::size_t mismatched = 0;
  for (const auto& s : split.test)
    if (score_gradcon(tb, s, 0.0) != score_recon(tb, s)) ++mismatched;
  o.require(mismatched == 0, std::to_string(mismatched) + " gamma=0 GradCon scores differ from Recon");

  cfg.alpha = 0.0;
  cfg.epochs = 3;
  TrainedModel t0 = train(split, test::small_spec(ModelKind::beta_vae), cfg);
  const std::int64_t per_epoch = (static_cast<std::int64_t>(split.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  o.require(t0.iterations == per_epoch * cfg.epochs, "iteration count " + std::to_string(t0.iterations));
  o.require(t0.gradients.k == t0.iterations, "k = " + std::to_string(t0.gradients.k) + " after " +
                                                 std::to_string(t0.iterations) + " iterations");
  for (const auto& row : t0.log) o.require(row.train.total_J == row.train.elbo_loss, "alpha=0 objective includes L_grad");
  if (o.pass) o.detail = "bitwise beta=1 match, gamma=0 exact on " + std::to_string(split.test.size()) + " samples, k = " +
                         std::to_string(t0.gradients.k);
  return o;
}

// ---------------------------------------------------------------------------

Outcome end_to_end() {
  Outcome o;
  const auto t0 = Clock::now();
  const SynthConfig fixture;  // 200 / 50 / 40 + 40
  const DatasetSplit split = generate_synthetic(fixture, 7);
  const ModelSpec spec;
  const ScoringConfig scoring;
  const std::vector<ScoreKind> kinds{ScoreKind::recon, ScoreKind::elbo, ScoreKind::gradcon};
  const int seeds = 5;

  std::map<ScoreKind, double> normal_mean, abnormal_mean;
  std::vector<double> f1;
  for (int seed = 0; seed < seeds; ++seed) {
    TrainingConfig cfg;
    cfg.epochs = 30;
    cfg.beta = 3.0;
    cfg.seed = static_cast<std::uint64_t>(seed);
    TrainedModel trained = train(split, spec, cfg);
    std::cerr << "  seed " << seed << ": trained in " << fmt("%.0f s", seconds_since(t0)) << " total, best epoch "
              << trained.best_epoch << '\n';
    for (ScoreKind k : kinds) {
      const ScoreReport rep = score_split(trained, split, k, scoring);
      double sn = 0, sa = 0;
      int nn = 0, na = 0;
      for (const auto& r : rep.records) {
        if (r.ground_truth == Label::abnormal) {
          sa += r.score;
          ++na;
        } else {
          sn += r.score;
          ++nn;
        }
      }
      normal_mean[k] += sn / nn / seeds;
      abnormal_mean[k] += sa / na / seeds;
      const Metrics m = precision_recall_f1(confusion(rep.records));
      std::cerr << "    " << to_string(k) << ": normal " << sn / nn << ", abnormal " << sa / na << ", F1 " << m.f1 << '\n';
      if (k == ScoreKind::gradcon) f1.push_back(m.f1);
    }
  }
  for (ScoreKind k : kinds)
    o.require(abnormal_mean[k] > normal_mean[k], to_string(k) + " abnormal mean " + fmt("%.4g", abnormal_mean[k]) +
                                                     " <= normal mean " + fmt("%.4g", normal_mean[k]));
  const Stat f = mean_std(f1);
  o.require(f.mean >= 0.85, "GradCon F1 " + fmt("%.3f", f.mean) + " < 0.85");
  const double minutes = seconds_since(t0) / 60;
  o.detail += std::string(o.detail.empty() ? "" : "; ") + "GradCon F1 " + fmt("%.3f", f.mean) + " +- " + fmt("%.3f", f.std) +
              " over 5 seeds, " + fmt("%.1f min", minutes);
  return o;
}

// ---------------------------------------------------------------------------

struct CliRun {
  int code;
  std::string out, err;
};

CliRun bvae_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bvae");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path only_child(const fs::path& dir) {
  std::vector<fs::path> v;
  for (const auto& e : fs::directory_iterator(dir)) v.push_back(e.path());
  if (v.size() != 1) throw std::runtime_error("expected one entry in " + dir.string());
  return v.front();
}

struct GridRow {
  std::string group, column, metric;
  int runs = 0;
};

std::vector<GridRow> read_grid(const fs::path& csv) {
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<GridRow> rows;
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) continue;
    rows.push_back({f[0], f[1], f[2], std::stoi(f[5])});
  }
  return rows;
}

const std::vector<std::string> kTinyArgs{
    "--set", "dataset=synthetic",   "--set", "synth_train=24",          "--set", "synth_validation=8",
    "--set", "synth_test_normal=8", "--set", "synth_test_abnormal=8",   "--set", "encoder_filters=4,8,8,16,16",
    "--set", "bottleneck_channels=4", "--set", "decoder_filters=16,16,8,8,4,3", "--set", "epochs=1",
    "--set", "batch_size=8",        "--set", "checkpoint_every=0"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTinyArgs.begin(), kTinyArgs.end());
  return args;
}

Outcome table_shapes() {
  Outcome o;
  test::TempDir dir("bvae-accept");
  const int runs = 2;
  std::vector<std::string> score_files;
  for (const char* kind : {"cae", "vae", "beta_vae"}) {
    const fs::path train_root = dir.path() / (std::string("train-") + kind);
    const CliRun t = bvae_cli(with_tiny({"train", "--out", train_root.string(), "--runs", std::to_string(runs), "--set",
                                         std::string("model_kind=") + kind}));
    if (t.code != 0) {
      o.require(false, std::string("train ") + kind + ": " + t.err);
      return o;
    }
    const fs::path train_dir = only_child(train_root);
    for (int r = 0; r < runs; ++r) {
      const fs::path score_root = dir.path() / (std::string("score-") + kind + "-" + std::to_string(r));
      char run[16];
      std::snprintf(run, sizeof run, "run-%02d", r);
      const CliRun s = bvae_cli(with_tiny({"score", "--out", score_root.string(), "--checkpoint", (train_dir / run).string()}));
      if (s.code != 0) {
        o.require(false, std::string("score ") + kind + ": " + s.err);
        return o;
      }
      score_files.push_back((only_child(score_root) / "scores.csv").string());
    }
  }
  std::vector<std::string> eval_args{"eval", "--out", (dir.path() / "eval").string()};
  eval_args.insert(eval_args.end(), score_files.begin(), score_files.end());
  const CliRun e = bvae_cli(eval_args);
  o.require(e.code == 0, "eval failed: " + e.err);
  if (e.code != 0) return o;

  const std::vector<std::pair<std::string, std::string>> methods{{"CAE", "Recon"},      {"CAE", "GradCon"},
                                                                 {"VAE", "Recon"},      {"VAE", "ELBO"},
                                                                 {"VAE", "GradCon"},    {"beta-VAE", "Recon"},
                                                                 {"beta-VAE", "ELBO"},  {"beta-VAE", "GradCon"}};
  const std::vector<std::string> metrics{"Precision", "Recall", "F1-score"};
  const auto check_grid = [&](const std::vector<GridRow>& rows, const std::vector<std::pair<std::string, std::string>>& cols,
                              const std::string& what) {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& r : rows) {
      seen.insert({r.group, r.column, r.metric});
      o.require(r.runs == runs, what + " cell " + r.group + "/" + r.column + " has " + std::to_string(r.runs) + " runs");
    }
    o.require(rows.size() == cols.size() * metrics.size(), what + " has " + std::to_string(rows.size()) + " rows");
    for (const auto& [g, c] : cols)
      for (const auto& m : metrics) o.require(seen.count({g, c, m}) == 1, what + " lacks " + g + "/" + c + "/" + m);
  };
  check_grid(read_grid(only_child(dir.path() / "eval") / "report.csv"), methods, "method grid");
  o.require(e.out.find(" ± ") != std::string::npos, "method grid text lacks mean ± std cells");

  const CliRun s = bvae_cli(with_tiny({"sweep-beta", "--out", (dir.path() / "sweep").string(), "--runs", std::to_string(runs),
                                       "--set", "score_kind=recon"}));
  o.require(s.code == 0, "sweep-beta failed: " + s.err);
  if (s.code != 0) return o;
  const std::vector<GridRow> sweep = read_grid(only_child(dir.path() / "sweep") / "sweep.csv");
  const std::string group = sweep.empty() ? std::string() : sweep.front().group;
  std::vector<std::pair<std::string, std::string>> betas;
  for (const char* b : {"0.01", "0.1", "1 (VAE)", "3", "10"}) betas.emplace_back(group, b);
  check_grid(sweep, betas, "beta grid");
  std::vector<std::string> order;
  for (const auto& r : sweep)
    if (order.empty() || order.back() != r.column) order.push_back(r.column);
  o.require(order == std::vector<std::string>{"0.01", "0.1", "1 (VAE)", "3", "10"}, "beta columns out of order");
  if (o.pass) o.detail = "8 method columns and 5 beta columns, " + std::to_string(runs) + " runs per cell";
  return o;
}

// ---------------------------------------------------------------------------

Outcome tsne_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const int per = 30;
  Eigen::MatrixXd x = test::random_matrix(2 * per, 640, 41);
  x.bottomRows(per).array() += 1.0;
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.restarts = 10;
  cfg.seed = 3;
  const Embedding2D e = tsne_embed(x, cfg);

  const Eigen::RowVector2d c0 = e.points.topRows(per).colwise().mean(), c1 = e.points.bottomRows(per).colwise().mean();
  double spread = 0;
  for (int i = 0; i < 2 * per; ++i) spread += (e.points.row(i) - (i < per ? c0 : c1)).norm();
  spread /= 2 * per;
  const double gap = (c0 - c1).norm();
  o.require(gap > 4 * spread, "centroid distance " + fmt("%.3g", gap) + " vs spread " + fmt("%.3g", spread));

  for (int a = 0; a < 2; ++a) {
    o.require(e.points.col(a).minCoeff() == 0.0 && e.points.col(a).maxCoeff() == 1.0, "axis " + std::to_string(a) + " not on [0, 1]");
  }

  o.require(e.restart_kls.size() == 10, "restart log has " + std::to_string(e.restart_kls.size()) + " entries");
  const auto best = std::min_element(e.restart_kls.begin(), e.restart_kls.end());
  o.require(e.selected == static_cast<std::size_t>(best - e.restart_kls.begin()), "selected restart is not the lowest KL");
  o.require(e.tsne_kl == *best, "reported KL differs from the restart log");
  const TsneRun again = tsne_run(x, cfg, cfg.seed + e.selected);
  o.require(again.kl == e.tsne_kl, "rerun of the selected restart gives another KL");
  o.require(scale_unit(again.points) == e.points, "rerun of the selected restart gives another layout");

  const double secs = seconds_since(t0);
  o.require(secs < 120, "runtime " + fmt("%.1f s", secs));
  if (o.pass) o.detail = "separation ratio " + fmt("%.1f", gap / spread) + ", restart " + std::to_string(e.selected) + " of 10, " +
                         fmt("%.1f s", secs);
  return o;
}

// ---------------------------------------------------------------------------

std::string pipeline_scores(const fs::path& root, const std::string& seed) {
  const CliRun t = bvae_cli(with_tiny({"train", "--out", (root / "train").string(), "--seed", seed, "--set", "epochs=2"}));
  if (t.code != 0) throw std::runtime_error("train: " + t.err);
  const CliRun s = bvae_cli(with_tiny({"score", "--out", (root / "score").string(), "--seed", seed, "--checkpoint",
                                       (only_child(root / "train") / "run-00").string()}));
  if (s.code != 0) throw std::runtime_error("score: " + s.err);
  std::ifstream is(only_child(root / "score") / "scores.csv");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  test::TempDir dir("bvae-accept");
  const std::string a = pipeline_scores(dir.path() / "a", "5");
  const std::string b = pipeline_scores(dir.path() / "b", "5");
  const std::string c = pipeline_scores(dir.path() / "c", "6");
  o.require(!a.empty() && a == b, "identical seeds gave different scores files");
  o.require(a != c, "a different seed gave the same scores file");
  if (o.pass) o.detail = "scores files bitwise identical (" + std::to_string(a.size()) + " bytes)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"analytic objective suite", objective_suite}, {"gradient correctness", gradient_suite},
      {"cosine / GradCon suite", cosine_suite},      {"reduction identities", reduction_suite},
      {"end-to-end synthetic check", end_to_end},    {"table-shape parity", table_shapes},
      {"t-SNE suite", tsne_suite},                   {"pipeline determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
