#include <doctest.h>

#include "bvae/errors.hpp"
#include "bvae/latentviz.hpp"
#include "support.hpp"

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <fstream>
#include <numbers>
#include <sstream>

using namespace bvae;
namespace fs = std::filesystem;

namespace {

// Three well separated Gaussian blobs in 10 dimensions.
Eigen::MatrixXd clusters(int per, std::uint64_t seed, std::vector<int>* member = nullptr) {
  Eigen::MatrixXd x = test::random_matrix(3 * per, 10, seed, 0.3);
  for (int c = 0; c < 3; ++c) {
    x.middleRows(c * per, per).col(c).array() += 8.0;
    if (member)
      for (int i = 0; i < per; ++i) member->push_back(c);
  }
  return x;
}

TsneConfig quick(int restarts = 3) {
  TsneConfig c;
  c.restarts = restarts;
  c.seed = 5;
  return c;
}

double row_entropy(const Eigen::RowVectorXd& p) {
  double h = 0;
  for (Index j = 0; j < p.size(); ++j)
    if (p[j] > 0) h -= p[j] * std::log(p[j]);
  return h;
}

double tsne_kl_oracle(const Eigen::MatrixXd& p, const Eigen::MatrixX2d& y) {
  const Index n = y.rows();
  Eigen::MatrixXd q(n, n);
  double z = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      q(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += q(i, j);
    }
  double kl = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j) kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j) / z, 1e-12));
  return kl;
}

}  // namespace

TEST_CASE("affinities are a symmetric distribution with zero diagonal") {
  const Eigen::MatrixXd x = test::random_matrix(40, 6, 1);
  const Eigen::MatrixXd p = tsne_affinities(x, 5.0);
  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.diagonal().isZero());
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p.minCoeff() >= 0.0);
}

TEST_CASE("conditional affinities match the requested perplexity") {
  // On a regular polygon every conditional row is a rotation of the others,
  // so symmetrization leaves n * P equal to the conditionals.
  const int n = 24;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = std::cos(2 * std::numbers::pi * i / n);
    x(i, 1) = std::sin(2 * std::numbers::pi * i / n);
  }
  for (double perplexity : {2.0, 5.0, 7.5}) {
    const Eigen::MatrixXd p = tsne_affinities(x, perplexity) * n;
    for (int i = 0; i < n; i += 5) {
      CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(std::exp(row_entropy(p.row(i))) == doctest::Approx(perplexity).epsilon(1e-3));
    }
  }
}

TEST_CASE("too few points for the perplexity is a configuration error") {
  CHECK_THROWS_AS(tsne_affinities(test::random_matrix(14, 3, 1), 5.0), ConfigError);
  CHECK_NOTHROW(tsne_affinities(test::random_matrix(15, 3, 1), 5.0));
  CHECK_THROWS_AS(tsne_embed(test::random_matrix(10, 3, 1), quick()), ConfigError);
}

TEST_CASE("well separated clusters stay separated in the embedding") {
  std::vector<int> member;
  const Eigen::MatrixXd x = clusters(30, 2, &member);
  const Embedding2D e = tsne_embed(x, quick());
  const Index n = x.rows();
  int agree = 0, total = 0;
  for (Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Index>> d;
    for (Index j = 0; j < n; ++j)
      if (j != i) d.emplace_back((e.points.row(i) - e.points.row(j)).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + 5, d.end());
    for (int k = 0; k < 5; ++k) {
      agree += member[static_cast<std::size_t>(d[static_cast<std::size_t>(k)].second)] == member[static_cast<std::size_t>(i)];
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.95);
}

TEST_CASE("restarts use consecutive seeds and the lowest KL wins") {
  const Eigen::MatrixXd x = clusters(10, 3);
  TsneConfig cfg = quick(4);
  cfg.iterations = 300;
  cfg.exaggeration_iterations = 100;
  const Embedding2D e = tsne_embed(x, cfg);
  REQUIRE(e.restart_kls.size() == 4);
  const auto best = std::min_element(e.restart_kls.begin(), e.restart_kls.end());
  CHECK(e.selected == static_cast<std::size_t>(best - e.restart_kls.begin()));
  CHECK(e.tsne_kl == *best);
  for (int r = 0; r < 4; ++r) CHECK(tsne_run(x, cfg, cfg.seed + r).kl == e.restart_kls[static_cast<std::size_t>(r)]);
  const TsneRun chosen = tsne_run(x, cfg, cfg.seed + e.selected);
  CHECK((scale_unit(chosen.points) - e.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reported KL matches a direct computation from the final layout") {
  const Eigen::MatrixXd x = clusters(10, 4);
  TsneConfig cfg = quick(1);
  const TsneRun run = tsne_run(x, cfg, 9);
  const Eigen::MatrixXd p = tsne_affinities(x, cfg.perplexity);
  CHECK(run.kl == doctest::Approx(tsne_kl_oracle(p, run.points)).epsilon(1e-9));
  CHECK(run.kl >= 0.0);
}

TEST_CASE("embeddings are deterministic in the seed") {
  const Eigen::MatrixXd x = clusters(8, 6);
  TsneConfig cfg = quick(2);
  cfg.iterations = 200;
  cfg.exaggeration_iterations = 50;
  const Embedding2D a = tsne_embed(x, cfg), b = tsne_embed(x, cfg);
  CHECK(a.points == b.points);
  cfg.seed = 99;
  CHECK(tsne_embed(x, cfg).points != a.points);
}

TEST_CASE("scale_unit maps each axis onto [0, 1]") {
  Eigen::MatrixX2d p(3, 2);
  p << -2, 5, 0, 5, 6, 5;
  const Eigen::MatrixX2d s = scale_unit(p);
  CHECK(s(0, 0) == 0.0);
  CHECK(s(1, 0) == doctest::Approx(0.25));
  CHECK(s(2, 0) == 1.0);
  CHECK((s.col(1).array() == 0.5).all());
}

TEST_CASE("tsne settings are validated") {
  TsneConfig c;
  c.restarts = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TsneConfig{};
  c.exaggeration_iterations = c.iterations + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(TsneConfig{}.validate());
}

TEST_CASE("scatter plot and legend are written") {
  test::TempDir dir;
  const Eigen::MatrixXd x = clusters(6, 7);
  TsneConfig cfg = quick(2);
  cfg.iterations = 100;
  cfg.exaggeration_iterations = 20;
  std::vector<Label> labels(18, Label::normal);
  for (int i = 12; i < 18; ++i) labels[static_cast<std::size_t>(i)] = Label::abnormal;
  const Embedding2D e = tsne_embed(x, cfg, labels);
  const fs::path png = dir.path() / "tsne.png";
  render_scatter(e, png, "latent means");
  const cv::Mat img = cv::imread(png.string());
  REQUIRE_FALSE(img.empty());
  CHECK(img.rows == 640);
  CHECK(img.cols == 640);

  std::ifstream is(png.string() + ".json");
  const nlohmann::json legend = nlohmann::json::parse(is);
  CHECK(legend["counts"]["normal"] == 12);
  CHECK(legend["counts"]["abnormal"] == 6);
  CHECK(legend["restart_kls"].size() == 2);
  CHECK(legend["title"] == "latent means");
  CHECK(legend["tsne_kl"].get<double>() == e.tsne_kl);

  std::ostringstream csv;
  write_embedding_csv(csv, e);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "id,x,y,label,run_kl");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 18);
}

TEST_CASE("reconstruction grid renders one column per pair") {
  test::TempDir dir;
  const DatasetSplit s = generate_synthetic(test::tiny_synth(), 2);
  std::vector<ReconstructionPair> pairs;
  for (std::size_t i = 0; i < 3; ++i) pairs.push_back({s.test[i], s.test[i].data, Verdict::anomaly, 0.25});
  const fs::path png = dir.path() / "grid.png";
  render_reconstruction_grid(pairs, png);
  const cv::Mat img = cv::imread(png.string());
  REQUIRE_FALSE(img.empty());
  CHECK(img.cols >= 3 * 128);
  CHECK(img.rows >= 2 * 128);
}

TEST_CASE("latents come from the posterior mean in evaluation mode") {
  const DatasetSplit s = generate_synthetic(test::tiny_synth(), 2);
  TrainedModel t = train(s, test::small_spec(), test::quick_training(1));
  const Eigen::MatrixXd z = collect_latents(t, s.test);
  CHECK(z.rows() == static_cast<Index>(s.test.size()));
  CHECK(z.cols() == t.model.latent_dim());
  const Evaluation e = evaluate(t.model, s.test);
  CHECK((z - e.mu.cast<double>()).cwiseAbs().maxCoeff() == 0.0);
  TrainedModel fresh{Network(test::small_spec(), 1), {}, {}, {}, "", 0, 0};
  CHECK_THROWS_AS(collect_latents(fresh, s.test), UsageError);
}
