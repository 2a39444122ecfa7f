#include "bvae/latentviz.hpp"

#include "bvae/errors.hpp"

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

namespace bvae {

Eigen::MatrixXd collect_latents(TrainedModel& trained, const std::vector<ImageSample>& samples) {
  if (trained.iterations == 0) throw UsageError("model has not been trained");
  if (samples.empty()) return Eigen::MatrixXd(0, trained.model.latent_dim());
  return evaluate(trained.model, samples).mu.cast<double>();
}

void TsneConfig::validate() const {
  if (!(perplexity > 0)) throw ConfigError("tsne_perplexity must be > 0");
  if (restarts < 1) throw ConfigError("tsne_restarts must be >= 1");
  if (iterations < 1) throw ConfigError("tsne_iterations must be >= 1");
  if (exaggeration_iterations < 0 || exaggeration_iterations > iterations) {
    throw ConfigError("tsne_exaggeration_iterations must lie in [0, iterations]");
  }
  if (!(exaggeration >= 1)) throw ConfigError("tsne_exaggeration must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("tsne_learning_rate must be > 0");
  if (!(init_std > 0)) throw ConfigError("tsne_init_std must be > 0");
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

void require_points(Eigen::Index n, double perplexity) {
  if (static_cast<double>(n) < 3.0 * perplexity) {
    throw ConfigError("t-SNE with perplexity " + std::to_string(perplexity) + " needs at least " +
                      std::to_string(static_cast<int>(std::ceil(3.0 * perplexity))) + " points, got " + std::to_string(n));
  }
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  double kl = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      if (i != j && p(i, j) > 0) kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
  return std::max(kl, 0.0);
}

}  // namespace

Eigen::MatrixXd tsne_affinities(const Eigen::MatrixXd& data, double perplexity) {
  const Eigen::Index n = data.rows();
  require_points(n, perplexity);
  const Eigen::MatrixXd d = squared_distances(data);
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    // Rescale so the initial precision suits the data's distance scale.
    double mean_d = 0;
    for (Eigen::Index j = 0; j < n; ++j) mean_d += d(i, j);
    mean_d /= static_cast<double>(n - 1);
    if (mean_d > 0) beta = 1.0 / mean_d;
    for (int it = 0; it < 200; ++it) {
      double sum = 0, weighted = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (d(i, j) - dmin));
        sum += row[j];
        weighted += row[j] * (d(i, j) - dmin);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
  }
  p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();
  return p;
}

TsneRun tsne_run(const Eigen::MatrixXd& data, const TsneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Eigen::Index n = data.rows();
  require_points(n, cfg.perplexity);
  const Eigen::MatrixXd p = tsne_affinities(data, cfg.perplexity);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  Eigen::MatrixX2d y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  Eigen::MatrixX2d velocity = Eigen::MatrixX2d::Zero(n, 2);
  Eigen::MatrixX2d gains = Eigen::MatrixX2d::Ones(n, 2);
  Eigen::MatrixXd num(n, n), q(n, n);
  Eigen::MatrixX2d grad(n, 2);

  const auto affinities = [&] {
    num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    q = (num / num.sum()).cwiseMax(1e-12);
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    const bool early = it < cfg.exaggeration_iterations;
    const double exag = early ? cfg.exaggeration : 1.0;
    const double momentum = early ? cfg.momentum_initial : cfg.momentum_final;
    affinities();
    const Eigen::MatrixXd w = ((exag * p - q).array() * num.array()).matrix();
    // grad_i = 4 sum_j w_ij (y_i - y_j)
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      double& g = gains.data()[k];
      g = (grad.data()[k] > 0) != (velocity.data()[k] > 0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
    }
    velocity = momentum * velocity - cfg.learning_rate * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }
  affinities();
  TsneRun run;
  run.seed = seed;
  run.kl = kl_divergence(p, q);
  run.points = y;
  return run;
}

Embedding2D tsne_embed(const Eigen::MatrixXd& data, const TsneConfig& cfg, std::vector<Label> labels,
                       std::vector<std::string> ids) {
  cfg.validate();
  require_points(data.rows(), cfg.perplexity);
  const auto n = static_cast<std::size_t>(data.rows());
  if (!labels.empty() && labels.size() != n) throw ShapeError("tsne_embed: label count differs from point count");
  if (!ids.empty() && ids.size() != n) throw ShapeError("tsne_embed: id count differs from point count");
  if (labels.empty()) labels.assign(n, Label::unknown);
  if (ids.empty())
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));

  Embedding2D out;
  Eigen::MatrixX2d best;
  double best_kl = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    TsneRun run = tsne_run(data, cfg, cfg.seed + static_cast<std::uint64_t>(r));
    out.restart_kls.push_back(run.kl);
    if (run.kl < best_kl) {
      best_kl = run.kl;
      best = std::move(run.points);
      out.selected = static_cast<std::size_t>(r);
    }
  }
  out.points = scale_unit(best);
  out.tsne_kl = best_kl;
  out.labels = std::move(labels);
  out.ids = std::move(ids);
  return out;
}

Eigen::MatrixX2d scale_unit(const Eigen::MatrixX2d& points) {
  Eigen::MatrixX2d out(points.rows(), 2);
  if (points.rows() == 0) return out;
  for (int c = 0; c < 2; ++c) {
    const double lo = points.col(c).minCoeff(), hi = points.col(c).maxCoeff();
    if (hi - lo > 0) {
      out.col(c) = ((points.col(c).array() - lo) / (hi - lo)).matrix();
    } else {
      out.col(c).setConstant(0.5);
    }
  }
  return out;
}

namespace {

const cv::Scalar kNormal(255, 0, 0);     // blue (BGR)
const cv::Scalar kAbnormal(0, 0, 255);   // red
const cv::Scalar kUnknown(128, 128, 128);

cv::Scalar colour(Label label) {
  switch (label) {
    case Label::normal: return kNormal;
    case Label::abnormal: return kAbnormal;
    default: return kUnknown;
  }
}

std::string hex(const cv::Scalar& bgr) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(bgr[2]), static_cast<int>(bgr[1]), static_cast<int>(bgr[0]));
  return buf;
}

void write_png(const std::filesystem::path& png, const cv::Mat& image) {
  bool ok = false;
  try {
    ok = cv::imwrite(png.string(), image);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image " + png.string());
}

}  // namespace

void render_scatter(const Embedding2D& embedding, const std::filesystem::path& png, const std::string& title) {
  constexpr int kSize = 640, kMargin = 48;
  cv::Mat canvas(kSize, kSize, CV_8UC3, cv::Scalar(255, 255, 255));
  const int span = kSize - 2 * kMargin;
  cv::rectangle(canvas, {kMargin, kMargin}, {kMargin + span, kMargin + span}, cv::Scalar(200, 200, 200));
  std::size_t normal = 0, abnormal = 0, unknown = 0;
  for (Eigen::Index i = 0; i < embedding.points.rows(); ++i) {
    const Label label = i < static_cast<Eigen::Index>(embedding.labels.size()) ? embedding.labels[static_cast<std::size_t>(i)]
                                                                                 : Label::unknown;
    (label == Label::normal ? normal : label == Label::abnormal ? abnormal : unknown)++;
    const cv::Point c(kMargin + static_cast<int>(std::lround(embedding.points(i, 0) * span)),
                      kMargin + static_cast<int>(std::lround((1.0 - embedding.points(i, 1)) * span)));
    cv::circle(canvas, c, 5, colour(label), cv::FILLED, cv::LINE_AA);
  }
  if (!title.empty()) cv::putText(canvas, title, {kMargin, 30}, cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  const int ly = kSize - 18;
  cv::circle(canvas, {kMargin + 6, ly - 5}, 5, kNormal, cv::FILLED, cv::LINE_AA);
  cv::putText(canvas, "normal", {kMargin + 16, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  cv::circle(canvas, {kMargin + 106, ly - 5}, 5, kAbnormal, cv::FILLED, cv::LINE_AA);
  cv::putText(canvas, "abnormal", {kMargin + 116, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  write_png(png, canvas);

  nlohmann::json legend;
  legend["colors"] = {{"normal", hex(kNormal)}, {"abnormal", hex(kAbnormal)}, {"unknown", hex(kUnknown)}};
  legend["counts"] = {{"normal", normal}, {"abnormal", abnormal}, {"unknown", unknown}};
  legend["tsne_kl"] = embedding.tsne_kl;
  legend["restart_kls"] = embedding.restart_kls;
  legend["selected_restart"] = embedding.selected;
  legend["title"] = title;
  std::ofstream os(png.string() + ".json");
  os << legend.dump(2) << '\n';
  if (!os) throw IoError("cannot write legend " + png.string() + ".json");
}

void render_reconstruction_grid(const std::vector<ReconstructionPair>& pairs, const std::filesystem::path& png) {
  if (pairs.empty()) throw UsageError("reconstruction grid needs at least one pair");
  constexpr int kCell = 128, kBand = 34, kGap = 4;
  const int cols = static_cast<int>(pairs.size());
  const int width = cols * kCell + (cols + 1) * kGap;
  const int height = 2 * (kCell + kBand) + 3 * kGap;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto place = [&](const float* chw, int row, int col) {
    cv::Mat rgb = to_rgb8(chw), bgr, big;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    cv::resize(bgr, big, {kCell, kCell}, 0, 0, cv::INTER_NEAREST);
    big.copyTo(canvas(cv::Rect(kGap + col * (kCell + kGap), kGap + row * (kCell + kBand + kGap), kCell, kCell)));
  };
  const auto caption = [&](const std::string& text, int row, int col, const cv::Scalar& c, int line = 0) {
    const cv::Point at(kGap + col * (kCell + kGap) + 2, kGap + row * (kCell + kBand + kGap) + kCell + 14 + 15 * line);
    cv::putText(canvas, text, at, cv::FONT_HERSHEY_SIMPLEX, 0.42, c, 1, cv::LINE_AA);
  };
  for (int j = 0; j < cols; ++j) {
    const auto& p = pairs[static_cast<std::size_t>(j)];
    const auto need = static_cast<Eigen::Index>(kImageChannels * kImageSize * kImageSize);
    if (p.original.data.size() != need || p.reconstruction.size() != need) {
      throw ShapeError("reconstruction grid: pair " + std::to_string(j) + " is not a 3x64x64 image");
    }
    place(p.original.data.data(), 0, j);
    place(p.reconstruction.data(), 1, j);
    caption("GT: " + to_string(p.original.label), 0, j, colour(p.original.label));
    const Label predicted = p.predicted == Verdict::anomaly ? Label::abnormal : Label::normal;
    caption("Pred: " + to_string(predicted), 1, j, colour(predicted));
    char buf[32];
    std::snprintf(buf, sizeof buf, "score %.4g", p.score);
    caption(buf, 1, j, cv::Scalar(0, 0, 0), 1);
  }
  write_png(png, canvas);
}

void write_embedding_csv(std::ostream& os, const Embedding2D& embedding) {
  os << "id,x,y,label,run_kl\n";
  char buf[64];
  for (Eigen::Index i = 0; i < embedding.points.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", embedding.points(i, 0), embedding.points(i, 1));
    os << (k < embedding.ids.size() ? embedding.ids[k] : std::to_string(i)) << ',' << buf << ','
       << to_string(k < embedding.labels.size() ? embedding.labels[k] : Label::unknown) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", embedding.tsne_kl);
    os << buf << '\n';
  }
}

}  // namespace bvae
