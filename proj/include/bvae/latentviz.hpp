#pragma once

#include "bvae/dataset.hpp"
#include "bvae/scoring.hpp"
#include "bvae/trainer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace bvae {

/// Posterior means (bottleneck codes for a cae), one row per sample, computed
/// in evaluation mode without sampling.
Eigen::MatrixXd collect_latents(TrainedModel& trained, const std::vector<ImageSample>& samples);

struct TsneConfig {
  double perplexity = 5.0;
  int restarts = 100;
  int iterations = 1000;
  int exaggeration_iterations = 250;  // also the momentum switch point
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  double init_std = 1e-4;
  std::uint64_t seed = 0;  // restart r uses seed + r

  void validate() const;
};

struct TsneRun {
  std::uint64_t seed = 0;
  double kl = 0;
  Eigen::MatrixX2d points;  // unscaled
};

struct Embedding2D {
  Eigen::MatrixX2d points;  // scaled to [0, 1]
  double tsne_kl = 0;
  std::vector<Label> labels;
  std::vector<std::string> ids;
  std::vector<double> restart_kls;
  std::size_t selected = 0;
};

/// Symmetrized joint affinities with each row's conditional matched to the
/// perplexity by bisection on the Gaussian precision.
Eigen::MatrixXd tsne_affinities(const Eigen::MatrixXd& data, double perplexity);

/// One exact t-SNE optimization. Throws ConfigError when there are fewer
/// than 3 * perplexity points.
TsneRun tsne_run(const Eigen::MatrixXd& data, const TsneConfig& cfg, std::uint64_t seed);

/// All restarts, keeping the one with the lowest final KL, scaled to [0, 1].
Embedding2D tsne_embed(const Eigen::MatrixXd& data, const TsneConfig& cfg, std::vector<Label> labels = {},
                       std::vector<std::string> ids = {});

/// Per-axis min-max scaling; an axis without spread maps to 0.5.
Eigen::MatrixX2d scale_unit(const Eigen::MatrixX2d& points);

/// Scatter plot (blue normal, red abnormal, grey unlabelled) plus a JSON
/// legend sidecar at <png>.json.
void render_scatter(const Embedding2D& embedding, const std::filesystem::path& png, const std::string& title = {});

struct ReconstructionPair {
  ImageSample original;
  Eigen::ArrayXf reconstruction;  // CHW in [-1, 1]
  Verdict predicted = Verdict::normal;
  double score = 0;
};

/// Originals with their ground truth on the top row, reconstructions with
/// predicted label and score below.
void render_reconstruction_grid(const std::vector<ReconstructionPair>& pairs, const std::filesystem::path& png);

/// id,x,y,label,run_kl
void write_embedding_csv(std::ostream& os, const Embedding2D& embedding);

}  // namespace bvae
