#pragma once

#include "bvae/dataset.hpp"
#include "bvae/objective.hpp"
#include "bvae/trainer.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bvae {

enum class ScoreKind { recon, elbo, gradcon };

std::string to_string(ScoreKind kind);
ScoreKind parse_score_kind(const std::string& text);

/// Score kinds defined for a model kind (cae has no posterior, hence no elbo).
std::vector<ScoreKind> score_kinds_for(ModelKind kind);

struct ThresholdStrategy {
  enum class Kind { percentile, mean_plus_k_std };
  Kind kind = Kind::percentile;
  double param = 95.0;

  /// "percentile(95)" or "mean_plus_k_std(2)".
  std::string str() const;
  static ThresholdStrategy parse(const std::string& text);
};

struct ScoringConfig {
  ScoreKind score_kind = ScoreKind::gradcon;
  double gamma = 1.0;
  ThresholdStrategy threshold;
  double elbo_beta = 1.0;  // KL weight of the elbo score

  void validate() const;
};

enum class Verdict { normal, anomaly };

std::string to_string(Verdict v);
Verdict parse_verdict(const std::string& text);

struct ScoreRecord {
  std::string id;
  ScoreKind kind = ScoreKind::recon;
  double score = 0;
  double threshold = 0;
  Verdict verdict = Verdict::normal;
  std::optional<Label> ground_truth;
};

/// Per-sample reconstruction MSE in evaluation mode with eps = 0.
double score_recon(TrainedModel& trained, const ImageSample& sample);

/// Reconstruction MSE plus elbo_beta times the sample's KL term.
double score_elbo(TrainedModel& trained, const ImageSample& sample, double elbo_beta = 1.0);

/// Reconstruction MSE plus gamma times the gradient loss of the sample's
/// decoder gradients against the training-time gradient averages.
/// Parameters and gradient state are left unchanged.
double score_gradcon(TrainedModel& trained, const ImageSample& sample, double gamma);

/// The same three scores for many samples (batched where the score allows it).
Eigen::VectorXd score_samples(TrainedModel& trained, const std::vector<ImageSample>& samples, ScoreKind kind,
                              const ScoringConfig& cfg);

/// percentile(p): linear-interpolated p-th percentile; mean_plus_k_std(k):
/// mean + k * sample standard deviation. Needs at least two scores.
double calibrate_threshold(const std::vector<double>& val_scores, const ThresholdStrategy& strategy);

/// Anomaly iff score > threshold; ties are normal.
Verdict decide(double score, double threshold);

struct ScoreReport {
  ScoreKind kind = ScoreKind::recon;
  double threshold = 0;
  std::vector<double> validation_scores;
  std::vector<ScoreRecord> records;  // sorted by id
};

/// Calibrates on the validation split and scores the test split.
ScoreReport score_split(TrainedModel& trained, const DatasetSplit& split, ScoreKind kind, const ScoringConfig& cfg);

/// CSV with header id,kind,score,threshold,verdict,ground_truth preceded by
/// "# key=value" metadata lines. Rows are sorted by (id, kind).
void write_scores_csv(std::ostream& os, std::vector<ScoreRecord> records, const std::map<std::string, std::string>& metadata = {});

struct ScoreFile {
  std::map<std::string, std::string> metadata;
  std::vector<ScoreRecord> records;
};

ScoreFile read_scores_csv(std::istream& is);

}  // namespace bvae
