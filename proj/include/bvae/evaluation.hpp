#pragma once

#include "bvae/model.hpp"
#include "bvae/scoring.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvae {

/// Anomaly is the positive class.
struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const std::vector<ScoreRecord>& records);

/// A zero denominator yields 0 and sets the matching flag.
struct Metrics {
  double precision = 0, recall = 0, f1 = 0;
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;

  bool degenerate() const { return precision_undefined || recall_undefined || f1_undefined; }
};

Metrics precision_recall_f1(const ConfusionCounts& c);

struct Stat {
  double mean = 0;
  double std = 0;  // sample std (n - 1), 0 for one value
};

Stat mean_std(const std::vector<double>& values);

struct RunAggregate {
  Stat precision, recall, f1;
  std::size_t runs = 0;
  std::size_t degenerate_runs = 0;
};

RunAggregate aggregate_runs(const std::vector<double>& precision, const std::vector<double>& recall,
                            const std::vector<double>& f1);
RunAggregate aggregate_runs(const std::vector<Metrics>& runs);

/// Runs scored on different test samples cannot be pooled.
class TestSetMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws TestSetMismatch unless every run holds the same set of sample ids.
void require_same_test_set(const std::vector<std::vector<ScoreRecord>>& runs);

// ---------------------------------------------------------------------------
// Report grids: metric rows (precision, recall, F1) against labelled columns.

struct GridColumn {
  std::string group;  // e.g. "beta-VAE"; empty for a flat header
  std::string label;  // e.g. "GradCon" or "1 (VAE)"
  std::optional<RunAggregate> cell;
};

struct ResultGrid {
  std::string title;
  std::string corner;  // header of the metric column
  std::vector<GridColumn> columns;
};

std::string display_name(ModelKind kind);  // CAE, VAE, beta-VAE
std::string display_name(ScoreKind kind);  // Recon, ELBO, GradCon

/// The method x score layout: CAE {Recon, GradCon}, VAE and beta-VAE
/// {Recon, ELBO, GradCon}. Missing cells print as "-".
ResultGrid method_grid(const std::map<std::pair<ModelKind, ScoreKind>, RunAggregate>& cells);

inline const std::vector<double> kDefaultBetas{0.01, 0.1, 1.0, 3.0, 10.0};

/// Column label for a beta value; beta = 1 reads "1 (VAE)".
std::string beta_label(double beta);

ResultGrid beta_grid(const std::vector<std::pair<double, RunAggregate>>& cells);

/// Human-readable table with "mean ± std" cells.
void write_grid_text(std::ostream& os, const ResultGrid& grid);

/// One row per (column, metric): group,column,metric,mean,std,runs,degenerate_runs.
void write_grid_csv(std::ostream& os, const ResultGrid& grid);

}  // namespace bvae
