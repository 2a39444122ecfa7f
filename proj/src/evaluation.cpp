#include "bvae/evaluation.hpp"

#include "bvae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace bvae {

ConfusionCounts confusion(const std::vector<ScoreRecord>& records) {
  ConfusionCounts c;
  for (const auto& r : records) {
    if (!r.ground_truth || *r.ground_truth == Label::unknown) throw UsageError("record " + r.id + " has no ground truth");
    const bool predicted = r.verdict == Verdict::anomaly;
    const bool actual = *r.ground_truth == Label::abnormal;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics precision_recall_f1(const ConfusionCounts& c) {
  Metrics m;
  const auto ratio = [](std::int64_t num, std::int64_t den, bool& flag) {
    if (den == 0) {
      flag = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  if (m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

Stat mean_std(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("cannot aggregate an empty list of runs");
  const double n = static_cast<double>(values.size());
  Stat s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  // Keep the mean inside [min, max] despite rounding.
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.mean = std::clamp(s.mean, *lo, *hi);
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1));
  }
  return s;
}

RunAggregate aggregate_runs(const std::vector<double>& precision, const std::vector<double>& recall,
                            const std::vector<double>& f1) {
  if (precision.size() != recall.size() || precision.size() != f1.size()) {
    throw ConfigError("metric lists differ in length");
  }
  RunAggregate a;
  a.precision = mean_std(precision);
  a.recall = mean_std(recall);
  a.f1 = mean_std(f1);
  a.runs = precision.size();
  return a;
}

RunAggregate aggregate_runs(const std::vector<Metrics>& runs) {
  std::vector<double> p, r, f;
  std::size_t degenerate = 0;
  for (const auto& m : runs) {
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
    degenerate += m.degenerate() ? 1 : 0;
  }
  RunAggregate a = aggregate_runs(p, r, f);
  a.degenerate_runs = degenerate;
  return a;
}

void require_same_test_set(const std::vector<std::vector<ScoreRecord>>& runs) {
  if (runs.empty()) return;
  const auto ids = [](const std::vector<ScoreRecord>& records) {
    std::set<std::string> out;
    for (const auto& r : records) out.insert(r.id);
    return out;
  };
  const auto first = ids(runs.front());
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (ids(runs[i]) != first) {
      throw TestSetMismatch("run " + std::to_string(i + 1) + " was scored on a different test set than run 1");
    }
  }
}

std::string display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::cae: return "CAE";
    case ModelKind::vae: return "VAE";
    case ModelKind::beta_vae: return "beta-VAE";
  }
  return "?";
}

std::string display_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::recon: return "Recon";
    case ScoreKind::elbo: return "ELBO";
    case ScoreKind::gradcon: return "GradCon";
  }
  return "?";
}

ResultGrid method_grid(const std::map<std::pair<ModelKind, ScoreKind>, RunAggregate>& cells) {
  ResultGrid g;
  g.title = "Precision, recall and F1 by method and anomaly score (mean ± sample std over runs)";
  g.corner = "Evaluation \\ Method";
  for (ModelKind m : {ModelKind::cae, ModelKind::vae, ModelKind::beta_vae}) {
    for (ScoreKind s : score_kinds_for(m)) {
      GridColumn col{display_name(m), display_name(s), std::nullopt};
      if (auto it = cells.find({m, s}); it != cells.end()) col.cell = it->second;
      g.columns.push_back(std::move(col));
    }
  }
  return g;
}

std::string beta_label(double beta) {
  std::ostringstream os;
  os << beta;
  if (beta == 1.0) os << " (VAE)";
  return os.str();
}

ResultGrid beta_grid(const std::vector<std::pair<double, RunAggregate>>& cells) {
  ResultGrid g;
  g.title = "Effect of beta on a gradient-constrained beta-VAE (mean ± sample std over runs)";
  g.corner = "Evaluation \\ Beta";
  for (const auto& [beta, agg] : cells) g.columns.push_back({"", beta_label(beta), agg});
  return g;
}

namespace {

struct Row {
  const char* name;
  Stat RunAggregate::*field;
};

constexpr Row kRows[] = {{"Precision", &RunAggregate::precision},
                         {"Recall", &RunAggregate::recall},
                         {"F1-score", &RunAggregate::f1}};

std::string cell_text(const std::optional<RunAggregate>& cell, Stat RunAggregate::*field) {
  if (!cell) return "-";
  const Stat& s = (*cell).*field;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", s.mean, s.std);
  return buf;
}

// Display width, counting the two-byte "±" as one column.
std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

void pad(std::ostream& os, const std::string& s, std::size_t w) {
  os << s;
  for (std::size_t i = width(s); i < w; ++i) os << ' ';
}

}  // namespace

void write_grid_text(std::ostream& os, const ResultGrid& grid) {
  const bool grouped = std::any_of(grid.columns.begin(), grid.columns.end(), [](const auto& c) { return !c.group.empty(); });
  std::vector<std::vector<std::string>> cells(grid.columns.size());
  std::vector<std::size_t> w(grid.columns.size());
  std::size_t first = width(grid.corner);
  for (const auto& r : kRows) first = std::max(first, width(r.name));
  for (std::size_t j = 0; j < grid.columns.size(); ++j) {
    const auto& col = grid.columns[j];
    w[j] = std::max(width(col.label), grouped ? width(col.group) : 0);
    for (const auto& r : kRows) {
      cells[j].push_back(cell_text(col.cell, r.field));
      w[j] = std::max(w[j], width(cells[j].back()));
    }
  }
  if (!grid.title.empty()) os << grid.title << '\n';
  const auto line = [&](auto&& text_of, const std::string& lead) {
    os << "| ";
    pad(os, lead, first);
    for (std::size_t j = 0; j < grid.columns.size(); ++j) {
      os << " | ";
      pad(os, text_of(j), w[j]);
    }
    os << " |\n";
  };
  if (grouped) {
    line(
        [&](std::size_t j) {
          return j == 0 || grid.columns[j].group != grid.columns[j - 1].group ? grid.columns[j].group : std::string();
        },
        grid.corner);
    line([&](std::size_t j) { return grid.columns[j].label; }, "");
  } else {
    line([&](std::size_t j) { return grid.columns[j].label; }, grid.corner);
  }
  os << "|" << std::string(first + 2, '-');
  for (std::size_t j = 0; j < grid.columns.size(); ++j) os << "|" << std::string(w[j] + 2, '-');
  os << "|\n";
  for (std::size_t i = 0; i < std::size(kRows); ++i) line([&](std::size_t j) { return cells[j][i]; }, kRows[i].name);
  std::size_t runs = 0;
  for (const auto& c : grid.columns)
    if (c.cell) runs = std::max(runs, c.cell->runs);
  os << "runs per cell: " << runs << "; std uses the n-1 denominator\n";
}

void write_grid_csv(std::ostream& os, const ResultGrid& grid) {
  os << "group,column,metric,mean,std,runs,degenerate_runs\n";
  char buf[64];
  for (const auto& col : grid.columns) {
    if (!col.cell) continue;
    for (const auto& r : kRows) {
      const Stat& s = (*col.cell).*r.field;
      os << col.group << ',' << col.label << ',' << r.name << ',';
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", s.mean, s.std);
      os << buf << ',' << col.cell->runs << ',' << col.cell->degenerate_runs << '\n';
    }
  }
}

}  // namespace bvae
