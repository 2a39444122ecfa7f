#include "bvae/scoring.hpp"

#include "bvae/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bvae {

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::recon: return "recon";
    case ScoreKind::elbo: return "elbo";
    case ScoreKind::gradcon: return "gradcon";
  }
  return "?";
}

ScoreKind parse_score_kind(const std::string& text) {
  if (text == "recon") return ScoreKind::recon;
  if (text == "elbo") return ScoreKind::elbo;
  if (text == "gradcon") return ScoreKind::gradcon;
  throw ConfigError("unknown score kind '" + text + "' (expected recon, elbo or gradcon)");
}

std::vector<ScoreKind> score_kinds_for(ModelKind kind) {
  if (kind == ModelKind::cae) return {ScoreKind::recon, ScoreKind::gradcon};
  return {ScoreKind::recon, ScoreKind::elbo, ScoreKind::gradcon};
}

std::string ThresholdStrategy::str() const {
  std::ostringstream os;
  os << (kind == Kind::percentile ? "percentile" : "mean_plus_k_std") << '(' << param << ')';
  return os.str();
}

ThresholdStrategy ThresholdStrategy::parse(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')') {
    throw ConfigError("threshold strategy '" + text + "' must look like percentile(95) or mean_plus_k_std(2)");
  }
  const std::string name = text.substr(0, open);
  const std::string arg = text.substr(open + 1, text.size() - open - 2);
  ThresholdStrategy s;
  if (name == "percentile") {
    s.kind = Kind::percentile;
  } else if (name == "mean_plus_k_std") {
    s.kind = Kind::mean_plus_k_std;
  } else {
    throw ConfigError("unknown threshold strategy '" + name + "'");
  }
  const char* end = arg.data() + arg.size();
  auto [ptr, ec] = std::from_chars(arg.data(), end, s.param);
  if (ec != std::errc() || ptr != end || !std::isfinite(s.param)) throw ConfigError("bad threshold parameter '" + arg + "'");
  if (s.kind == Kind::percentile && (s.param < 0 || s.param > 100)) throw ConfigError("percentile must lie in [0, 100]");
  return s;
}

void ScoringConfig::validate() const {
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ConfigError("gamma must be a finite value >= 0");
  if (!(elbo_beta >= 0) || !std::isfinite(elbo_beta)) throw ConfigError("elbo_beta must be a finite value >= 0");
  if (threshold.kind == ThresholdStrategy::Kind::percentile && (threshold.param < 0 || threshold.param > 100)) {
    throw ConfigError("percentile must lie in [0, 100]");
  }
}

std::string to_string(Verdict v) { return v == Verdict::anomaly ? "anomaly" : "normal"; }

Verdict parse_verdict(const std::string& text) {
  if (text == "anomaly") return Verdict::anomaly;
  if (text == "normal") return Verdict::normal;
  throw DataError("unknown verdict '" + text + "'");
}

namespace {

void require_trained(const TrainedModel& trained) {
  if (trained.iterations == 0) throw UsageError("model has not been trained");
}

void require_gradients(const TrainedModel& trained) {
  if (trained.gradients.k == 0 || trained.gradients.empty()) {
    throw UsageError("gradcon scoring needs the gradient averages recorded during training");
  }
}

Tensor<Real> single(const ImageSample& sample) { return make_batch(std::vector<ImageSample>{sample}); }

LatentMatrix<Real> bottleneck(Network& model, const Tensor<Real>& x) {
  if (model.spec().variational()) return model.encode(x, nn::Mode::eval).mu;
  return model.cae_encode(x, nn::Mode::eval);
}

// Recon score plus gamma * L_grad for one sample, given its bottleneck code.
double gradcon_from_code(TrainedModel& trained, const Tensor<Real>& x, const LatentMatrix<Real>& code, double gamma) {
  Network& model = trained.model;
  const Tensor<Real> x_hat = model.decode(code, nn::Mode::eval);
  const double recon = recon_loss(x_hat, x);
  auto layers = model.decoder_layers();
  for (auto& l : layers)
    for (auto* p : l.params) p->grad.setZero();
  model.backward_decoder(recon_loss_grad(x_hat, x));
  const LayerGradients g = collect_gradients(layers);
  for (auto& l : layers)
    for (auto* p : l.params) p->grad.setZero();
  return recon + gamma * gradient_loss(g, trained.gradients);
}

}  // namespace

double score_recon(TrainedModel& trained, const ImageSample& sample) {
  require_trained(trained);
  const Evaluation e = evaluate(trained.model, {sample}, 1);
  return e.recon[0];
}

double score_elbo(TrainedModel& trained, const ImageSample& sample, double elbo_beta) {
  require_trained(trained);
  if (!trained.model.spec().variational()) throw UsageError("elbo score is undefined for a cae");
  const Evaluation e = evaluate(trained.model, {sample}, 1);
  return e.recon[0] + elbo_beta * e.kl[0];
}

double score_gradcon(TrainedModel& trained, const ImageSample& sample, double gamma) {
  require_trained(trained);
  require_gradients(trained);
  const Tensor<Real> x = single(sample);
  return gradcon_from_code(trained, x, bottleneck(trained.model, x), gamma);
}

Eigen::VectorXd score_samples(TrainedModel& trained, const std::vector<ImageSample>& samples, ScoreKind kind,
                              const ScoringConfig& cfg) {
  require_trained(trained);
  cfg.validate();
  const Index n = static_cast<Index>(samples.size());
  if (kind == ScoreKind::gradcon) {
    require_gradients(trained);
    Eigen::VectorXd out(n);
    for (Index i = 0; i < n; ++i) {
      const Tensor<Real> x = single(samples[static_cast<std::size_t>(i)]);
      out[i] = gradcon_from_code(trained, x, bottleneck(trained.model, x), cfg.gamma);
    }
    return out;
  }
  if (kind == ScoreKind::elbo && !trained.model.spec().variational()) throw UsageError("elbo score is undefined for a cae");
  if (n == 0) return {};
  const Evaluation e = evaluate(trained.model, samples);
  if (kind == ScoreKind::recon) return e.recon;
  return e.recon + cfg.elbo_beta * e.kl;
}

double calibrate_threshold(const std::vector<double>& val_scores, const ThresholdStrategy& strategy) {
  if (val_scores.size() < 2) throw ConfigError("threshold calibration needs at least two validation scores");
  for (double s : val_scores)
    if (!std::isfinite(s)) throw NumericError("threshold calibration: non-finite validation score");
  const double n = static_cast<double>(val_scores.size());
  if (strategy.kind == ThresholdStrategy::Kind::percentile) {
    std::vector<double> s = val_scores;
    std::sort(s.begin(), s.end());
    const double pos = strategy.param / 100.0 * (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
  }
  const double mean = std::accumulate(val_scores.begin(), val_scores.end(), 0.0) / n;
  double ss = 0;
  for (double s : val_scores) ss += (s - mean) * (s - mean);
  return mean + strategy.param * std::sqrt(ss / (n - 1));
}

Verdict decide(double score, double threshold) { return score > threshold ? Verdict::anomaly : Verdict::normal; }

ScoreReport score_split(TrainedModel& trained, const DatasetSplit& split, ScoreKind kind, const ScoringConfig& cfg) {
  if (split.validation.empty()) throw ConfigError("validation set is empty");
  ScoreReport report;
  report.kind = kind;
  const Eigen::VectorXd val = score_samples(trained, split.validation, kind, cfg);
  report.validation_scores.assign(val.data(), val.data() + val.size());
  report.threshold = calibrate_threshold(report.validation_scores, cfg.threshold);
  const Eigen::VectorXd test = score_samples(trained, split.test, kind, cfg);
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    ScoreRecord r;
    r.id = split.test[i].id;
    r.kind = kind;
    r.score = test[static_cast<Index>(i)];
    r.threshold = report.threshold;
    r.verdict = decide(r.score, r.threshold);
    if (split.test[i].label != Label::unknown) r.ground_truth = split.test[i].label;
    report.records.push_back(std::move(r));
  }
  std::sort(report.records.begin(), report.records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return report;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("scores line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

constexpr const char* kHeader = "id,kind,score,threshold,verdict,ground_truth";

}  // namespace

void write_scores_csv(std::ostream& os, std::vector<ScoreRecord> records, const std::map<std::string, std::string>& metadata) {
  std::sort(records.begin(), records.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    if (a.id != b.id) return a.id < b.id;
    return a.kind < b.kind;
  });
  for (const auto& [k, v] : metadata) os << "# " << k << '=' << v << '\n';
  os << kHeader << '\n';
  for (const auto& r : records) {
    if (r.id.find(',') != std::string::npos) throw DataError("sample id contains a comma: " + r.id);
    os << r.id << ',' << to_string(r.kind) << ',' << format_double(r.score) << ',' << format_double(r.threshold) << ','
       << to_string(r.verdict) << ',' << (r.ground_truth ? to_string(*r.ground_truth) : "") << '\n';
  }
}

ScoreFile read_scores_csv(std::istream& is) {
  ScoreFile out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) out.metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header) {
      if (line != kHeader) throw DataError("scores file: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 6) throw DataError("scores line " + std::to_string(lineno) + ": expected 6 fields");
    ScoreRecord r;
    r.id = f[0];
    r.kind = parse_score_kind(f[1]);
    r.score = parse_double(f[2], lineno);
    r.threshold = parse_double(f[3], lineno);
    r.verdict = parse_verdict(f[4]);
    if (!f[5].empty()) r.ground_truth = parse_label(f[5]);
    out.records.push_back(std::move(r));
  }
  if (!header) throw DataError("scores file: missing header");
  return out;
}

}  // namespace bvae
