#include <doctest.h>

#include "bvae/config.hpp"
#include "bvae/errors.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace bvae;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_experiment(parse_key_values(is));
}

}  // namespace

TEST_CASE("key=value parsing trims, skips comments and keeps order") {
  std::istringstream is("# header\n  beta = 3.5  # trailing\n\nmodel_kind=cae\n");
  const KeyValues kv = parse_key_values(is);
  REQUIRE(kv.entries.size() == 2);
  CHECK(kv.entries[0] == std::pair<std::string, std::string>{"beta", "3.5"});
  CHECK(kv.entries[1].first == "model_kind");
}

TEST_CASE("malformed lines and duplicate keys are rejected with their location") {
  std::istringstream dup("beta=1\nbeta=2\n");
  try {
    parse_key_values(dup, "exp.conf");
    FAIL("expected duplicate key error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("exp.conf:2") != std::string::npos);
  }
  std::istringstream bare("beta\n");
  CHECK_THROWS_AS(parse_key_values(bare), ConfigError);
}

TEST_CASE("defaults reproduce the reference settings") {
  const ExperimentConfig c;
  CHECK(c.model.kind == ModelKind::beta_vae);
  CHECK(c.model.encoder_filters == std::vector<int>{16, 32, 64, 128, 256});
  CHECK(c.model.latent_dim() == 640);
  CHECK(c.training.lr_init == 1e-2);
  CHECK(c.training.lr_decay_factor == 0.1);
  CHECK(c.training.epochs == 100);
  CHECK(c.training.weight_decay == 1e-4);
  CHECK(c.training.batch_size == 64);
  CHECK(c.training.beta == 3.0);
  CHECK(c.training.alpha == 0.03);
  CHECK(c.scoring.score_kind == ScoreKind::gradcon);
  CHECK(c.sweep_betas == std::vector<double>{0.01, 0.1, 1, 3, 10});
  CHECK(c.tsne.perplexity == 5.0);
  CHECK(c.tsne.restarts == 100);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("every field can be set from text") {
  const ExperimentConfig c = parse(
      "model_kind=vae\nencoder_filters=8,8,16,16,32\ndecoder_filters=32,16,16,8,8,3\nbottleneck_channels=4\n"
      "epochs=7\nbeta=0.5\nalpha=0\naugment=false\nscore_kind=elbo\nthreshold=mean_plus_k_std(2)\ngamma=0.25\n"
      "synth_train=12\nsynth_anomaly_kinds=missing_blob,shifted_blob\ntsne_restarts=4\nruns=3\nseed=42\n"
      "sweep_betas=0.1, 1\ndataset=/data/pads\ncheckpoint_every=0\n");
  CHECK(c.model.kind == ModelKind::vae);
  CHECK(c.model.encoder_filters == std::vector<int>{8, 8, 16, 16, 32});
  CHECK(c.model.bottleneck_channels == 4);
  CHECK(c.training.epochs == 7);
  CHECK(c.training.beta == 0.5);
  CHECK(c.training.alpha == 0.0);
  CHECK_FALSE(c.training.augment);
  CHECK(c.scoring.score_kind == ScoreKind::elbo);
  CHECK(c.scoring.threshold.kind == ThresholdStrategy::Kind::mean_plus_k_std);
  CHECK(c.scoring.gamma == 0.25);
  CHECK(c.synth.train == 12);
  CHECK(c.synth.anomaly_kinds == std::vector<AnomalyKind>{AnomalyKind::missing_blob, AnomalyKind::shifted_blob});
  CHECK(c.tsne.restarts == 4);
  CHECK(c.runs == 3);
  CHECK(c.seed == 42);
  CHECK(c.sweep_betas == std::vector<double>{0.1, 1.0});
  CHECK(c.dataset == "/data/pads");
  CHECK(c.checkpoint_every == 0);
  CHECK(c.training_for_run(2).seed == 44);
}

TEST_CASE("unknown keys and bad values name the key") {
  auto message = [](const std::string& text) {
    try {
      parse(text).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("learning_rate=0.1\n").find("learning_rate") != std::string::npos);
  CHECK(message("epochs=ten\n").find("epochs") != std::string::npos);
  CHECK(message("beta=-1\n").find("beta") != std::string::npos);
  CHECK(message("model_kind=gan\n").find("model_kind") != std::string::npos);
  CHECK(message("threshold=top(3)\n").find("threshold") != std::string::npos);
  CHECK(message("synth_train=0\n").find("synth_train") != std::string::npos);
  CHECK(message("pool_after=1,2,3,4\n").find("upsample_after") != std::string::npos);
  CHECK(message("input_size=32\n").find("input_size") != std::string::npos);
  CHECK(message("tsne_perplexity=0\n").find("tsne_perplexity") != std::string::npos);
  CHECK(message("runs=0\n").find("runs") != std::string::npos);
}

TEST_CASE("the resolved dump lists every key and parses back to the same configuration") {
  ExperimentConfig c = parse("model_kind=cae\nbeta=0.30000000000000004\nsweep_betas=0.01,3\nseed=9\nthreshold=percentile(90)\n");
  const std::string text = c.resolved();
  for (const auto& key : config_keys()) CHECK(text.find(key + "=") != std::string::npos);
  const ExperimentConfig back = parse(text);
  CHECK(back.resolved() == text);
  CHECK(back.training.beta == 0.30000000000000004);
  CHECK(back.model == c.model);
  CHECK(back.training.canonical() == c.training.canonical());
}

TEST_CASE("canonical architecture and training text parse back") {
  const ModelSpec spec = test::small_spec(ModelKind::cae);
  CHECK(parse_model_spec(canonical(spec)) == spec);
  TrainingConfig t;
  t.seed = 17;
  t.alpha = 0.125;
  CHECK(parse_training_config(t.canonical()).canonical() == t.canonical());
}

TEST_CASE("configuration files load from disk") {
  test::TempDir dir;
  const auto file = dir.path() / "exp.conf";
  std::ofstream(file) << "epochs=3\nruns=2\n";
  const ExperimentConfig c = load_experiment(file);
  CHECK(c.training.epochs == 3);
  CHECK(c.runs == 2);
  CHECK_THROWS_AS(load_experiment(dir.path() / "missing.conf"), ConfigError);
}

TEST_CASE("a missing dataset directory is a configuration error naming the key") {
  ExperimentConfig c;
  c.dataset = "/nonexistent/pads";
  try {
    load_dataset(c);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("dataset", 0) == 0);
  }
  c.dataset = "synthetic";
  c.synth = test::tiny_synth();
  CHECK(load_dataset(c).train.size() == 24);
}
