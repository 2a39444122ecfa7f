#include "bvae/checkpoint.hpp"

#include "bvae/config.hpp"
#include "bvae/errors.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace bvae {

namespace {

constexpr char kMagic[8] = {'B', 'V', 'A', 'E', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
  void pod(const T& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename Derived>
  void array(const Eigen::DenseBase<Derived>& a) {
    using S = typename Derived::Scalar;
    pod<std::uint64_t>(static_cast<std::uint64_t>(a.size()));
    const Eigen::Array<S, Eigen::Dynamic, 1> flat = a.derived().reshaped();
    os_.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(S)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string file) : is_(is), file_(std::move(file)) {}

  template <typename T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 20)) fail("implausible string length");
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  template <typename S>
  Eigen::Array<S, Eigen::Dynamic, 1> array(std::uint64_t expected) {
    const auto n = pod<std::uint64_t>();
    if (n != expected) fail("array of " + std::to_string(n) + " entries where " + std::to_string(expected) + " were expected");
    Eigen::Array<S, Eigen::Dynamic, 1> a(static_cast<Index>(n));
    is_.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(S)));
    check();
    return a;
  }
  [[noreturn]] void fail(const std::string& what) const { throw DataError("checkpoint " + file_ + ": " + what); }

 private:
  void check() {
    if (!is_) fail("truncated file");
  }
  std::istream& is_;
  std::string file_;
};

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::filesystem::path meta_path(const std::filesystem::path& file) { return file.string() + ".meta"; }

std::map<std::string, std::string> read_meta(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("cannot read checkpoint metadata " + file.string());
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : parse_key_values(is, file.string()).entries) out[k] = v;
  return out;
}

}  // namespace

void save_checkpoint(TrainedModel& trained, const std::filesystem::path& file) {
  save_checkpoint(trained.model, trained.gradients, trained.config, trained.fingerprint, trained.best_epoch, trained.iterations, file);
}

void save_checkpoint(Network& model, const GradientState& gradients, const TrainingConfig& config, const std::string& fingerprint,
                     int best_epoch, std::int64_t iterations, const std::filesystem::path& file) {
  const std::string tmp = file.string() + ".partial";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + file.string());
    Writer w(os);
    os.write(kMagic, sizeof kMagic);
    w.pod(kCheckpointVersion);
    w.str(canonical(model.spec()));
    w.str(config.canonical());
    w.str(fingerprint);
    w.pod<std::int64_t>(best_epoch);
    w.pod<std::int64_t>(iterations);
    const auto params = model.parameters();
    w.pod<std::uint64_t>(params.size());
    for (const auto* p : params) {
      w.str(p->name);
      w.array(p->value);
    }
    const auto buffers = model.buffers();
    w.pod<std::uint64_t>(buffers.size());
    for (const auto* b : buffers) {
      w.str(b->name);
      w.array(b->value);
    }
    const GradientState& g = gradients;
    w.pod<std::int64_t>(g.k);
    w.pod<std::uint64_t>(g.average.size());
    for (std::size_t i = 0; i < g.average.size(); ++i) {
      w.str(i < g.layer_names.size() ? g.layer_names[i] : std::string());
      w.array(g.average[i]);
    }
    if (!os) throw IoError("cannot write checkpoint " + file.string());
  }
  std::filesystem::rename(tmp, file);

  std::ofstream meta(meta_path(file));
  meta << "format_version=" << kCheckpointVersion << "\nmodel_kind=" << to_string(model.spec().kind)
       << "\nencoder_filters=" << join(model.spec().encoder_filters)
       << "\ndecoder_filters=" << join(model.spec().decoder_filters) << "\nlatent_dim=" << model.latent_dim()
       << "\nbeta=" << format_real(config.beta) << "\nalpha=" << format_real(config.alpha)
       << "\nfingerprint=" << fingerprint << "\nbest_epoch=" << best_epoch << "\niterations=" << iterations << "\ngradient_history=" << gradients.k << "\nparameter_count=" << model.parameter_count() << "\n";
  if (!meta) throw IoError("cannot write checkpoint metadata " + meta_path(file).string());
}

TrainedModel load_checkpoint(const std::filesystem::path& file) {
  const auto meta = read_meta(meta_path(file));
  const auto version = meta.find("format_version");
  if (version == meta.end()) throw DataError("checkpoint metadata lacks format_version");
  if (version->second != std::to_string(kCheckpointVersion)) {
    throw VersionMismatch("checkpoint metadata format " + version->second + ", this build reads " + std::to_string(kCheckpointVersion));
  }

  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + file.string());
  Reader r(is, file.string());
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint file");
  const auto bin_version = r.pod<std::uint32_t>();
  if (bin_version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint format " + std::to_string(bin_version) + ", this build reads " +
                          std::to_string(kCheckpointVersion));
  }

  const ModelSpec spec = parse_model_spec(r.str());
  const TrainingConfig config = parse_training_config(r.str());
  TrainedModel out{Network(spec, 0), {}, {}, config, r.str(), 0, 0};
  if (auto fp = meta.find("fingerprint"); fp == meta.end() || fp->second != out.fingerprint) {
    throw VersionMismatch("checkpoint metadata does not belong to " + file.string());
  }
  out.best_epoch = static_cast<int>(r.pod<std::int64_t>());
  out.iterations = r.pod<std::int64_t>();

  const auto params = out.model.parameters();
  if (r.pod<std::uint64_t>() != params.size()) r.fail("parameter count differs from the architecture");
  for (auto* p : params) {
    if (r.str() != p->name) r.fail("parameter order differs at " + p->name);
    p->value = r.array<Real>(static_cast<std::uint64_t>(p->value.size())).matrix();
  }
  const auto buffers = out.model.buffers();
  if (r.pod<std::uint64_t>() != buffers.size()) r.fail("buffer count differs from the architecture");
  for (auto* b : buffers) {
    if (r.str() != b->name) r.fail("buffer order differs at " + b->name);
    b->value = r.array<Real>(static_cast<std::uint64_t>(b->value.size())).matrix();
  }
  GradientState& g = out.gradients;
  g.k = r.pod<std::int64_t>();
  const auto layers = out.model.decoder_layers();
  const auto count = r.pod<std::uint64_t>();
  if (count != 0 && count != layers.size()) r.fail("gradient state layer count differs from the decoder");
  for (std::size_t i = 0; i < count; ++i) {
    g.layer_names.push_back(r.str());
    g.average.push_back(r.array<double>(static_cast<std::uint64_t>(layers[i].size())).matrix());
  }
  return out;
}

}  // namespace bvae
