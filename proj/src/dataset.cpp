#include "bvae/dataset.hpp"

#include "bvae/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>

namespace fs = std::filesystem;

namespace bvae {

std::string to_string(Label label) {
  switch (label) {
    case Label::normal:
      return "normal";
    case Label::abnormal:
      return "abnormal";
    case Label::unknown:
      return "unknown";
  }
  return "unknown";
}

Label parse_label(const std::string& text) {
  if (text == "normal") return Label::normal;
  if (text == "abnormal") return Label::abnormal;
  if (text == "unknown" || text.empty()) return Label::unknown;
  throw DataError("unknown label '" + text + "'");
}

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::missing_blob:
      return "missing_blob";
    case AnomalyKind::extra_blob:
      return "extra_blob";
    case AnomalyKind::bridged_blobs:
      return "bridged_blobs";
    case AnomalyKind::shifted_blob:
      return "shifted_blob";
  }
  return "unknown";
}

AnomalyKind parse_anomaly_kind(const std::string& text) {
  for (auto k : {AnomalyKind::missing_blob, AnomalyKind::extra_blob, AnomalyKind::bridged_blobs, AnomalyKind::shifted_blob}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown anomaly kind '" + text + "'");
}

// ---------------------------------------------------------------------------

RawImage decode_image(const fs::path& file) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot decode image: " + file.string());
  RawImage out;
  cv::cvtColor(bgr, out.pixels, cv::COLOR_BGR2RGB);
  out.source_path = file.string();
  return out;
}

ImageSample preprocess(const RawImage& image, std::string id, Label label) {
  const cv::Mat& px = image.pixels;
  if (px.empty() || px.type() != CV_8UC3) throw DataError("preprocess: expected a non-empty 3-channel 8-bit image: " + image.source_path);
  const int side = std::min(px.rows, px.cols);
  const cv::Rect crop((px.cols - side) / 2, (px.rows - side) / 2, side, side);
  cv::Mat square;
  px(crop).convertTo(square, CV_32FC3);
  cv::Mat resized;
  if (side == kImageSize) {
    resized = square;
  } else {
    cv::resize(square, resized, cv::Size(kImageSize, kImageSize), 0, 0, cv::INTER_LINEAR);
  }

  ImageSample out;
  out.id = id.empty() ? image.source_path : std::move(id);
  out.label = label;
  out.data.resize(kImageChannels * kImageSize * kImageSize);
  const int plane = kImageSize * kImageSize;
  for (int y = 0; y < kImageSize; ++y) {
    const auto* row = resized.ptr<cv::Vec3f>(y);
    for (int x = 0; x < kImageSize; ++x) {
      for (int c = 0; c < kImageChannels; ++c) {
        const float v = row[x][c] / 127.5f - 1.0f;
        out.data[c * plane + y * kImageSize + x] = std::clamp(v, -1.0f, 1.0f);
      }
    }
  }
  return out;
}

ImageSample flip_horizontal(const ImageSample& sample) {
  ImageSample out = sample;
  const Index rows = static_cast<Index>(sample.data.size()) / kImageSize;
  for (Index r = 0; r < rows; ++r) {
    auto row = out.data.segment(r * kImageSize, kImageSize);
    row = row.reverse().eval();
  }
  return out;
}

Tensor<float> make_batch(const std::vector<ImageSample>& samples, const std::vector<std::size_t>& indices) {
  Tensor<float> batch(static_cast<Index>(indices.size()), kImageChannels, kImageSize, kImageSize);
  const Index m = batch.sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = samples.at(indices[i]);
    if (s.data.size() != m) throw ShapeError("make_batch: sample " + s.id + " has wrong size");
    batch.array().segment(static_cast<Index>(i) * m, m) = s.data;
  }
  return batch;
}

Tensor<float> make_batch(const std::vector<ImageSample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(samples, idx);
}

cv::Mat to_rgb8(const float* chw, int size) {
  cv::Mat out(size, size, CV_8UC3);
  const int plane = size * size;
  for (int y = 0; y < size; ++y) {
    auto* row = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = (chw[c * plane + y * size + x] + 1.0f) * 127.5f;
        row[x][c] = cv::saturate_cast<uchar>(std::lround(v));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<ImageSample> load_dir(const fs::path& root, const fs::path& rel, Label label) {
  const fs::path dir = root / rel;
  if (!fs::is_directory(dir)) throw ConfigError("missing dataset directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageSample> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    out.push_back(preprocess(decode_image(f), fs::relative(f, root).generic_string(), label));
  }
  return out;
}

}  // namespace

DatasetSplit load_split(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root is not a directory: " + root.string());
  DatasetSplit split;
  split.train = load_dir(root, "train/normal", Label::normal);
  split.validation = load_dir(root, "val/normal", Label::normal);
  split.test = load_dir(root, "test/abnormal", Label::abnormal);
  auto normals = load_dir(root, "test/normal", Label::normal);
  split.test.insert(split.test.end(), std::make_move_iterator(normals.begin()), std::make_move_iterator(normals.end()));
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic fixture

void SynthConfig::validate() const {
  if (train < 1) throw ConfigError("synth_train must be >= 1");
  if (validation < 1) throw ConfigError("synth_validation must be >= 1");
  if (test_normal < 0 || test_abnormal < 0) throw ConfigError("synth_test_normal and synth_test_abnormal must be >= 0");
  if (test_abnormal > 0 && anomaly_kinds.empty()) throw ConfigError("synth_anomaly_kinds must not be empty");
  if (noise < 0) throw ConfigError("synth_noise must be >= 0");
  if (width < kImageSize || height < kImageSize) throw ConfigError("synth_width and synth_height must be >= 64");
}

namespace {

const cv::Vec3d kBackground{35, 95, 50};
const cv::Vec3d kBody{45, 45, 52};
const cv::Vec3d kSolder{200, 198, 188};

class FixtureRenderer {
 public:
  FixtureRenderer(const SynthConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  SyntheticImage render(Label label, std::optional<AnomalyKind> anomaly) {
    std::uniform_real_distribution<double> jitter(-2.0, 2.0);
    std::uniform_real_distribution<double> tone(-10.0, 10.0);
    std::uniform_int_distribution<int> coin(0, 1);

    const double scale = std::min(cfg_.width, cfg_.height) / 72.0;
    const cv::Point2d centre(cfg_.width / 2.0 + jitter(rng_), cfg_.height / 2.0 + jitter(rng_));
    const double gap = 22.0 * scale;
    SynthLayout layout;
    layout.background = kBackground + cv::Vec3d::all(tone(rng_) * 0.5);
    layout.blob_radii = cv::Size2d((9.0 + jitter(rng_) * 0.5) * scale, (11.0 + jitter(rng_) * 0.5) * scale);
    layout.blob_centers[0] = centre + cv::Point2d(-gap, 0);
    layout.blob_centers[1] = centre + cv::Point2d(gap, 0);
    const int bw = static_cast<int>(24 * scale), bh = static_cast<int>(30 * scale);
    layout.body = cv::Rect(static_cast<int>(centre.x) - bw / 2, static_cast<int>(centre.y) - bh / 2, bw, bh);
    const cv::Vec3d solder = kSolder + cv::Vec3d::all(tone(rng_));

    cv::Mat canvas(cfg_.height, cfg_.width, CV_64FC3, cv::Scalar(layout.background[0], layout.background[1], layout.background[2]));
    cv::rectangle(canvas, layout.body, cv::Scalar(kBody[0], kBody[1], kBody[2]), cv::FILLED);

    bool draw[2] = {true, true};
    cv::Point2d centres[2] = {layout.blob_centers[0], layout.blob_centers[1]};
    if (anomaly) {
      const int side = coin(rng_);
      switch (*anomaly) {
        case AnomalyKind::missing_blob:
          draw[side] = false;
          break;
        case AnomalyKind::shifted_blob:
          centres[side].y += (coin(rng_) ? 1.0 : -1.0) * 14.0 * scale;
          break;
        case AnomalyKind::extra_blob: {
          const double dy = (coin(rng_) ? 1.0 : -1.0) * 24.0 * scale;
          blob(canvas, centre + cv::Point2d(0, dy), cv::Size2d(8.0 * scale, 7.0 * scale), solder);
          break;
        }
        case AnomalyKind::bridged_blobs: {
          const int thick = static_cast<int>(8 * scale);
          cv::rectangle(canvas,
                        cv::Rect(static_cast<int>(layout.blob_centers[0].x), static_cast<int>(centre.y) - thick / 2,
                                 static_cast<int>(2 * gap), thick),
                        cv::Scalar(solder[0], solder[1], solder[2]), cv::FILLED);
          break;
        }
      }
    }
    for (int s = 0; s < 2; ++s) {
      if (draw[s]) blob(canvas, centres[s], layout.blob_radii, solder);
    }

    if (cfg_.noise > 0) {
      std::normal_distribution<double> noise(0.0, cfg_.noise);
      for (int y = 0; y < canvas.rows; ++y) {
        auto* row = canvas.ptr<cv::Vec3d>(y);
        for (int x = 0; x < canvas.cols; ++x) {
          for (int c = 0; c < 3; ++c) row[x][c] += noise(rng_);
        }
      }
    }

    SyntheticImage out;
    canvas.convertTo(out.image.pixels, CV_8UC3);  // saturating
    out.label = label;
    out.anomaly = anomaly;
    out.layout = layout;
    return out;
  }

 private:
  static void blob(cv::Mat& canvas, cv::Point2d c, cv::Size2d r, const cv::Vec3d& colour) {
    const cv::Point centre(static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y)));
    cv::ellipse(canvas, centre, cv::Size(static_cast<int>(r.width), static_cast<int>(r.height)), 0, 0, 360,
                cv::Scalar(colour[0] * 0.85, colour[1] * 0.85, colour[2] * 0.85), cv::FILLED);
    cv::ellipse(canvas, centre, cv::Size(static_cast<int>(r.width * 0.55), static_cast<int>(r.height * 0.55)), 0, 0, 360,
                cv::Scalar(std::min(255.0, colour[0] * 1.15), std::min(255.0, colour[1] * 1.15), std::min(255.0, colour[2] * 1.15)),
                cv::FILLED);
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
};

std::string numbered(int i, const std::string& suffix = {}) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", i);
  return std::string(buf) + suffix + ".png";
}

}  // namespace

std::vector<SyntheticImage> generate_synthetic_images(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  FixtureRenderer renderer(config, seed);
  std::vector<SyntheticImage> out;
  auto emit = [&](const std::string& dir, int count, Label label, bool abnormal) {
    for (int i = 0; i < count; ++i) {
      std::optional<AnomalyKind> kind;
      if (abnormal) kind = config.anomaly_kinds[static_cast<std::size_t>(i) % config.anomaly_kinds.size()];
      SyntheticImage img = renderer.render(label, kind);
      img.relative_path = dir + "/" + numbered(i, kind ? "_" + to_string(*kind) : std::string());
      img.image.source_path = img.relative_path;
      out.push_back(std::move(img));
    }
  };
  emit("train/normal", config.train, Label::normal, false);
  emit("val/normal", config.validation, Label::normal, false);
  emit("test/normal", config.test_normal, Label::normal, false);
  emit("test/abnormal", config.test_abnormal, Label::abnormal, true);
  std::stable_sort(out.begin(), out.end(), [](const SyntheticImage& a, const SyntheticImage& b) { return a.relative_path < b.relative_path; });
  return out;
}

DatasetSplit generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  DatasetSplit split;
  for (const auto& img : generate_synthetic_images(config, seed)) {
    ImageSample s = preprocess(img.image, img.relative_path, img.label);
    const std::string& p = img.relative_path;
    if (p.rfind("train/", 0) == 0) {
      split.train.push_back(std::move(s));
    } else if (p.rfind("val/", 0) == 0) {
      split.validation.push_back(std::move(s));
    } else {
      split.test.push_back(std::move(s));
    }
  }
  return split;
}

void write_synthetic(const std::vector<SyntheticImage>& images, const fs::path& root) {
  for (const auto& img : images) {
    const fs::path file = root / img.relative_path;
    fs::create_directories(file.parent_path());
    cv::Mat bgr;
    cv::cvtColor(img.image.pixels, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(file.string(), bgr)) throw IoError("cannot write image: " + file.string());
  }
  // Empty splits still need their directories for load_split.
  for (const char* d : {"train/normal", "val/normal", "test/normal", "test/abnormal"}) fs::create_directories(root / d);
}

}  // namespace bvae
