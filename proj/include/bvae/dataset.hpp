#pragma once

#include "bvae/tensor.hpp"

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bvae {

enum class Label { normal, abnormal, unknown };

std::string to_string(Label label);
Label parse_label(const std::string& text);

inline constexpr int kImageSize = 64;
inline constexpr int kImageChannels = 3;

/// Decoded 8-bit RGB image.
struct RawImage {
  cv::Mat pixels;  // CV_8UC3, RGB channel order
  std::string source_path;
};

/// Preprocessed 3x64x64 image, channel-major, every element in [-1, 1].
struct ImageSample {
  std::string id;
  Label label = Label::unknown;
  Eigen::ArrayXf data;
};

struct DatasetSplit {
  std::vector<ImageSample> train;       // normal only
  std::vector<ImageSample> validation;  // normal only
  std::vector<ImageSample> test;        // labeled
};

/// Loads <root>/{train/normal, val/normal, test/normal, test/abnormal}.
/// Files are read in sorted path order; ids are paths relative to root.
/// Throws ConfigError for a missing directory and DataError (naming the
/// file) when an image cannot be decoded.
DatasetSplit load_split(const std::filesystem::path& root);

RawImage decode_image(const std::filesystem::path& file);

/// Centre square crop at the short side, bilinear resize to 64x64, then
/// v -> v / 127.5 - 1.
ImageSample preprocess(const RawImage& image, std::string id = {}, Label label = Label::unknown);

/// Mirrors the image along the width axis.
ImageSample flip_horizontal(const ImageSample& sample);

/// Flips with probability 1/2, drawing one value from the generator: values
/// in the upper half of the generator's range flip.
template <typename Rng>
ImageSample augment(const ImageSample& sample, Rng& rng) {
  using R = typename Rng::result_type;
  const R span = Rng::max() - Rng::min();
  const R draw = rng() - Rng::min();
  return draw > span / 2 ? flip_horizontal(sample) : sample;
}

/// Stacks samples[indices] into an (n, 3, 64, 64) batch.
Tensor<float> make_batch(const std::vector<ImageSample>& samples, const std::vector<std::size_t>& indices);
Tensor<float> make_batch(const std::vector<ImageSample>& samples);

/// Converts one tensor sample back to an 8-bit RGB image.
cv::Mat to_rgb8(const float* chw, int size = kImageSize);

// ---------------------------------------------------------------------------
// Synthetic "pad + blob" fixture

enum class AnomalyKind { missing_blob, extra_blob, bridged_blobs, shifted_blob };

std::string to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(const std::string& text);

struct SynthConfig {
  int train = 200;
  int validation = 50;
  int test_normal = 40;
  int test_abnormal = 40;
  std::vector<AnomalyKind> anomaly_kinds{AnomalyKind::missing_blob, AnomalyKind::extra_blob, AnomalyKind::bridged_blobs,
                                         AnomalyKind::shifted_blob};
  double noise = 6.0;  // Gaussian pixel noise sigma, 8-bit units
  int width = 88;
  int height = 72;

  void validate() const;
};

/// Geometry of one rendered fixture image, in raw pixel coordinates.
struct SynthLayout {
  cv::Point2d blob_centers[2];
  cv::Size2d blob_radii;
  cv::Rect body;
  cv::Vec3d background;
};

struct SyntheticImage {
  RawImage image;
  std::string relative_path;  // e.g. test/abnormal/00007_missing_blob.png
  Label label = Label::normal;
  std::optional<AnomalyKind> anomaly;
  SynthLayout layout;
};

/// Renders the fixture in load_split's directory order. Deterministic in (config, seed).
std::vector<SyntheticImage> generate_synthetic_images(const SynthConfig& config, std::uint64_t seed);

DatasetSplit generate_synthetic(const SynthConfig& config, std::uint64_t seed);

/// Writes the images as PNG files under root using their relative paths.
void write_synthetic(const std::vector<SyntheticImage>& images, const std::filesystem::path& root);

}  // namespace bvae
