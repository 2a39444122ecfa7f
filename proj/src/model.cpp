#include "bvae/model.hpp"

#include <set>
#include <stdexcept>

namespace bvae {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::beta_vae:
      return "beta_vae";
    case ModelKind::vae:
      return "vae";
    case ModelKind::cae:
      return "cae";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "beta_vae") return ModelKind::beta_vae;
  if (text == "vae") return ModelKind::vae;
  if (text == "cae") return ModelKind::cae;
  throw std::invalid_argument("unknown model kind '" + text + "' (expected beta_vae, vae or cae)");
}

namespace {

void check_stage_list(const std::vector<int>& stages, std::size_t count, const char* field) {
  std::set<int> seen;
  for (int s : stages) {
    if (s < 1 || s > static_cast<int>(count)) {
      throw std::invalid_argument(std::string(field) + ": stage index " + std::to_string(s) + " out of range 1.." +
                                  std::to_string(count));
    }
    if (!seen.insert(s).second) throw std::invalid_argument(std::string(field) + ": duplicate stage " + std::to_string(s));
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (input_channels < 1) throw std::invalid_argument("input_channels must be positive");
  if (encoder_filters.empty()) throw std::invalid_argument("encoder_filters must not be empty");
  if (decoder_filters.empty()) throw std::invalid_argument("decoder_filters must not be empty");
  for (std::size_t i = 0; i < encoder_filters.size(); ++i) {
    if (encoder_filters[i] < 1) throw std::invalid_argument("encoder_filters: entries must be positive");
    if (i > 0 && encoder_filters[i] < encoder_filters[i - 1]) {
      throw std::invalid_argument("encoder_filters: ladder must be non-decreasing");
    }
  }
  for (int f : decoder_filters) {
    if (f < 1) throw std::invalid_argument("decoder_filters: entries must be positive");
  }
  if (decoder_filters.back() != input_channels) {
    throw std::invalid_argument("decoder_filters: last stage must produce input_channels (" + std::to_string(input_channels) + ")");
  }
  check_stage_list(pool_after, encoder_filters.size(), "pool_after");
  check_stage_list(upsample_after, decoder_filters.size(), "upsample_after");
  if (pool_after.size() != upsample_after.size()) {
    throw std::invalid_argument("upsample_after: need as many upsampling stages as pooling stages");
  }
  if (input_size < 1 || input_size % (1 << pool_after.size()) != 0) {
    throw std::invalid_argument("input_size must be divisible by 2^(number of pools)");
  }
  if (bottleneck_channels < 1) throw std::invalid_argument("bottleneck_channels must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("leaky_slope must lie in [0,1)");
}

}  // namespace bvae
