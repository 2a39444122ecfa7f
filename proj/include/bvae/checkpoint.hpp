#pragma once

#include "bvae/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace bvae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class VersionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes <file> (binary: architecture, settings, parameters, batch-norm
/// buffers, gradient averages) and <file>.meta (key=value summary).
void save_checkpoint(TrainedModel& trained, const std::filesystem::path& file);
void save_checkpoint(Network& model, const GradientState& gradients, const TrainingConfig& config, const std::string& fingerprint,
                     int best_epoch, std::int64_t iterations, const std::filesystem::path& file);

/// Throws VersionMismatch when either file carries a different format
/// version or the two disagree, DataError for a damaged file.
TrainedModel load_checkpoint(const std::filesystem::path& file);

}  // namespace bvae
