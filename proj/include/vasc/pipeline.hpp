/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_PIPELINE_HPP
#define VASC_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vasc/config.hpp"

namespace vasc {

/// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t hash_file(const std::string& path);

struct StageRecord {
  std::string stage;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;   // artifact name, hash
  std::vector<std::pair<std::string, std::uint64_t>> outputs;
  double wall_seconds = 0.0;
};

// Random streams drawn from the top-level seed, one per stage.
inline constexpr std::uint64_t kStreamPhantom = 0;
inline constexpr std::uint64_t kStreamCenterline = 1;
inline constexpr std::uint64_t kStreamSampling = 2;
inline constexpr std::uint64_t kStreamGco = 3;
inline constexpr std::uint64_t kStreamNoise = 4;

/// Inlet flow actually used for `n` terminals.
HemoConfig effective_hemo(const PipelineConfig& config, std::size_t n_terminals);

/// Runs every stage, writing artifacts and `manifest.csv` into `config.out_dir`.
/// Throws StageError naming the failing stage.
std::vector<StageRecord> run_pipeline(const PipelineConfig& config);

void write_manifest(const std::vector<StageRecord>& records, const std::string& path);

}  // namespace vasc

#endif  // VASC_PIPELINE_HPP
