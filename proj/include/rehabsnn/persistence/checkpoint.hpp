#pragma once

#include "rehabsnn/error.hpp"
#include "rehabsnn/sac/agent.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace rehabsnn::persistence {

inline constexpr int kCheckpointVersion = 1;

enum class CheckpointFault { kTruncated, kBadMagic, kVersion, kShape, kPayload, kVariant, kIo };

class CheckpointError : public DataError {
 public:
  CheckpointError(CheckpointFault fault, const std::string& what) : DataError(what), fault_(fault) {}
  CheckpointFault fault() const noexcept { return fault_; }

 private:
  CheckpointFault fault_;
};

struct CheckpointMeta {
  sac::Variant variant = sac::Variant::kHsac;
  std::string env_id;
  std::int64_t step = 0;
  std::string config_hash;
  // Inference cutoff chosen by temporal quantisation; 0 means the full training T.
  int cutoff = 0;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<sac::Actor> actor;
};

// Text header followed by every actor parameter as little-endian float32, in
// parameters() order. Written to a temporary file and renamed into place.
void save_checkpoint(const std::string& path, sac::Actor& actor, const CheckpointMeta& meta);

// With `expected`, a checkpoint of any other variant is rejected.
LoadedCheckpoint load_checkpoint(const std::string& path, std::optional<sac::Variant> expected = std::nullopt);

// Rounds every parameter to float32, matching what a save/load cycle stores.
void quantize_to_float32(math::Network& net);

}  // namespace rehabsnn::persistence
