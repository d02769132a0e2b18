#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "adaptvo/nn.hpp"
#include "adaptvo/policy.hpp"

namespace adaptvo {

inline constexpr int kCheckpointVersion = 1;

/// Policy snapshot plus what is needed to resume training.
struct Checkpoint {
  PolicyModel model;
  long long update_index = 0;  // updates already applied
  AdamState actor_opt;         // over flatten(actor) followed by log_std
  AdamState critic_opt;
  std::optional<FrontendParams> reference;  // static params the run was baselined against

  friend bool operator==(const Checkpoint&, const Checkpoint&);
};

/// Text container; every double is written with 17 significant digits so a
/// save/load round trip is exact. See the README for the layout.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stand-alone encoder weights ("adaptvo-encoder <version>", the same conv and
/// proj blocks as inside a checkpoint, then "end").
std::string serialize_encoder(const ConvEncoder& encoder);
ConvEncoder deserialize_encoder(const std::string& text);
void save_encoder(const std::filesystem::path& path, const ConvEncoder& encoder);
ConvEncoder load_encoder(const std::filesystem::path& path);

}  // namespace adaptvo
