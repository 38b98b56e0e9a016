#pragma once

#include <filesystem>
#include <stdexcept>

#include "ecc/trainer.hpp"

namespace ecc {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary container: magic "ECCDCKP\n", u32 format version, u64 JSON header
// length, JSON header (config, epoch, metrics, realized H, tensor manifest),
// then all tensor payloads as raw little-endian doubles. Round-trips are
// bit exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ecc
