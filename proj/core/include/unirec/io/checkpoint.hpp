#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unirec/io/config.hpp"
#include "unirec/train/pipeline.hpp"

UNIREC_NAMESPACE_BEGIN

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

/// On disk:
///   "UNIRECKP" | u32 version | u64 body length | body | u32 crc32
/// with the body holding a length-prefixed JSON metadata block and the
/// tensors (name, rank, dims, little-endian f32 values). All integers are
/// little-endian; the checksum covers every preceding byte.
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config_json;  // canonical RunConfig
    std::string stage;
    std::uint64_t schema_hash = 0;
    std::size_t n_slots = 0;
    NumericEncoderConfig numeric_config;
    NumericStats stats;
    /// Model parameters under their own names, the frozen numeric encoder
    /// under "frozen.numeric.*".
    std::vector<StoredTensor> tensors;

    const StoredTensor* find(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// DataError on bad magic, truncation, checksum failure or an unsupported
/// version.
Checkpoint parse_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint capture_checkpoint(const RunConfig& config, const UniRecModel& model, const FrozenEncoders& frozen,
                              std::uint64_t schema_hash, std::string stage);

/// ConfigError naming the first model or registry key that differs, or the
/// schema hash.
void check_compatible(const Checkpoint& ckpt, const RunConfig& config, std::uint64_t schema_hash);

/// Copies stored values into `params` (names with `prefix` prepended on the
/// checkpoint side). DataError on a missing tensor, ShapeError on a shape
/// mismatch.
void restore_tensors(const Checkpoint& ckpt, const NamedTensors& params, std::string_view prefix = "");

/// Frozen numeric encoder with the stored weights.
std::shared_ptr<NumericEncoder> restore_numeric_encoder(const Checkpoint& ckpt);

UNIREC_NAMESPACE_END
