#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "magcn/embeddings.hpp"
#include "magcn/model.hpp"
#include "magcn/params.hpp"

namespace magcn {

nlohmann::json config_to_json(const MagcnConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
MagcnConfig config_from_json(const nlohmann::json& j);

inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'G', 'C', 'N', 'C', 'K', 'P'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Layout (little endian):
///   magic[8] | version u8 | header_len u64 | header JSON (config + lexicon)
///   | record_count u64 | records
/// where each record is
///   name_len u32 | name | rank u32 | extents u64[rank] | values f64[numel].
struct Checkpoint {
  MagcnConfig config;
  Lexicon lexicon;
  std::vector<ParamRecord> params;
};

void save_checkpoint(const std::filesystem::path& path, const MagcnModel& model, const Lexicon& lexicon);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Rebuilds the model from the stored config and overwrites every parameter.
MagcnModel instantiate(const Checkpoint& checkpoint);

}  // namespace magcn
