#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "kac/heads.hpp"

namespace kac {

/// Head checkpoints are single JSON documents: shape metadata, task blocks,
/// grid/knot parameters, and every parameter tensor hex-encoded as
/// little-endian 64-bit floats. Round-trips are bit-exact.
nlohmann::json checkpoint_to_json(const Head& head);
std::unique_ptr<Head> head_from_checkpoint(const nlohmann::json& doc);

void save_checkpoint(const Head& head, const std::string& path);
std::unique_ptr<Head> load_checkpoint(const std::string& path);

/// Little-endian hex codec for double arrays.
std::string encode_f64(std::span<const double> values);
std::vector<double> decode_f64(const std::string& hex);

}  // namespace kac
