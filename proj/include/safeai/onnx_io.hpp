#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "safeai/model.hpp"

namespace safeai {

// Decodes an ONNX ModelProto and validates it. Accepted subset: opset >= 13,
// the six DataType kinds, no subgraphs/control flow, no sparse or external
// tensors, no local functions.
Model parse_model(std::span<const std::uint8_t> bytes);

// Deterministic encoding: fields in ascending field-number order, tensor
// values always as raw_data.
std::string serialize_model(const Model& model);

Model load_model(const std::filesystem::path& path);
void save_model(const Model& model, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace safeai
