#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "safeai/kernels.hpp"
#include "safeai/pnm.hpp"
#include "safeai/runtime.hpp"

namespace safeai {

// {"dtype":"float32","shape":[...],"data":[...]}. Throws Parse, or
// UnsupportedOp for any other dtype. A null datum reads back as NaN.
Tensor parse_tensor_json(std::string_view text);
std::string tensor_to_json(const Tensor& t);

// 1 x 1 x H x W, each pixel divided by 255.
Tensor image_to_tensor(const GrayImage& image);

// PGM/PBM when the file starts with a PNM magic, JSON otherwise.
Tensor read_tensor_file(const std::filesystem::path& path);

// {"qualifier":..,"node_qualifiers":{..},"outputs":{name: tensor}}
std::string run_outcome_json(const RunOutcome& outcome);

}  // namespace safeai
