#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "safeai/model.hpp"

namespace safeai {

enum class Target { Reliable, NonReliable };

std::string_view to_string(Target target);

inline constexpr std::string_view kDefaultBoundaryPrefix = "safeai.boundary.";
inline constexpr std::string_view kRedundantSuffix = "__safeai_red";
inline constexpr std::string_view kAllocationMarker = "safeai.allocation=";
inline constexpr std::string_view kSafetyMarker = "safeai.safety_function=true";

struct SobelReplace {
    std::string conv_node;
    std::int64_t first_channel = 0;
    std::int64_t channel_count = 2;
    std::array<double, 3> luminance_weights{0.299, 0.587, 0.114};
};

struct RedundantNode {
    std::string node;
    double tolerance = 0.0;
};

struct ExposeTensor {
    std::string tensor;
};

using SafetyInsertion = std::variant<SobelReplace, RedundantNode, ExposeTensor>;

std::string_view insertion_kind(const SafetyInsertion& ins);

struct PartitionSpec {
    int version = 1;
    Target default_target = Target::NonReliable;
    std::vector<std::pair<std::string, Target>> assignments;
    std::vector<SafetyInsertion> safety_insertions;
    std::string boundary_prefix{kDefaultBoundaryPrefix};
};

// Closed-schema JSON. Throws SpecParse on syntax errors and SpecSchema on
// unknown keys, wrong types, bad enums, version != 1 or duplicate selectors.
PartitionSpec parse_spec(std::string_view text);
std::string spec_to_json(const PartitionSpec& spec);

struct Allocation {
    std::string location;  // canonical location in the source model, "node[2]:Relu"
    std::string name;
    std::string output;    // first output tensor; unique, so it identifies the node
    std::string op_type;
    Target target = Target::NonReliable;
};

// Always flows from the reliable file to the non-reliable one.
struct BoundaryTensor {
    std::string name;
    DataType dtype = DataType::Float32;
    TensorShape shape;
};

struct SafetyFunction {
    std::string kind;                // "sobel_replace" | "redundant_node" | "expose_tensor"
    std::string target;              // node or tensor the insertion applies to
    std::string location;            // canonical location of the target node, or "tensor:<name>"
    std::vector<std::string> nodes;  // nodes added to the reliable file
    std::string qualifier_output;    // redundant_node only
    double tolerance = 0.0;
};

struct ModifiedInitializer {
    std::string name;
    std::int64_t first_channel = 0;
    std::int64_t channel_count = 0;
};

struct PartitionManifest {
    int version = 1;
    std::string source_digest;  // structural signature digest of the source model
    std::vector<Allocation> allocations;
    std::vector<BoundaryTensor> boundary_tensors;
    std::vector<std::string> safety_nodes;
    std::vector<SafetyFunction> safety_functions;
    std::vector<std::string> exposed_tensors;
    std::vector<ModifiedInitializer> modified_initializers;
    std::vector<ValueInfo> original_inputs;
    std::vector<ValueInfo> original_outputs;
};

std::string manifest_to_json(const PartitionManifest& manifest);
// Throws Parse for malformed or schema-violating manifest text.
PartitionManifest parse_manifest(std::string_view text);

struct PartitionResult {
    Model reliable;
    Model nonreliable;
    PartitionManifest manifest;
};

struct PartitionOptions {
    bool force = false;  // accept a model without the validated-trained stamp
};

PartitionResult partition(const Model& model, const PartitionSpec& spec, const PartitionOptions& options = {});

// Writes luminance-scaled Sobel Gx/Gy kernels into output channels
// [first_channel, first_channel + channel_count) of the Conv weight and zeroes
// the matching bias entries. Channels alternate Gx, Gy, Gx, ...
Model apply_sobel_replacement(const Model& model, const SobelReplace& ins);

// Node doc_string helpers. Markers are whole lines of the doc string.
std::vector<std::string> doc_markers(std::string_view doc);
std::string strip_markers(std::string_view doc);

}  // namespace safeai
