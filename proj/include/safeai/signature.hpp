#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safeai/model.hpp"

namespace safeai {

enum class SignatureMode { Structural, StrictNames };

std::string_view to_string(SignatureMode mode);

inline constexpr std::size_t kAbsentTensor = std::numeric_limits<std::size_t>::max();

struct CanonicalNode {
    std::size_t canonical_id = 0;
    std::string op_type;
    std::string domain;
    std::vector<Attribute> attributes;  // sorted by name
    std::vector<std::size_t> inputs;    // canonical tensor ids, kAbsentTensor for "" slots
    std::vector<std::size_t> outputs;
    std::string name;                   // recorded always, compared only in StrictNames
    std::size_t original_index = 0;     // position in Graph::nodes
};

struct InterfaceEntry {
    std::size_t tensor = 0;
    DataType dtype = DataType::Float32;
    std::optional<TensorShape> shape;
    std::string name;
};

struct InitializerSlot {
    DataType dtype = DataType::Float32;
    std::vector<std::int64_t> dims;
    std::string name;
    std::string value_digest;  // excluded from the canonical text
};

struct ArchitectureSignature {
    SignatureMode mode = SignatureMode::Structural;
    std::map<std::string, std::int64_t> opset_imports;
    std::vector<InterfaceEntry> inputs;
    std::vector<InterfaceEntry> outputs;
    std::vector<CanonicalNode> nodes;
    std::map<std::size_t, InitializerSlot> initializer_slots;
    std::vector<std::string> tensor_names;  // canonical id -> original name
    std::string canonical_text;
    std::string digest;  // lowercase hex SHA-256 of canonical_text

    bool is_initializer(std::size_t tensor) const { return initializer_slots.contains(tensor); }
    // "node[3]:Conv"
    std::string node_location(std::size_t canonical_index) const;
};

ArchitectureSignature extract_signature(const Model& model,
                                        SignatureMode mode = SignatureMode::Structural);

enum class DiffKind {
    NodeMissing,
    NodeAdded,
    OpTypeMismatch,
    AttributeMismatch,
    EdgeMismatch,
    InterfaceMismatch,
    InitializerShapeMismatch,
    OpsetMismatch,
};

std::string_view to_string(DiffKind kind);

struct DiffEntry {
    DiffKind kind;
    std::string location;
    std::string reference_value;
    std::string candidate_value;
};

struct DiffReport {
    std::vector<DiffEntry> entries;
    std::vector<std::string> weight_changes;  // informational

    bool architectures_equal() const { return entries.empty(); }
};

DiffReport diff_signatures(const ArchitectureSignature& reference,
                           const ArchitectureSignature& candidate);

std::string render_architecture_report(const ArchitectureSignature& sig);

std::string sha256_hex(std::string_view data);

}  // namespace safeai
