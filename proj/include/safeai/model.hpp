#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace safeai {

// ONNX TensorProto.DataType values for the accepted subset.
enum class DataType : std::int32_t {
    Float32 = 1,
    Uint8 = 2,
    Int32 = 6,
    Int64 = 7,
    Bool = 9,
    Float64 = 11,
};

std::string_view to_string(DataType dtype);
std::optional<DataType> data_type_from_onnx(std::int32_t code);
std::optional<DataType> data_type_from_string(std::string_view name);
std::size_t element_size(DataType dtype);

// A dimension is either a concrete extent or a symbolic name (dim_param).
struct Dim {
    std::variant<std::int64_t, std::string> value;

    Dim() : value(std::int64_t{0}) {}
    Dim(std::int64_t extent) : value(extent) {}  // NOLINT(google-explicit-constructor)
    Dim(std::string symbol) : value(std::move(symbol)) {}  // NOLINT(google-explicit-constructor)

    bool is_symbolic() const { return std::holds_alternative<std::string>(value); }
    std::int64_t extent() const { return std::get<std::int64_t>(value); }
    const std::string& symbol() const { return std::get<std::string>(value); }

    friend bool operator==(const Dim&, const Dim&) = default;
};

using TensorShape = std::vector<Dim>;

TensorShape make_shape(std::span<const std::int64_t> extents);
std::optional<std::vector<std::int64_t>> concrete_extents(const TensorShape& shape);
std::string shape_to_string(const TensorShape& shape);

struct ValueInfo {
    std::string name;
    DataType dtype = DataType::Float32;
    std::optional<TensorShape> shape;

    friend bool operator==(const ValueInfo&, const ValueInfo&) = default;
};

// Constant tensor payload: initializers and tensor-valued attributes. Values
// are kept as little-endian row-major bytes regardless of how the file encoded
// them, so comparison and hashing are encoding-independent.
struct TensorData {
    std::string name;
    DataType dtype = DataType::Float32;
    std::vector<std::int64_t> dims;
    std::vector<std::uint8_t> raw;

    std::size_t element_count() const;
    std::vector<float> floats() const;
    std::vector<std::int64_t> int64s() const;
    void set_floats(std::span<const float> values);

    static TensorData from_floats(std::string name, std::vector<std::int64_t> dims,
                                  std::span<const float> values);
    static TensorData from_int64s(std::string name, std::vector<std::int64_t> dims,
                                  std::span<const std::int64_t> values);

    friend bool operator==(const TensorData&, const TensorData&) = default;
};

using Initializer = TensorData;

enum class AttributeKind { Int, Ints, Float, Floats, String, Tensor };

struct Attribute {
    using Value = std::variant<std::int64_t, std::vector<std::int64_t>, float, std::vector<float>,
                               std::string, TensorData>;

    std::string name;
    Value value;

    AttributeKind kind() const { return static_cast<AttributeKind>(value.index()); }

    friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct Node {
    std::string name;
    std::string op_type;
    std::string domain;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<Attribute> attributes;
    std::string doc_string;

    const Attribute* find_attribute(std::string_view attr_name) const;
    std::int64_t int_attribute(std::string_view attr_name, std::int64_t fallback) const;
    std::vector<std::int64_t> ints_attribute(std::string_view attr_name,
                                             std::vector<std::int64_t> fallback) const;
    float float_attribute(std::string_view attr_name, float fallback) const;

    friend bool operator==(const Node&, const Node&) = default;
};

struct Graph {
    std::string name;
    std::vector<ValueInfo> inputs;
    std::vector<ValueInfo> outputs;
    std::vector<Initializer> initializers;
    std::vector<Node> nodes;
    std::vector<ValueInfo> value_infos;

    const Initializer* find_initializer(std::string_view tensor) const;
    Initializer* find_initializer(std::string_view tensor);
    // Looks through inputs, outputs and value_infos, in that order.
    const ValueInfo* find_value_info(std::string_view tensor) const;

    friend bool operator==(const Graph&, const Graph&) = default;
};

using MetadataProps = std::vector<std::pair<std::string, std::string>>;

struct Model {
    std::int64_t ir_version = 8;
    std::map<std::string, std::int64_t> opset_imports;
    std::string producer_name;
    MetadataProps metadata_props;
    Graph graph;

    std::optional<std::string> metadata(std::string_view key) const;

    friend bool operator==(const Model&, const Model&) = default;
};

// Minimum accepted version of the default ("" / "ai.onnx") opset.
inline constexpr std::int64_t kMinDefaultOpset = 13;

// Checks every structural invariant of the IR; throws Error(InvalidGraph) or
// Error(InvalidModel) on the first violation.
void validate_model(const Model& model);

// Node indices in an order where every producer precedes its consumers
// (Kahn's algorithm, ties by original position). Throws InvalidGraph on cycles.
std::vector<std::size_t> topological_order(const Graph& graph);

}  // namespace safeai
