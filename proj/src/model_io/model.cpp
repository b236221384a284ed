#include "safeai/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "safeai/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are stored as host-order little-endian bytes");

namespace safeai {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "IoError";
        case ErrorKind::Parse: return "ParseError";
        case ErrorKind::UnsupportedFeature: return "UnsupportedFeature";
        case ErrorKind::InvalidGraph: return "InvalidGraph";
        case ErrorKind::InvalidModel: return "InvalidModel";
        case ErrorKind::ModeMismatch: return "ModeMismatch";
        case ErrorKind::InvalidStage: return "InvalidStage";
        case ErrorKind::SpecParse: return "SpecParseError";
        case ErrorKind::SpecSchema: return "SpecSchemaError";
        case ErrorKind::UnresolvedSelector: return "UnresolvedSelector";
        case ErrorKind::CyclicCut: return "CyclicCut";
        case ErrorKind::UnknownBoundaryShape: return "UnknownBoundaryShape";
        case ErrorKind::EmptyPartition: return "EmptyPartition";
        case ErrorKind::NotStamped: return "NotStamped";
        case ErrorKind::NotAConv: return "NotAConv";
        case ErrorKind::WeightNotInitializer: return "WeightNotInitializer";
        case ErrorKind::ChannelRange: return "ChannelRangeError";
        case ErrorKind::KernelTooSmall: return "KernelTooSmall";
        case ErrorKind::BoundaryMismatch: return "BoundaryMismatch";
        case ErrorKind::DanglingSafetyNode: return "DanglingSafetyNode";
        case ErrorKind::InterfaceMismatch: return "InterfaceMismatch";
        case ErrorKind::ManifestDigestMismatch: return "ManifestDigestMismatch";
        case ErrorKind::MissingInput: return "MissingInput";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::UnsupportedOp: return "UnsupportedOp";
        case ErrorKind::NonFiniteResult: return "NonFiniteResult";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NoShape: return "NoShape";
        case ErrorKind::DegenerateShape: return "DegenerateShape";
        case ErrorKind::BadWordLength: return "BadWordLength";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
    }
    return "Error";
}

std::string_view to_string(DataType dtype) {
    switch (dtype) {
        case DataType::Float32: return "float32";
        case DataType::Uint8: return "uint8";
        case DataType::Int32: return "int32";
        case DataType::Int64: return "int64";
        case DataType::Bool: return "bool";
        case DataType::Float64: return "float64";
    }
    return "undefined";
}

std::optional<DataType> data_type_from_onnx(std::int32_t code) {
    switch (code) {
        case 1: return DataType::Float32;
        case 2: return DataType::Uint8;
        case 6: return DataType::Int32;
        case 7: return DataType::Int64;
        case 9: return DataType::Bool;
        case 11: return DataType::Float64;
        default: return std::nullopt;
    }
}

std::optional<DataType> data_type_from_string(std::string_view name) {
    for (auto dt : {DataType::Float32, DataType::Uint8, DataType::Int32, DataType::Int64,
                    DataType::Bool, DataType::Float64}) {
        if (to_string(dt) == name) return dt;
    }
    return std::nullopt;
}

std::size_t element_size(DataType dtype) {
    switch (dtype) {
        case DataType::Uint8:
        case DataType::Bool: return 1;
        case DataType::Float32:
        case DataType::Int32: return 4;
        case DataType::Int64:
        case DataType::Float64: return 8;
    }
    return 0;
}

TensorShape make_shape(std::span<const std::int64_t> extents) {
    return TensorShape(extents.begin(), extents.end());
}

std::optional<std::vector<std::int64_t>> concrete_extents(const TensorShape& shape) {
    std::vector<std::int64_t> out;
    out.reserve(shape.size());
    for (const auto& d : shape) {
        if (d.is_symbolic()) return std::nullopt;
        out.push_back(d.extent());
    }
    return out;
}

std::string shape_to_string(const TensorShape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += shape[i].is_symbolic() ? "?" + shape[i].symbol() : std::to_string(shape[i].extent());
    }
    return s + "]";
}

// ---------------------------------------------------------------------------
// TensorData

std::size_t TensorData::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

std::vector<float> TensorData::floats() const {
    if (dtype != DataType::Float32) {
        throw Error(ErrorKind::UnsupportedFeature,
                    "tensor '" + name + "' is " + std::string(to_string(dtype)) + ", not float32");
    }
    std::vector<float> out(raw.size() / sizeof(float));
    std::memcpy(out.data(), raw.data(), out.size() * sizeof(float));
    return out;
}

std::vector<std::int64_t> TensorData::int64s() const {
    if (dtype != DataType::Int64) {
        throw Error(ErrorKind::UnsupportedFeature,
                    "tensor '" + name + "' is " + std::string(to_string(dtype)) + ", not int64");
    }
    std::vector<std::int64_t> out(raw.size() / sizeof(std::int64_t));
    std::memcpy(out.data(), raw.data(), out.size() * sizeof(std::int64_t));
    return out;
}

void TensorData::set_floats(std::span<const float> values) {
    dtype = DataType::Float32;
    raw.resize(values.size_bytes());
    std::memcpy(raw.data(), values.data(), values.size_bytes());
}

TensorData TensorData::from_floats(std::string name, std::vector<std::int64_t> dims,
                                   std::span<const float> values) {
    TensorData t;
    t.name = std::move(name);
    t.dims = std::move(dims);
    t.set_floats(values);
    return t;
}

TensorData TensorData::from_int64s(std::string name, std::vector<std::int64_t> dims,
                                   std::span<const std::int64_t> values) {
    TensorData t;
    t.name = std::move(name);
    t.dtype = DataType::Int64;
    t.dims = std::move(dims);
    t.raw.resize(values.size_bytes());
    std::memcpy(t.raw.data(), values.data(), values.size_bytes());
    return t;
}

// ---------------------------------------------------------------------------
// Node / Graph / Model accessors

const Attribute* Node::find_attribute(std::string_view attr_name) const {
    for (const auto& a : attributes)
        if (a.name == attr_name) return &a;
    return nullptr;
}

std::int64_t Node::int_attribute(std::string_view attr_name, std::int64_t fallback) const {
    const auto* a = find_attribute(attr_name);
    if (!a) return fallback;
    if (const auto* v = std::get_if<std::int64_t>(&a->value)) return *v;
    throw Error(ErrorKind::InvalidModel,
                "attribute '" + std::string(attr_name) + "' of node '" + name + "' is not an int");
}

std::vector<std::int64_t> Node::ints_attribute(std::string_view attr_name,
                                               std::vector<std::int64_t> fallback) const {
    const auto* a = find_attribute(attr_name);
    if (!a) return fallback;
    if (const auto* v = std::get_if<std::vector<std::int64_t>>(&a->value)) return *v;
    throw Error(ErrorKind::InvalidModel,
                "attribute '" + std::string(attr_name) + "' of node '" + name + "' is not an int list");
}

float Node::float_attribute(std::string_view attr_name, float fallback) const {
    const auto* a = find_attribute(attr_name);
    if (!a) return fallback;
    if (const auto* v = std::get_if<float>(&a->value)) return *v;
    throw Error(ErrorKind::InvalidModel,
                "attribute '" + std::string(attr_name) + "' of node '" + name + "' is not a float");
}

const Initializer* Graph::find_initializer(std::string_view tensor) const {
    for (const auto& i : initializers)
        if (i.name == tensor) return &i;
    return nullptr;
}

Initializer* Graph::find_initializer(std::string_view tensor) {
    for (auto& i : initializers)
        if (i.name == tensor) return &i;
    return nullptr;
}

const ValueInfo* Graph::find_value_info(std::string_view tensor) const {
    for (const auto* list : {&inputs, &outputs, &value_infos})
        for (const auto& vi : *list)
            if (vi.name == tensor) return &vi;
    return nullptr;
}

std::optional<std::string> Model::metadata(std::string_view key) const {
    for (const auto& [k, v] : metadata_props)
        if (k == key) return v;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Invariants

namespace {

[[noreturn]] void invalid_graph(const std::string& msg) { throw Error(ErrorKind::InvalidGraph, msg); }
[[noreturn]] void invalid_model(const std::string& msg) { throw Error(ErrorKind::InvalidModel, msg); }

std::string node_label(const Node& n, std::size_t index) {
    return "node #" + std::to_string(index) + " (" + n.op_type +
           (n.name.empty() ? "" : " '" + n.name + "'") + ")";
}

void check_tensor_payload(const TensorData& t, const std::string& where) {
    for (auto d : t.dims)
        if (d < 0) invalid_model(where + ": negative extent in '" + t.name + "'");
    if (t.raw.size() != t.element_count() * element_size(t.dtype)) {
        invalid_model(where + ": tensor '" + t.name + "' holds " + std::to_string(t.raw.size()) +
                      " bytes, shape requires " +
                      std::to_string(t.element_count() * element_size(t.dtype)));
    }
}

void check_value_info(const ValueInfo& vi, const std::string& where) {
    if (vi.name.empty()) invalid_model(where + ": value info with empty name");
    if (vi.shape) {
        for (const auto& d : *vi.shape)
            if (!d.is_symbolic() && d.extent() < 0)
                invalid_model(where + ": negative extent for '" + vi.name + "'");
    }
}

}  // namespace

std::vector<std::size_t> topological_order(const Graph& graph) {
    const auto& nodes = graph.nodes;
    std::unordered_map<std::string, std::size_t> producer;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (const auto& out : nodes[i].outputs) producer.emplace(out, i);

    std::vector<std::size_t> indegree(nodes.size(), 0);
    std::vector<std::vector<std::size_t>> consumers(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (const auto& in : nodes[i].inputs) {
            auto it = producer.find(in);
            if (in.empty() || it == producer.end()) continue;
            consumers[it->second].push_back(i);
            ++indegree[i];
        }
    }

    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (indegree[i] == 0) ready.push(i);

    std::vector<std::size_t> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
        auto i = ready.top();
        ready.pop();
        order.push_back(i);
        for (auto c : consumers[i])
            if (--indegree[c] == 0) ready.push(c);
    }
    if (order.size() != nodes.size()) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (indegree[i] != 0) invalid_graph("cycle through " + node_label(nodes[i], i));
        }
    }
    return order;
}

void validate_model(const Model& model) {
    std::set<std::string> keys;
    for (const auto& [k, v] : model.metadata_props) {
        if (!keys.insert(k).second) invalid_model("duplicate metadata key '" + k + "'");
    }
    for (const auto& [domain, version] : model.opset_imports) {
        if ((domain.empty() || domain == "ai.onnx") && version < kMinDefaultOpset) {
            throw Error(ErrorKind::UnsupportedFeature,
                        "default opset " + std::to_string(version) + " is older than " +
                            std::to_string(kMinDefaultOpset));
        }
    }

    const Graph& g = model.graph;
    std::unordered_map<std::string, std::string> producer;  // tensor -> description
    auto claim = [&](const std::string& tensor, const std::string& who) {
        if (tensor.empty()) invalid_graph(who + " produces a tensor with an empty name");
        auto [it, inserted] = producer.emplace(tensor, who);
        if (!inserted) {
            invalid_graph("tensor '" + tensor + "' has two producers: " + it->second + " and " + who);
        }
    };

    for (const auto& vi : g.inputs) {
        check_value_info(vi, "graph input");
        claim(vi.name, "graph input");
    }
    for (const auto& init : g.initializers) {
        check_tensor_payload(init, "initializer");
        claim(init.name, "initializer");
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        auto label = node_label(n, i);
        if (n.op_type.empty()) invalid_model(label + " has an empty op_type");
        if (n.outputs.empty()) invalid_model(label + " has no outputs");
        std::set<std::string> attr_names;
        for (const auto& a : n.attributes) {
            if (a.name.empty()) invalid_model(label + " has an unnamed attribute");
            if (!attr_names.insert(a.name).second)
                invalid_model(label + " repeats attribute '" + a.name + "'");
            if (const auto* t = std::get_if<TensorData>(&a.value)) check_tensor_payload(*t, label);
        }
        for (const auto& out : n.outputs) claim(out, label);
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (const auto& in : g.nodes[i].inputs) {
            if (!in.empty() && !producer.contains(in)) {
                invalid_graph("input '" + in + "' of " + node_label(g.nodes[i], i) +
                              " has no producer");
            }
        }
    }
    for (const auto& vi : g.outputs) {
        check_value_info(vi, "graph output");
        if (!producer.contains(vi.name)) invalid_graph("graph output '" + vi.name + "' has no producer");
    }
    for (const auto& vi : g.value_infos) check_value_info(vi, "value_info");

    (void)topological_order(g);
}

}  // namespace safeai
