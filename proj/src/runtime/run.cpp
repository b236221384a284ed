#include <bit>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

#include "safeai/error.hpp"
#include "safeai/runtime.hpp"
#include "safeai/signature.hpp"

namespace safeai {

namespace {

const std::map<std::string, std::set<std::string>, std::less<>>& supported_ops() {
    static const std::map<std::string, std::set<std::string>, std::less<>> ops = {
        {"Conv", {"kernel_shape", "strides", "pads", "dilations", "group", "auto_pad"}},
        {"MaxPool", {"kernel_shape", "strides", "pads", "dilations", "ceil_mode", "storage_order", "auto_pad"}},
        {"Gemm", {"alpha", "beta", "transA", "transB"}},
        {"Relu", {}},
        {"Abs", {}},
        {"Add", {}},
        {"Sub", {}},
        {"Flatten", {"axis"}},
        {"Softmax", {"axis"}},
        {"ReduceMax", {"axes", "keepdims"}},
        {"Reshape", {"allowzero"}},
    };
    return ops;
}

[[noreturn]] void unsupported(const Node& n, const std::string& why) {
    throw Error(ErrorKind::UnsupportedOp, "node \"" + runtime_label(n) + "\" (" + n.op_type + "): " + why);
}

void require_all(const Node& n, const char* attr, std::int64_t value) {
    for (auto v : n.ints_attribute(attr, {}))
        if (v != value) unsupported(n, std::string(attr) + " other than " + std::to_string(value));
}

void require_no_auto_pad(const Node& n) {
    if (const auto* a = n.find_attribute("auto_pad")) {
        const auto* s = std::get_if<std::string>(&a->value);
        if (!s || *s != "NOTSET") unsupported(n, "auto_pad (pads must be explicit)");
    }
}

template <std::size_t N>
std::array<std::int64_t, N> ints_n(const Node& n, const char* attr, std::array<std::int64_t, N> fallback) {
    auto v = n.ints_attribute(attr, {});
    if (v.empty()) return fallback;
    if (v.size() != N) throw Error(ErrorKind::ShapeMismatch, std::string(attr) + " of \"" + runtime_label(n) + "\" needs " + std::to_string(N) + " entries");
    std::array<std::int64_t, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

bool all_finite(const Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor from_initializer(const Initializer& init) { return Tensor(init.dims, init.floats()); }

class Interpreter {
public:
    explicit Interpreter(const Model& model) : model_(model) {
        for (const auto& init : model.graph.initializers) {
            if (init.dtype == DataType::Float32) env_.emplace(init.name, from_initializer(init));
            else int64s_.emplace(init.name, init.int64s());
        }
    }

    std::unordered_map<std::string, Tensor>& env() { return env_; }

    Tensor eval(const Node& n) const {
        const auto& op = n.op_type;
        if (op == "Conv") {
            const auto& w = in(n, 1);
            if (auto k = n.ints_attribute("kernel_shape", {}); !k.empty() && (w.rank() != 4 || k != std::vector<std::int64_t>{w.shape[2], w.shape[3]}))
                throw Error(ErrorKind::ShapeMismatch, "kernel_shape of \"" + runtime_label(n) + "\" disagrees with its weight");
            ConvParams p{ints_n<2>(n, "strides", {1, 1}), ints_n<4>(n, "pads", {0, 0, 0, 0})};
            return conv2d(in(n, 0), w, opt(n, 2), p);
        }
        if (op == "MaxPool") {
            PoolParams p{ints_n<2>(n, "kernel_shape", {0, 0}), ints_n<2>(n, "strides", {1, 1}),
                         ints_n<4>(n, "pads", {0, 0, 0, 0})};
            return maxpool2d(in(n, 0), p);
        }
        if (op == "Gemm") {
            GemmParams p{n.float_attribute("alpha", 1.0f), n.float_attribute("beta", 1.0f),
                         n.int_attribute("transA", 0) != 0, n.int_attribute("transB", 0) != 0};
            return gemm(in(n, 0), in(n, 1), opt(n, 2), p);
        }
        if (op == "Relu") return relu(in(n, 0));
        if (op == "Abs") return abs(in(n, 0));
        if (op == "Add") return add(in(n, 0), in(n, 1));
        if (op == "Sub") return sub(in(n, 0), in(n, 1));
        if (op == "Flatten") return flatten(in(n, 0), n.int_attribute("axis", 1));
        if (op == "Softmax") return softmax(in(n, 0), n.int_attribute("axis", -1));
        if (op == "ReduceMax") return reduce_max(in(n, 0), n.ints_attribute("axes", {}), n.int_attribute("keepdims", 1) != 0);
        if (op == "Reshape") return reshape(in(n, 0), int64s_.at(n.inputs.at(1)));
        unsupported(n, "operator not in the runtime set");
    }

private:
    const Tensor& in(const Node& n, std::size_t slot) const {
        if (slot >= n.inputs.size() || n.inputs[slot].empty())
            throw Error(ErrorKind::ShapeMismatch, "node \"" + runtime_label(n) + "\" lacks input " + std::to_string(slot));
        auto it = env_.find(n.inputs[slot]);
        if (it == env_.end())
            throw Error(ErrorKind::MissingInput, "tensor \"" + n.inputs[slot] + "\" has no value");
        return it->second;
    }

    const Tensor* opt(const Node& n, std::size_t slot) const {
        if (slot >= n.inputs.size() || n.inputs[slot].empty()) return nullptr;
        return &in(n, slot);
    }

    const Model& model_;
    std::unordered_map<std::string, Tensor> env_;
    std::unordered_map<std::string, std::vector<std::int64_t>> int64s_;
};

}  // namespace

std::string runtime_label(const Node& node) { return node.name.empty() ? node.outputs.at(0) : node.name; }

Fault parse_fault(std::string_view text) {
    // The node label may itself contain ':'; the last three fields are numeric.
    std::vector<std::string_view> parts;
    auto rest = text;
    for (int k = 0; k < 3; ++k) {
        auto pos = rest.rfind(':');
        if (pos == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, "fault \"" + std::string(text) + "\" is not node:replica:element:bit");
        parts.insert(parts.begin(), rest.substr(pos + 1));
        rest = rest.substr(0, pos);
    }
    if (rest.empty()) throw Error(ErrorKind::InvalidArgument, "fault has an empty node name");
    auto number = [&](std::string_view s, const char* what) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty())
            throw Error(ErrorKind::InvalidArgument, std::string("fault ") + what + " \"" + std::string(s) + "\" is not a number");
        return v;
    };
    Fault f;
    f.node = std::string(rest);
    f.replica = static_cast<int>(number(parts[0], "replica"));
    f.element = static_cast<std::size_t>(number(parts[1], "element"));
    f.bit = static_cast<int>(std::min<std::uint64_t>(number(parts[2], "bit"), 1000));
    if (f.replica != 1 && f.replica != 2) throw Error(ErrorKind::InvalidArgument, "fault replica must be 1 or 2");
    if (f.bit < 0 || f.bit > 31) throw Error(ErrorKind::InvalidArgument, "fault bit must be in 0..31");
    return f;
}

void check_supported(const Model& model) {
    const auto& g = model.graph;
    for (const auto& vi : g.inputs)
        if (vi.dtype != DataType::Float32 && !g.find_initializer(vi.name))
            throw Error(ErrorKind::UnsupportedOp, "graph input \"" + vi.name + "\" is " + std::string(to_string(vi.dtype)) + "; only float32 executes");
    std::set<std::string> shape_inputs;
    for (const auto& n : g.nodes) {
        auto it = supported_ops().find(n.op_type);
        if (!n.domain.empty() || it == supported_ops().end()) unsupported(n, "operator not in the runtime set");
        for (const auto& a : n.attributes)
            if (!it->second.contains(a.name)) unsupported(n, "attribute \"" + a.name + "\"");
        if (n.outputs.size() != 1) unsupported(n, "more than one output");
        if (n.op_type == "Conv") {
            if (n.int_attribute("group", 1) != 1) unsupported(n, "grouped convolution");
            require_all(n, "dilations", 1);
            require_no_auto_pad(n);
        } else if (n.op_type == "MaxPool") {
            if (n.int_attribute("ceil_mode", 0) != 0) unsupported(n, "ceil_mode");
            if (n.int_attribute("storage_order", 0) != 0) unsupported(n, "storage_order");
            require_all(n, "dilations", 1);
            require_no_auto_pad(n);
            if (n.ints_attribute("kernel_shape", {}).size() != 2) unsupported(n, "kernel_shape must have 2 entries");
        } else if (n.op_type == "ReduceMax") {
            if (n.inputs.size() > 1) unsupported(n, "axes given as an input");
        } else if (n.op_type == "Reshape") {
            if (n.int_attribute("allowzero", 0) != 0) unsupported(n, "allowzero");
            const auto* shape = n.inputs.size() > 1 ? g.find_initializer(n.inputs[1]) : nullptr;
            if (!shape || shape->dtype != DataType::Int64) unsupported(n, "target shape must be an int64 initializer");
            shape_inputs.insert(shape->name);
        }
    }
    for (const auto& init : g.initializers)
        if (init.dtype != DataType::Float32 && !shape_inputs.contains(init.name))
            throw Error(ErrorKind::UnsupportedOp, "initializer \"" + init.name + "\" is " + std::string(to_string(init.dtype)) + "; only float32 executes");
}

RunOutcome run(const Model& model, const std::map<std::string, Tensor>& inputs, ExecutionMode mode, const FaultPlan& faults) {
    check_supported(model);
    const auto& g = model.graph;

    if (faults) {
        if (faults->replica != 1 && faults->replica != 2) throw Error(ErrorKind::InvalidArgument, "fault replica must be 1 or 2");
        if (faults->bit < 0 || faults->bit > 31) throw Error(ErrorKind::InvalidArgument, "fault bit must be in 0..31");
        if (faults->replica == 2 && mode == ExecutionMode::Single)
            throw Error(ErrorKind::InvalidArgument, "single mode has no replica 2");
        bool found = false;
        for (const auto& n : g.nodes) found |= runtime_label(n) == faults->node;
        if (!found) throw Error(ErrorKind::InvalidArgument, "fault names unknown node \"" + faults->node + "\"");
    }

    Interpreter interp(model);
    std::set<std::string> declared;
    for (const auto& vi : g.inputs) {
        if (g.find_initializer(vi.name)) continue;
        declared.insert(vi.name);
        auto it = inputs.find(vi.name);
        if (it == inputs.end()) throw Error(ErrorKind::MissingInput, "graph input \"" + vi.name + "\" was not supplied");
        const auto& t = it->second;
        if (vi.shape) {
            bool ok = vi.shape->size() == t.shape.size();
            for (std::size_t d = 0; ok && d < t.shape.size(); ++d)
                ok = (*vi.shape)[d].is_symbolic() || (*vi.shape)[d].extent() == t.shape[d];
            if (!ok)
                throw Error(ErrorKind::ShapeMismatch, "input \"" + vi.name + "\" expects " + shape_to_string(*vi.shape) + ", got " +
                                                          shape_to_string(make_shape(t.shape)));
        }
        interp.env().insert_or_assign(vi.name, t);
    }
    for (const auto& [name, t] : inputs)
        if (!declared.contains(name)) throw Error(ErrorKind::InvalidArgument, "\"" + name + "\" is not a graph input");

    RunOutcome out;
    for (const auto& cn : extract_signature(model).nodes) {
        const auto& n = g.nodes[cn.original_index];
        const auto label = runtime_label(n);
        Tensor first = interp.eval(n);
        std::optional<Tensor> second;
        if (mode == ExecutionMode::Redundant) second = interp.eval(n);

        if (faults && faults->node == label) {
            Tensor& victim = faults->replica == 1 ? first : *second;
            if (faults->element >= victim.size())
                throw Error(ErrorKind::InvalidArgument, "fault element " + std::to_string(faults->element) + " outside " +
                                                            std::to_string(victim.size()) + " values of \"" + label + "\"");
            auto bits = std::bit_cast<std::uint32_t>(victim.data[faults->element]);
            victim.data[faults->element] = std::bit_cast<float>(bits ^ (std::uint32_t{1} << faults->bit));
        }

        bool agree = !second || bitwise_equal(first, *second);
        out.node_qualifiers[label] = agree;
        out.qualifier = out.qualifier && agree;
        if (out.qualifier && !all_finite(first))
            throw Error(ErrorKind::NonFiniteResult, "node \"" + label + "\" produced NaN or Inf");
        interp.env().insert_or_assign(n.outputs[0], std::move(first));
    }

    for (const auto& vi : g.outputs) {
        auto it = interp.env().find(vi.name);
        if (it == interp.env().end()) throw Error(ErrorKind::MissingInput, "graph output \"" + vi.name + "\" was not computed");
        out.outputs.emplace(vi.name, it->second);
    }
    return out;
}

}  // namespace safeai
