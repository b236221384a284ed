#include "safeai/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "safeai/error.hpp"

namespace safeai {

namespace {

const std::set<std::string> kFixtureOps = {"Conv", "Relu",    "MaxPool", "Gemm",   "Flatten", "Add",
                                           "Sub",  "Abs",     "ReduceMax", "Softmax", "Reshape"};

std::int64_t product(std::span<const std::int64_t> dims, std::size_t from = 0,
                     std::size_t to = static_cast<std::size_t>(-1)) {
    std::int64_t p = 1;
    for (std::size_t i = from; i < std::min(to, dims.size()); ++i) p *= dims[i];
    return p;
}

std::int64_t normalize_axis(std::int64_t axis, std::size_t rank) {
    auto r = static_cast<std::int64_t>(rank);
    if (axis < 0) axis += r;
    if (axis < 0 || axis > r) throw Error(ErrorKind::InvalidArgument, "axis out of range");
    return axis;
}

class GraphBuilder {
public:
    GraphBuilder(std::uint64_t seed, std::string graph_name) : rng_(seed) {
        model_.ir_version = 8;
        model_.producer_name = "safeai-fixture";
        model_.opset_imports[""] = 13;
        model_.graph.name = std::move(graph_name);
    }

    std::string add_input(std::string name, std::vector<std::int64_t> dims) {
        model_.graph.inputs.push_back({name, DataType::Float32, make_shape(dims)});
        shapes_[name] = std::move(dims);
        return name;
    }

    const std::vector<std::int64_t>& shape_of(const std::string& tensor) const { return shapes_.at(tensor); }

    std::string layer(const LayerSpec& spec, const std::string& x) {
        const auto& op = spec.op_type;
        if (!kFixtureOps.contains(op)) {
            throw Error(ErrorKind::UnsupportedFeature, "fixture op '" + op + "' is not executable");
        }
        if (op == "Conv") return conv(x, spec.out_channels, spec.attributes);
        if (op == "MaxPool") return maxpool(x, spec.attributes);
        if (op == "Gemm") return gemm(x, spec.out_channels, spec.attributes);
        if (op == "Flatten") return flatten(x, spec.attributes);
        if (op == "Add" || op == "Sub") return binary_const(op, x);
        if (op == "ReduceMax") return reduce_max(x, spec.attributes);
        if (op == "Reshape") return reshape(x, spec.attributes);
        if (op == "Softmax") return emit(op, {x}, spec.attributes, shape_of(x));
        return emit(op, {x}, spec.attributes, shape_of(x));  // Relu, Abs
    }

    std::string conv(const std::string& x, std::int64_t out_c, std::vector<Attribute> attrs) {
        const auto& in = shape_of(x);
        if (in.size() != 4) throw Error(ErrorKind::InvalidArgument, "Conv fixture needs a rank-4 input");
        if (out_c <= 0) throw Error(ErrorKind::InvalidArgument, "Conv fixture needs out_channels > 0");
        Node probe;
        probe.attributes = attrs;
        auto k = probe.ints_attribute("kernel_shape", {});
        if (k.size() != 2) throw Error(ErrorKind::InvalidArgument, "Conv fixture needs kernel_shape [kh,kw]");
        auto s = probe.ints_attribute("strides", {1, 1});
        auto p = probe.ints_attribute("pads", {0, 0, 0, 0});
        auto oh = (in[2] + p[0] + p[2] - k[0]) / s[0] + 1;
        auto ow = (in[3] + p[1] + p[3] - k[1]) / s[1] + 1;
        auto name = next_name("conv");
        auto fan_in = in[1] * k[0] * k[1];
        auto w = add_weight(name + ".weight", {out_c, in[1], k[0], k[1]}, fan_in);
        auto b = add_weight(name + ".bias", {out_c}, fan_in);
        return emit_named(name, "Conv", {x, w, b}, std::move(attrs), {in[0], out_c, oh, ow});
    }

    std::string maxpool(const std::string& x, std::vector<Attribute> attrs) {
        const auto& in = shape_of(x);
        Node probe;
        probe.attributes = attrs;
        auto k = probe.ints_attribute("kernel_shape", {});
        if (k.size() != 2 || in.size() != 4) throw Error(ErrorKind::InvalidArgument, "MaxPool fixture needs 2-D kernel_shape");
        auto s = probe.ints_attribute("strides", {1, 1});
        auto p = probe.ints_attribute("pads", {0, 0, 0, 0});
        auto oh = (in[2] + p[0] + p[2] - k[0]) / s[0] + 1;
        auto ow = (in[3] + p[1] + p[3] - k[1]) / s[1] + 1;
        return emit("MaxPool", {x}, std::move(attrs), {in[0], in[1], oh, ow});
    }

    std::string flatten(const std::string& x, std::vector<Attribute> attrs) {
        const auto& in = shape_of(x);
        Node probe;
        probe.attributes = attrs;
        auto axis = normalize_axis(probe.int_attribute("axis", 1), in.size());
        auto a = static_cast<std::size_t>(axis);
        return emit("Flatten", {x}, std::move(attrs), {product(in, 0, a), product(in, a)});
    }

    std::string gemm(std::string x, std::int64_t out_features, std::vector<Attribute> attrs) {
        if (shape_of(x).size() != 2) x = flatten(x, {});
        const auto& in = shape_of(x);
        if (out_features <= 0) throw Error(ErrorKind::InvalidArgument, "Gemm fixture needs out_channels > 0");
        Node probe;
        probe.attributes = attrs;
        if (!probe.find_attribute("transB")) attrs.push_back(int_attr("transB", 1));
        probe.attributes = attrs;
        auto name = next_name("gemm");
        std::vector<std::int64_t> wdims = probe.int_attribute("transB", 0) ? std::vector<std::int64_t>{out_features, in[1]}
                                                                           : std::vector<std::int64_t>{in[1], out_features};
        auto w = add_weight(name + ".weight", wdims, in[1]);
        auto b = add_weight(name + ".bias", {out_features}, in[1]);
        return emit_named(name, "Gemm", {x, w, b}, std::move(attrs), {in[0], out_features});
    }

    std::string binary_const(const std::string& op, const std::string& x) {
        auto name = next_name(op == "Add" ? "add" : "sub");
        auto c = add_weight(name + ".const", shape_of(x), 4);
        return emit_named(name, op, {x, c}, {}, shape_of(x));
    }

    std::string binary(const std::string& op, const std::string& a, const std::string& b) {
        if (shape_of(a) != shape_of(b)) throw Error(ErrorKind::InvalidArgument, "binary fixture operands differ in shape");
        return emit(op, {a, b}, {}, shape_of(a));
    }

    std::string reduce_max(const std::string& x, std::vector<Attribute> attrs) {
        const auto& in = shape_of(x);
        Node probe;
        probe.attributes = attrs;
        auto axes = probe.ints_attribute("axes", {});
        bool keep = probe.int_attribute("keepdims", 1) != 0;
        std::set<std::int64_t> reduced;
        for (auto a : axes) reduced.insert(normalize_axis(a, in.size()));
        if (axes.empty())
            for (std::size_t i = 0; i < in.size(); ++i) reduced.insert(static_cast<std::int64_t>(i));
        std::vector<std::int64_t> out;
        for (std::size_t i = 0; i < in.size(); ++i) {
            if (reduced.contains(static_cast<std::int64_t>(i))) {
                if (keep) out.push_back(1);
            } else {
                out.push_back(in[i]);
            }
        }
        return emit("ReduceMax", {x}, std::move(attrs), out);
    }

    std::string reshape(const std::string& x, const std::vector<Attribute>& attrs) {
        Node probe;
        probe.attributes = attrs;
        auto target = probe.ints_attribute("shape", {});
        if (target.empty()) throw Error(ErrorKind::InvalidArgument, "Reshape fixture needs a 'shape' ints attribute");
        const auto& in = shape_of(x);
        std::vector<std::int64_t> out = target;
        std::int64_t known = 1;
        int infer = -1;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i] == 0) out[i] = in.at(i);
            if (out[i] == -1) infer = static_cast<int>(i);
            else known *= out[i];
        }
        if (infer >= 0) out[static_cast<std::size_t>(infer)] = product(in) / known;
        if (product(out) != product(in)) throw Error(ErrorKind::InvalidArgument, "Reshape fixture changes element count");
        auto name = next_name("reshape");
        auto shape_name = name + ".shape";
        model_.graph.initializers.push_back(
            TensorData::from_int64s(shape_name, {static_cast<std::int64_t>(target.size())}, target));
        return emit_named(name, "Reshape", {x, shape_name}, {}, out);
    }

    std::string emit(const std::string& op, std::vector<std::string> inputs, std::vector<Attribute> attrs,
                     std::vector<std::int64_t> out_shape) {
        std::string prefix = op;
        std::transform(prefix.begin(), prefix.end(), prefix.begin(), [](unsigned char c) { return std::tolower(c); });
        return emit_named(next_name(prefix), op, std::move(inputs), std::move(attrs), std::move(out_shape));
    }

    std::string emit_named(const std::string& name, const std::string& op, std::vector<std::string> inputs,
                           std::vector<Attribute> attrs, std::vector<std::int64_t> out_shape) {
        Node n;
        n.name = name;
        n.op_type = op;
        n.inputs = std::move(inputs);
        n.outputs = {name + "_out"};
        std::sort(attrs.begin(), attrs.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
        n.attributes = std::move(attrs);
        model_.graph.nodes.push_back(n);
        model_.graph.value_infos.push_back({n.outputs[0], DataType::Float32, make_shape(out_shape)});
        shapes_[n.outputs[0]] = std::move(out_shape);
        return n.outputs[0];
    }

    std::string add_weight(const std::string& name, std::vector<std::int64_t> dims, std::int64_t fan_in) {
        std::vector<float> values(static_cast<std::size_t>(product(dims)));
        float scale = 2.0f / std::sqrt(static_cast<float>(std::max<std::int64_t>(fan_in, 1)));
        // 24 high bits of the engine output mapped to [-0.5, 0.5); engine
        // sequences are fixed by the standard, distributions are not.
        for (auto& v : values) v = (static_cast<float>(rng_() >> 40) * 0x1p-24f - 0.5f) * scale;
        model_.graph.initializers.push_back(TensorData::from_floats(name, std::move(dims), values));
        return name;
    }

    // Marks `tensors` as graph outputs; the last one is renamed to `final_name`.
    Model finish(const std::vector<std::string>& tensors, const std::string& final_name) {
        auto& g = model_.graph;
        std::string last = tensors.back();
        for (auto& n : g.nodes)
            for (auto& out : n.outputs)
                if (out == last) out = final_name;
        for (auto& n : g.nodes)
            for (auto& in : n.inputs)
                if (in == last) in = final_name;
        std::erase_if(g.value_infos, [&](const ValueInfo& vi) { return vi.name == last; });
        for (const auto& t : tensors) {
            auto name = t == last ? final_name : t;
            g.outputs.push_back({name, DataType::Float32, make_shape(shapes_.at(t))});
            std::erase_if(g.value_infos, [&](const ValueInfo& vi) { return vi.name == name; });
        }
        validate_model(model_);
        return std::move(model_);
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::string next_name(const std::string& prefix) { return prefix + "_" + std::to_string(counter_++); }

    Model model_;
    std::mt19937_64 rng_;
    std::map<std::string, std::vector<std::int64_t>> shapes_;
    int counter_ = 0;
};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace

Model build_chain_fixture(const ChainSpec& spec, std::uint64_t seed) {
    if (spec.layers.empty()) throw Error(ErrorKind::InvalidArgument, "chain fixture needs at least one layer");
    for (const auto& l : spec.layers) {
        if (!kFixtureOps.contains(l.op_type)) {
            throw Error(ErrorKind::UnsupportedFeature, "fixture op '" + l.op_type + "' is not executable");
        }
    }
    GraphBuilder b(seed, "chain_fixture");
    auto x = b.add_input("input", spec.input_shape);
    for (const auto& l : spec.layers) x = b.layer(l, x);
    return b.finish({x}, "output");
}

Model build_dag_fixture(std::uint64_t seed, std::size_t max_nodes) {
    if (max_nodes < 3) throw Error(ErrorKind::InvalidArgument, "DAG fixture needs room for 3 nodes");
    GraphBuilder b(seed, "dag_fixture");
    auto& rng = b.rng();
    std::int64_t c = 2 + static_cast<std::int64_t>(pick(rng, 3));
    std::int64_t hw = 5 + static_cast<std::int64_t>(pick(rng, 4));
    auto x = b.add_input("input", {1, c, hw, hw});

    // Body tensors all share shape 1 x c x hw x hw so any pair can be combined.
    bool with_head = rng() % 2 == 0;
    std::size_t body = max_nodes - (with_head ? 2 : 0);
    body = 2 + pick(rng, body - 1);
    std::vector<std::string> tensors{x};
    std::set<std::string> consumed;
    auto choose = [&]() -> std::string {
        // Bias toward recent tensors so the graph stays deep rather than wide.
        auto n = tensors.size();
        auto i = n - 1 - std::min(pick(rng, n), pick(rng, n));
        consumed.insert(tensors[i]);
        return tensors[i];
    };

    tensors.push_back(b.conv(choose(), c, {ints_attr("kernel_shape", {3, 3}), ints_attr("pads", {1, 1, 1, 1})}));
    for (std::size_t i = 1; i < body; ++i) {
        std::string t;
        switch (pick(rng, 7)) {
            case 0:
                t = b.conv(choose(), c, {ints_attr("kernel_shape", {3, 3}), ints_attr("pads", {1, 1, 1, 1})});
                break;
            case 1: t = b.conv(choose(), c, {ints_attr("kernel_shape", {1, 1})}); break;
            case 2: t = b.emit("Relu", {choose()}, {}, b.shape_of(tensors.back())); break;
            case 3: t = b.emit("Abs", {choose()}, {}, b.shape_of(tensors.back())); break;
            case 4:
                t = b.maxpool(choose(), {ints_attr("kernel_shape", {3, 3}), ints_attr("pads", {1, 1, 1, 1})});
                break;
            default: {
                auto lhs = choose();
                auto rhs = choose();
                t = b.binary(rng() % 2 ? "Add" : "Sub", lhs, rhs);
                break;
            }
        }
        tensors.push_back(t);
    }
    auto last = tensors.back();
    if (with_head) {
        consumed.insert(last);
        last = b.gemm(last, 2 + static_cast<std::int64_t>(pick(rng, 6)), {});  // Flatten + Gemm
    }
    std::vector<std::string> outs;
    for (std::size_t i = 1; i + 1 < tensors.size(); ++i)
        if (!consumed.contains(tensors[i])) outs.push_back(tensors[i]);
    outs.push_back(last);
    return b.finish(outs, "output");
}

ChainSpec lenet_chain_spec() {
    ChainSpec s;
    s.input_shape = {1, 3, 32, 32};
    s.layers = {
        {"Conv", {ints_attr("kernel_shape", {5, 5})}, 6},
        {"Relu", {}, 0},
        {"MaxPool", {ints_attr("kernel_shape", {2, 2}), ints_attr("strides", {2, 2})}, 0},
        {"Conv", {ints_attr("kernel_shape", {5, 5})}, 16},
        {"Relu", {}, 0},
        {"MaxPool", {ints_attr("kernel_shape", {2, 2}), ints_attr("strides", {2, 2})}, 0},
        {"Flatten", {}, 0},
        {"Gemm", {}, 120},
        {"Relu", {}, 0},
        {"Gemm", {}, 84},
        {"Relu", {}, 0},
        {"Gemm", {}, 10},
        {"Softmax", {int_attr("axis", 1)}, 0},
    };
    return s;
}

}  // namespace safeai
