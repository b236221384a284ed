#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "safeai/error.hpp"
#include "safeai/partitioner.hpp"
#include "safeai/signature.hpp"
#include "safeai/train_validator.hpp"

namespace safeai {

std::vector<std::string> doc_markers(std::string_view doc) {
    std::vector<std::string> out;
    std::istringstream in{std::string(doc)};
    for (std::string line; std::getline(in, line);)
        if (line.starts_with("safeai.")) out.push_back(line);
    return out;
}

std::string strip_markers(std::string_view doc) {
    std::istringstream in{std::string(doc)};
    std::string out;
    for (std::string line; std::getline(in, line);) {
        if (line.starts_with("safeai.")) continue;
        if (!out.empty()) out += "\n";
        out += line;
    }
    return out;
}

namespace {

constexpr float kGx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr float kGy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

std::string with_markers(std::string_view doc, Target target, bool safety) {
    auto out = strip_markers(doc);
    if (!out.empty()) out += "\n";
    out += std::string(kAllocationMarker) + std::string(to_string(target));
    if (safety) out += "\n" + std::string(kSafetyMarker);
    return out;
}

// Node name first, then output tensor name.
std::size_t resolve(const Graph& g, const std::string& selector) {
    std::vector<std::size_t> by_name;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].name == selector) by_name.push_back(i);
    if (by_name.size() == 1) return by_name[0];
    if (by_name.size() > 1)
        throw Error(ErrorKind::UnresolvedSelector, "selector \"" + selector + "\" names several nodes");
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& outs = g.nodes[i].outputs;
        if (std::find(outs.begin(), outs.end(), selector) != outs.end()) return i;
    }
    throw Error(ErrorKind::UnresolvedSelector, "selector \"" + selector + "\" matches no node or tensor");
}

std::string node_label(const Node& n) { return n.name.empty() ? n.outputs[0] : n.name; }

const ValueInfo& shaped_info(const Graph& g, const std::string& tensor) {
    const auto* vi = g.find_value_info(tensor);
    if (!vi || !vi->shape)
        throw Error(ErrorKind::UnknownBoundaryShape, "tensor \"" + tensor + "\" has no recorded dtype/shape");
    return *vi;
}

struct Working {
    Model model;
    std::vector<Target> targets;  // per node of model.graph
    std::vector<bool> safety;     // per node
    std::size_t original_count = 0;
};

SafetyFunction insert_redundant(Working& w, const RedundantNode& ins, const std::string& prefix,
                                const std::string& location) {
    auto& g = w.model.graph;
    auto idx = resolve(g, ins.node);
    if (idx >= w.original_count || w.safety[idx])
        throw Error(ErrorKind::SpecSchema, "redundant_node target \"" + ins.node + "\" is not an original node");
    if (w.targets[idx] != Target::Reliable)
        throw Error(ErrorKind::SpecSchema, "redundant_node target \"" + ins.node + "\" is not allocated reliable");

    const Node original = g.nodes[idx];
    auto base = node_label(original);
    auto suffix = std::string(kRedundantSuffix);
    const auto& out0 = original.outputs[0];

    Node dup = original;
    dup.name = base + suffix;
    for (auto& o : dup.outputs) o += suffix;

    Node sub{base + "__safeai_sub", "Sub", "", {out0, dup.outputs[0]}, {out0 + "__safeai_dev"}, {}, ""};
    Node abs{base + "__safeai_abs", "Abs", "", {sub.outputs[0]}, {out0 + "__safeai_absdev"}, {}, ""};
    Node max{base + "__safeai_max", "ReduceMax", "", {abs.outputs[0]}, {prefix + "qualifier." + base},
             {Attribute{"keepdims", std::int64_t{0}}}, ""};

    for (std::size_t k = 0; k < original.outputs.size(); ++k) {
        if (const auto* vi = g.find_value_info(original.outputs[k])) {
            g.value_infos.push_back({dup.outputs[k], vi->dtype, vi->shape});
            if (k == 0) {
                g.value_infos.push_back({sub.outputs[0], vi->dtype, vi->shape});
                g.value_infos.push_back({abs.outputs[0], vi->dtype, vi->shape});
            }
        }
    }
    g.outputs.push_back({max.outputs[0], DataType::Float32, TensorShape{}});

    SafetyFunction sf{"redundant_node", ins.node, location, {}, max.outputs[0], ins.tolerance};
    for (auto* n : {&dup, &sub, &abs, &max}) {
        sf.nodes.push_back(n->name);
        g.nodes.push_back(*n);
        w.targets.push_back(Target::Reliable);
        w.safety.push_back(true);
    }
    return sf;
}

}  // namespace

Model apply_sobel_replacement(const Model& model, const SobelReplace& ins) {
    Model out = model;
    auto& g = out.graph;
    const auto& node = g.nodes[resolve(g, ins.conv_node)];
    if (node.op_type != "Conv")
        throw Error(ErrorKind::NotAConv, "\"" + ins.conv_node + "\" is a " + node.op_type + ", not a Conv");
    auto* weight = node.inputs.size() > 1 ? g.find_initializer(node.inputs[1]) : nullptr;
    if (!weight)
        throw Error(ErrorKind::WeightNotInitializer, "weight of \"" + ins.conv_node + "\" is not an initializer");
    if (weight->dtype != DataType::Float32 || weight->dims.size() != 4)
        throw Error(ErrorKind::UnsupportedFeature, "Conv weight must be a float32 O x I x Kh x Kw tensor");
    const auto O = weight->dims[0], I = weight->dims[1], Kh = weight->dims[2], Kw = weight->dims[3];
    if (Kh < 3 || Kw < 3)
        throw Error(ErrorKind::KernelTooSmall,
                    "kernel " + std::to_string(Kh) + "x" + std::to_string(Kw) + " cannot hold a 3x3 Sobel kernel");
    if (ins.first_channel < 0 || ins.channel_count < 1 || ins.first_channel + ins.channel_count > O)
        throw Error(ErrorKind::ChannelRange, "channels [" + std::to_string(ins.first_channel) + ", " +
                                                 std::to_string(ins.first_channel + ins.channel_count) +
                                                 ") exceed " + std::to_string(O) + " output channels");

    auto values = weight->floats();
    const auto oy = (Kh - 3) / 2, ox = (Kw - 3) / 2;
    for (auto o = ins.first_channel; o < ins.first_channel + ins.channel_count; ++o) {
        const auto& kernel = (o - ins.first_channel) % 2 == 0 ? kGx : kGy;
        for (std::int64_t c = 0; c < I; ++c) {
            const double scale = c < 3 ? ins.luminance_weights[static_cast<std::size_t>(c)] : 0.0;
            for (std::int64_t y = 0; y < Kh; ++y) {
                for (std::int64_t x = 0; x < Kw; ++x) {
                    float v = 0.0f;
                    if (y >= oy && y < oy + 3 && x >= ox && x < ox + 3)
                        v = static_cast<float>(scale * kernel[y - oy][x - ox]);
                    values[static_cast<std::size_t>(((o * I + c) * Kh + y) * Kw + x)] = v;
                }
            }
        }
    }
    weight->set_floats(values);

    if (node.inputs.size() > 2 && !node.inputs[2].empty()) {
        if (auto* bias = g.find_initializer(node.inputs[2]); bias && bias->dtype == DataType::Float32) {
            auto b = bias->floats();
            for (auto o = ins.first_channel; o < ins.first_channel + ins.channel_count; ++o)
                if (static_cast<std::size_t>(o) < b.size()) b[static_cast<std::size_t>(o)] = 0.0f;
            bias->set_floats(b);
        }
    }
    return out;
}

PartitionResult partition(const Model& model, const PartitionSpec& spec, const PartitionOptions& options) {
    if (!options.force && model.metadata(kMetaStage) != std::string(kStageValidatedTrained))
        throw Error(ErrorKind::NotStamped, "model lacks the safeai.stage=validated-trained stamp");

    const auto sig = extract_signature(model);
    const auto& src = model.graph;
    std::vector<std::size_t> canonical_of(src.nodes.size());
    for (const auto& n : sig.nodes) canonical_of[n.original_index] = n.canonical_id;
    auto location_of = [&](std::size_t idx) { return sig.node_location(canonical_of[idx]); };

    Working w;
    w.model = model;
    w.original_count = src.nodes.size();
    w.targets.assign(src.nodes.size(), spec.default_target);
    w.safety.assign(src.nodes.size(), false);
    std::set<std::size_t> assigned;
    for (const auto& [selector, target] : spec.assignments) {
        auto idx = resolve(src, selector);
        if (!assigned.insert(idx).second)
            throw Error(ErrorKind::SpecSchema, "selector \"" + selector + "\" resolves to an already assigned node");
        w.targets[idx] = target;
    }

    PartitionManifest manifest;
    manifest.source_digest = sig.digest;
    manifest.original_inputs = src.inputs;
    manifest.original_outputs = src.outputs;

    std::set<std::string> redundant_targets;
    for (const auto& ins : spec.safety_insertions) {
        if (const auto* s = std::get_if<SobelReplace>(&ins)) {
            w.model = apply_sobel_replacement(w.model, *s);
            auto idx = resolve(src, s->conv_node);
            const auto& conv = src.nodes[idx];
            manifest.modified_initializers.push_back({conv.inputs[1], s->first_channel, s->channel_count});
            if (conv.inputs.size() > 2 && src.find_initializer(conv.inputs[2]))
                manifest.modified_initializers.push_back({conv.inputs[2], s->first_channel, s->channel_count});
            manifest.safety_functions.push_back({"sobel_replace", s->conv_node, location_of(idx), {}, "", 0.0});
        } else if (const auto* r = std::get_if<RedundantNode>(&ins)) {
            auto idx = resolve(src, r->node);
            if (!redundant_targets.insert(node_label(src.nodes[idx])).second)
                throw Error(ErrorKind::SpecSchema, "node \"" + r->node + "\" is made redundant twice");
            auto sf = insert_redundant(w, *r, spec.boundary_prefix, location_of(idx));
            manifest.safety_nodes.insert(manifest.safety_nodes.end(), sf.nodes.begin(), sf.nodes.end());
            manifest.safety_functions.push_back(std::move(sf));
        } else {
            const auto& t = std::get<ExposeTensor>(ins).tensor;
            std::optional<std::size_t> producer;
            for (std::size_t i = 0; i < w.original_count; ++i) {
                const auto& outs = src.nodes[i].outputs;
                if (std::find(outs.begin(), outs.end(), t) != outs.end()) producer = i;
            }
            if (!producer || w.targets[*producer] != Target::Reliable)
                throw Error(ErrorKind::SpecSchema, "expose_tensor \"" + t + "\" is not produced by a reliable node");
            shaped_info(src, t);
            if (std::find(manifest.exposed_tensors.begin(), manifest.exposed_tensors.end(), t) ==
                manifest.exposed_tensors.end())
                manifest.exposed_tensors.push_back(t);
            manifest.safety_functions.push_back({"expose_tensor", t, "tensor:" + t, {}, "", 0.0});
        }
    }

    const auto& g = w.model.graph;
    std::unordered_map<std::string, std::size_t> producer;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        for (const auto& o : g.nodes[i].outputs) producer[o] = i;

    std::size_t reliable_count = 0, nonreliable_count = 0;
    for (std::size_t i = 0; i < w.original_count; ++i)
        (w.targets[i] == Target::Reliable ? reliable_count : nonreliable_count)++;
    if (reliable_count == 0) throw Error(ErrorKind::EmptyPartition, "no node is allocated to the reliable file");
    if (nonreliable_count == 0) throw Error(ErrorKind::EmptyPartition, "no node is allocated to the non-reliable file");

    std::vector<std::string> boundary;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (const auto& in : g.nodes[i].inputs) {
            auto p = producer.find(in);
            if (p == producer.end() || w.targets[p->second] == w.targets[i]) continue;
            if (w.targets[i] == Target::Reliable)
                throw Error(ErrorKind::CyclicCut, "tensor \"" + in + "\" would flow from the non-reliable to the reliable file");
            if (std::find(boundary.begin(), boundary.end(), in) == boundary.end()) boundary.push_back(in);
        }
    }
    for (const auto& t : boundary) {
        const auto& vi = shaped_info(g, t);
        manifest.boundary_tensors.push_back({t, vi.dtype, *vi.shape});
    }

    for (std::size_t i = 0; i < w.original_count; ++i) {
        const auto& n = src.nodes[i];
        manifest.allocations.push_back({location_of(i), n.name, n.outputs[0], n.op_type, w.targets[i]});
    }

    auto build = [&](Target side) {
        Model part;
        part.ir_version = w.model.ir_version;
        part.opset_imports = w.model.opset_imports;
        part.producer_name = w.model.producer_name;
        part.metadata_props = w.model.metadata_props;
        part.graph.name = g.name + "." + std::string(to_string(side));

        std::set<std::string> used, produced;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            if (w.targets[i] != side) continue;
            Node n = g.nodes[i];
            n.doc_string = with_markers(n.doc_string, side, w.safety[i]);
            for (const auto& in : n.inputs) used.insert(in);
            for (const auto& o : n.outputs) produced.insert(o);
            part.graph.nodes.push_back(std::move(n));
        }
        std::set<std::string> interface;
        auto add_output = [&](const ValueInfo& vi) {
            if (interface.insert(vi.name).second) part.graph.outputs.push_back(vi);
        };
        for (const auto& vi : src.inputs)
            if (used.contains(vi.name)) {
                part.graph.inputs.push_back(vi);
                interface.insert(vi.name);
            }
        if (side == Target::NonReliable) {
            for (const auto& b : manifest.boundary_tensors) {
                part.graph.inputs.push_back({b.name, b.dtype, b.shape});
                interface.insert(b.name);
            }
        }
        for (const auto& vi : g.outputs)
            if (produced.contains(vi.name)) add_output(vi);
        if (side == Target::Reliable) {
            for (const auto& b : manifest.boundary_tensors) add_output({b.name, b.dtype, b.shape});
            for (const auto& t : manifest.exposed_tensors) add_output(*g.find_value_info(t));
        }
        std::set<std::string> consumed_anywhere;
        for (const auto& n : g.nodes)
            for (const auto& in : n.inputs) consumed_anywhere.insert(in);
        for (const auto& init : g.initializers) {
            bool unused = !consumed_anywhere.contains(init.name);
            if (used.contains(init.name) || (unused && side == Target::Reliable)) part.graph.initializers.push_back(init);
        }
        for (const auto& vi : g.value_infos) {
            bool referenced = used.contains(vi.name) || produced.contains(vi.name);
            if (referenced && !interface.contains(vi.name) && !part.graph.find_initializer(vi.name))
                part.graph.value_infos.push_back(vi);
        }
        validate_model(part);
        return part;
    };

    PartitionResult result{build(Target::Reliable), build(Target::NonReliable), std::move(manifest)};
    return result;
}

}  // namespace safeai
