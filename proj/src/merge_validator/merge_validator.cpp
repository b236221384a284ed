#include "safeai/merge_validator.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "safeai/error.hpp"

namespace safeai {

namespace {

const ValueInfo* find_in(const std::vector<ValueInfo>& list, const std::string& name) {
    auto it = std::find_if(list.begin(), list.end(), [&](const ValueInfo& v) { return v.name == name; });
    return it == list.end() ? nullptr : &*it;
}

std::string describe(const ValueInfo& vi) {
    return std::string(to_string(vi.dtype)) + " " + (vi.shape ? shape_to_string(*vi.shape) : std::string("?"));
}

bool same_type(const ValueInfo& a, const ValueInfo& b) { return a.dtype == b.dtype && a.shape == b.shape; }

std::set<std::string> allowed_reliable_outputs(const PartitionManifest& m) {
    std::set<std::string> out;
    for (const auto& b : m.boundary_tensors) out.insert(b.name);
    for (const auto& t : m.exposed_tensors) out.insert(t);
    for (const auto& f : m.safety_functions)
        if (!f.qualifier_output.empty()) out.insert(f.qualifier_output);
    for (const auto& vi : m.original_outputs) out.insert(vi.name);
    return out;
}

void check_redundant_chain(const Graph& d, const SafetyFunction& f, std::vector<std::string>& failures) {
    auto fail = [&](const std::string& why) { failures.push_back("redundant_node " + f.target + ": " + why); };
    if (f.nodes.size() != 4) return fail("expected 4 safety nodes, manifest lists " + std::to_string(f.nodes.size()));
    std::vector<const Node*> chain;
    for (const auto& name : f.nodes) {
        auto it = std::find_if(d.nodes.begin(), d.nodes.end(), [&](const Node& n) { return n.name == name; });
        if (it == d.nodes.end()) return fail("safety node \"" + name + "\" missing from reliable file");
        chain.push_back(&*it);
    }
    const Node* target = nullptr;
    for (const auto& n : d.nodes)
        if (n.name == f.target && n.name != chain[0]->name) target = &n;
    if (!target)
        for (const auto& n : d.nodes)
            if (!n.outputs.empty() && n.outputs[0] == f.target) target = &n;
    if (!target) return fail("target node missing from reliable file");

    const auto& [dup, sub, abs, max] = std::tie(*chain[0], *chain[1], *chain[2], *chain[3]);
    auto suffixed = target->outputs;
    for (auto& o : suffixed) o += kRedundantSuffix;
    if (dup.op_type != target->op_type || dup.domain != target->domain || dup.inputs != target->inputs ||
        dup.outputs != suffixed || dup.attributes != target->attributes)
        fail("duplicate \"" + dup.name + "\" does not replicate its target");
    if (sub.op_type != "Sub" || !sub.domain.empty() ||
        sub.inputs != std::vector<std::string>{target->outputs[0], dup.outputs[0]} || sub.outputs.size() != 1)
        return fail("comparison node \"" + sub.name + "\" is not Sub(target, duplicate)");
    if (abs.op_type != "Abs" || !abs.domain.empty() || abs.inputs != sub.outputs || abs.outputs.size() != 1)
        return fail("node \"" + abs.name + "\" is not Abs of the deviation");
    if (max.op_type != "ReduceMax" || !max.domain.empty() || max.inputs != abs.outputs ||
        max.outputs != std::vector<std::string>{f.qualifier_output} || max.attributes.size() != 1 ||
        max.int_attribute("keepdims", 1) != 0)
        return fail("node \"" + max.name + "\" is not ReduceMax(keepdims=0) onto the qualifier output");
    const auto* q = find_in(d.outputs, f.qualifier_output);
    if (!q || q->dtype != DataType::Float32 || q->shape != TensorShape{})
        fail("qualifier output \"" + f.qualifier_output + "\" is not a float32 scalar graph output");
}

std::vector<std::string> consistency_failures(const Model& d, const Model& e, const PartitionManifest& m) {
    std::vector<std::string> failures;
    if (d.opset_imports != e.opset_imports) failures.push_back("opset imports differ between reliable and non-reliable files");

    for (const auto& init : e.graph.initializers) {
        const auto* other = d.graph.find_initializer(init.name);
        if (other && (other->dtype != init.dtype || other->dims != init.dims))
            failures.push_back("initializer \"" + init.name + "\" differs in dtype/shape between the two files");
    }

    std::set<std::string> safety_listed(m.safety_nodes.begin(), m.safety_nodes.end());
    std::set<std::string> safety_marked;
    std::map<std::string, std::pair<Target, std::string>> placed;  // first output -> (side, op_type)
    auto scan = [&](const Model& part, Target side) {
        auto expect = std::string(kAllocationMarker) + std::string(to_string(side));
        for (const auto& n : part.graph.nodes) {
            auto markers = doc_markers(n.doc_string);
            auto label = n.name.empty() ? n.outputs[0] : n.name;
            auto allocations = std::count_if(markers.begin(), markers.end(),
                                             [](const std::string& s) { return s.starts_with(kAllocationMarker); });
            if (allocations != 1 || std::find(markers.begin(), markers.end(), expect) == markers.end())
                failures.push_back("node \"" + label + "\" lacks the marker " + expect);
            bool safety = std::find(markers.begin(), markers.end(), kSafetyMarker) != markers.end();
            if (safety) {
                if (side != Target::Reliable) failures.push_back("safety node \"" + label + "\" sits in the non-reliable file");
                safety_marked.insert(n.name);
            } else if (safety_listed.contains(n.name)) {
                failures.push_back("listed safety node \"" + label + "\" lacks the safety marker");
            } else {
                placed[n.outputs[0]] = {side, n.op_type};
            }
        }
    };
    scan(d, Target::Reliable);
    scan(e, Target::NonReliable);
    for (const auto& name : safety_marked)
        if (!safety_listed.contains(name)) failures.push_back("node \"" + name + "\" carries the safety marker but is not in the manifest");

    if (placed.size() != m.allocations.size())
        failures.push_back("manifest allocates " + std::to_string(m.allocations.size()) + " nodes, files hold " +
                           std::to_string(placed.size()));
    for (const auto& a : m.allocations) {
        auto it = placed.find(a.output);
        if (it == placed.end()) {
            failures.push_back("allocated node " + a.location + " not found");
        } else if (it->second.first != a.target || it->second.second != a.op_type) {
            failures.push_back("allocated node " + a.location + " placed as " + it->second.second + " in the " +
                               std::string(to_string(it->second.first)) + " file");
        }
    }

    for (const auto& f : m.safety_functions)
        if (f.kind == "redundant_node") check_redundant_chain(d.graph, f, failures);
    for (const auto& t : m.exposed_tensors)
        if (!find_in(d.graph.outputs, t)) failures.push_back("exposed tensor \"" + t + "\" is not an output of the reliable file");
    return failures;
}

}  // namespace

Model merge_partitions(const Model& reliable, const Model& nonreliable, const PartitionManifest& manifest) {
    const auto& dg = reliable.graph;
    const auto& eg = nonreliable.graph;

    std::set<std::string> boundary;
    for (const auto& b : manifest.boundary_tensors) {
        ValueInfo want{b.name, b.dtype, b.shape};
        const auto* out = find_in(dg.outputs, b.name);
        const auto* in = find_in(eg.inputs, b.name);
        if (!out) throw Error(ErrorKind::BoundaryMismatch, "\"" + b.name + "\" is not an output of the reliable file");
        if (!in) throw Error(ErrorKind::BoundaryMismatch, "\"" + b.name + "\" is not an input of the non-reliable file");
        if (!same_type(*out, want) || !same_type(*in, want))
            throw Error(ErrorKind::BoundaryMismatch, "\"" + b.name + "\" is " + describe(*out) + " -> " + describe(*in) +
                                                         ", manifest says " + describe(want));
        boundary.insert(b.name);
    }
    for (const auto& vi : eg.inputs)
        if (!boundary.contains(vi.name) && !find_in(manifest.original_inputs, vi.name))
            throw Error(ErrorKind::BoundaryMismatch, "non-reliable input \"" + vi.name + "\" is neither original nor a boundary");

    std::set<std::string> safety(manifest.safety_nodes.begin(), manifest.safety_nodes.end());
    std::set<std::string> safety_tensors;
    for (const auto& name : manifest.safety_nodes) {
        auto it = std::find_if(dg.nodes.begin(), dg.nodes.end(), [&](const Node& n) { return n.name == name; });
        if (it == dg.nodes.end())
            throw Error(ErrorKind::DanglingSafetyNode, "safety node \"" + name + "\" is not in the reliable file");
        safety_tensors.insert(it->outputs.begin(), it->outputs.end());
    }
    auto check_consumers = [&](const Graph& g, bool skip_safety) {
        for (const auto& n : g.nodes) {
            if (skip_safety && safety.contains(n.name)) continue;
            for (const auto& in : n.inputs)
                if (safety_tensors.contains(in))
                    throw Error(ErrorKind::DanglingSafetyNode,
                                "safety tensor \"" + in + "\" feeds non-safety node \"" + n.name + "\"");
        }
    };
    check_consumers(dg, true);
    check_consumers(eg, false);

    auto allowed = allowed_reliable_outputs(manifest);
    for (const auto& vi : dg.outputs)
        if (!allowed.contains(vi.name))
            throw Error(ErrorKind::InterfaceMismatch, "reliable output \"" + vi.name + "\" is not accounted for by the manifest");
    for (const auto& vi : eg.outputs)
        if (!find_in(manifest.original_outputs, vi.name))
            throw Error(ErrorKind::InterfaceMismatch, "non-reliable output \"" + vi.name + "\" is not an original output");

    Model merged;
    merged.ir_version = reliable.ir_version;
    merged.opset_imports = reliable.opset_imports;
    merged.producer_name = reliable.producer_name;
    for (const auto& kv : reliable.metadata_props)
        if (!kv.first.starts_with("safeai.")) merged.metadata_props.push_back(kv);
    merged.graph.name = dg.name;

    auto restore = [&](const std::vector<ValueInfo>& original, const std::vector<ValueInfo>& a,
                       const std::vector<ValueInfo>& b, const char* what) {
        std::vector<ValueInfo> out;
        for (const auto& vi : original) {
            for (const auto* decl : {find_in(a, vi.name), find_in(b, vi.name)}) {
                if (decl && !same_type(*decl, vi))
                    throw Error(ErrorKind::InterfaceMismatch, std::string(what) + " \"" + vi.name + "\" is " +
                                                                  describe(*decl) + ", originally " + describe(vi));
            }
            if (!find_in(a, vi.name) && !find_in(b, vi.name) && std::string_view(what) == "output")
                throw Error(ErrorKind::InterfaceMismatch, "original output \"" + vi.name + "\" is declared by neither file");
            out.push_back(vi);
        }
        return out;
    };
    merged.graph.inputs = restore(manifest.original_inputs, dg.inputs, eg.inputs, "input");
    merged.graph.outputs = restore(manifest.original_outputs, dg.outputs, eg.outputs, "output");

    std::set<std::string> consumed;
    for (const auto* g : {&dg, &eg}) {
        for (const auto& n : g->nodes) {
            if (g == &dg && safety.contains(n.name)) continue;
            Node copy = n;
            copy.doc_string = strip_markers(n.doc_string);
            consumed.insert(copy.inputs.begin(), copy.inputs.end());
            merged.graph.nodes.push_back(std::move(copy));
        }
    }
    std::set<std::string> safety_inputs;
    for (const auto& n : dg.nodes)
        if (safety.contains(n.name)) safety_inputs.insert(n.inputs.begin(), n.inputs.end());
    for (const auto* g : {&dg, &eg}) {
        for (const auto& init : g->initializers) {
            if (merged.graph.find_initializer(init.name)) continue;
            if (!consumed.contains(init.name) && safety_inputs.contains(init.name)) continue;
            merged.graph.initializers.push_back(init);
        }
    }
    std::set<std::string> interface;
    for (const auto& vi : merged.graph.inputs) interface.insert(vi.name);
    for (const auto& vi : merged.graph.outputs) interface.insert(vi.name);
    std::set<std::string> seen;
    auto add_info = [&](const ValueInfo& vi) {
        if (interface.contains(vi.name) || safety_tensors.contains(vi.name)) return;
        if (merged.graph.find_initializer(vi.name)) return;
        if (seen.insert(vi.name).second) merged.graph.value_infos.push_back(vi);
    };
    for (const auto& b : manifest.boundary_tensors) add_info({b.name, b.dtype, b.shape});
    for (const auto* g : {&dg, &eg})
        for (const auto& vi : g->value_infos) add_info(vi);
    std::set<std::string> produced;
    for (const auto& n : merged.graph.nodes) produced.insert(n.outputs.begin(), n.outputs.end());
    std::erase_if(merged.graph.value_infos, [&](const ValueInfo& vi) { return !produced.contains(vi.name); });

    validate_model(merged);
    return merged;
}

MergeOutcome validate_partition(const Model& source, const Model& reliable, const Model& nonreliable,
                                const PartitionManifest& manifest, const ValidationPolicy& policy,
                                const MergeOptions& options) {
    if (!options.force && source.metadata(kMetaStage) != std::string(kStageValidatedTrained))
        throw Error(ErrorKind::NotStamped, "source model lacks the safeai.stage=validated-trained stamp");
    auto structural = extract_signature(source);
    if (manifest.source_digest != structural.digest)
        throw Error(ErrorKind::ManifestDigestMismatch,
                    "manifest source_digest " + manifest.source_digest + " != " + structural.digest);

    auto ref = policy.mode == SignatureMode::Structural ? structural : extract_signature(source, policy.mode);
    MergeOutcome out;
    out.reference_digest = ref.digest;
    for (const auto& f : manifest.safety_functions) out.safety_report.push_back({f.kind, f.target, f.location, f.nodes});

    out.consistency_failures = consistency_failures(reliable, nonreliable, manifest);
    try {
        auto merged = merge_partitions(reliable, nonreliable, manifest);
        auto cand = extract_signature(merged, policy.mode);
        out.merged_digest = cand.digest;
        out.diff = diff_signatures(ref, cand);
    } catch (const Error& e) {
        switch (e.kind()) {
            case ErrorKind::BoundaryMismatch:
            case ErrorKind::DanglingSafetyNode:
            case ErrorKind::InterfaceMismatch:
            case ErrorKind::InvalidGraph:
            case ErrorKind::InvalidModel:
                out.consistency_failures.push_back(std::string("merge failed: ") + e.what());
                break;
            default:
                throw;
        }
    }

    bool merged_ok = !out.merged_digest.empty();
    if (merged_ok && out.diff.architectures_equal() && out.consistency_failures.empty()) {
        out.verdict = Verdict::Validated;
        out.stamped_reliable = stamp_model(reliable, kStageValidatedPartition, manifest.source_digest);
        out.stamped_nonreliable = stamp_model(nonreliable, kStageValidatedPartition, manifest.source_digest);
    }
    return out;
}

}  // namespace safeai
