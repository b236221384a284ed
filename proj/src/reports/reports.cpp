#include "safeai/reports.hpp"

#include "json.hpp"

namespace safeai {

using json = nlohmann::ordered_json;

namespace {

json entries_json(const DiffReport& diff) {
    json out = json::array();
    for (const auto& e : diff.entries) {
        out.push_back({{"kind", to_string(e.kind)},
                       {"location", e.location},
                       {"reference", e.reference_value},
                       {"candidate", e.candidate_value}});
    }
    return out;
}

json shape_json(const std::optional<TensorShape>& shape) {
    if (!shape) return nullptr;
    json out = json::array();
    for (const auto& d : *shape) {
        if (d.is_symbolic()) out.push_back(d.symbol());
        else out.push_back(d.extent());
    }
    return out;
}

}  // namespace

std::string training_report_json(const ValidationOutcome& o) {
    json doc;
    doc["verdict"] = to_string(o.verdict);
    doc["entries"] = entries_json(o.diff);
    doc["weight_changes"] = o.diff.weight_changes;
    doc["warnings"] = o.warnings;
    doc["reference_digest"] = o.reference_digest;
    doc["candidate_digest"] = o.candidate_digest;
    return doc.dump(2) + "\n";
}

std::string partition_report_json(const MergeOutcome& o) {
    json doc;
    doc["verdict"] = to_string(o.verdict);
    doc["entries"] = entries_json(o.diff);
    doc["weight_changes"] = o.diff.weight_changes;
    doc["warnings"] = o.consistency_failures;
    doc["reference_digest"] = o.reference_digest;
    doc["candidate_digest"] = o.merged_digest;
    doc["safety_report"] = json::array();
    for (const auto& s : o.safety_report) {
        doc["safety_report"].push_back(
            {{"kind", s.kind}, {"target", s.target}, {"location", s.location}, {"nodes", s.nodes}});
    }
    return doc.dump(2) + "\n";
}

std::string signature_json(const ArchitectureSignature& sig) {
    json doc;
    doc["mode"] = to_string(sig.mode);
    doc["digest"] = sig.digest;
    doc["opset_imports"] = json::object();
    for (const auto& [domain, version] : sig.opset_imports) doc["opset_imports"][domain] = version;
    auto iface = [&](const std::vector<InterfaceEntry>& list) {
        json out = json::array();
        for (const auto& e : list)
            out.push_back({{"tensor", e.tensor}, {"name", e.name}, {"dtype", to_string(e.dtype)}, {"shape", shape_json(e.shape)}});
        return out;
    };
    doc["inputs"] = iface(sig.inputs);
    doc["outputs"] = iface(sig.outputs);
    doc["nodes"] = json::array();
    for (const auto& n : sig.nodes) {
        json attrs = json::array();
        for (const auto& a : n.attributes) attrs.push_back(a.name);
        json ins = json::array();
        for (auto t : n.inputs) ins.push_back(t == kAbsentTensor ? json(nullptr) : json(t));
        doc["nodes"].push_back({{"id", n.canonical_id},
                                {"op_type", n.op_type},
                                {"domain", n.domain},
                                {"name", n.name},
                                {"attributes", attrs},
                                {"inputs", ins},
                                {"outputs", n.outputs}});
    }
    doc["initializer_slots"] = json::array();
    for (const auto& [id, slot] : sig.initializer_slots)
        doc["initializer_slots"].push_back({{"tensor", id}, {"name", slot.name}, {"dtype", to_string(slot.dtype)}, {"dims", slot.dims}});
    return doc.dump(2) + "\n";
}

}  // namespace safeai
