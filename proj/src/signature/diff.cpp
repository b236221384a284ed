#include <algorithm>
#include <set>
#include <unordered_map>

#include "safeai/error.hpp"
#include "safeai/signature.hpp"
#include "text_util.hpp"

namespace safeai {

std::string_view to_string(DiffKind kind) {
    switch (kind) {
        case DiffKind::NodeMissing: return "NodeMissing";
        case DiffKind::NodeAdded: return "NodeAdded";
        case DiffKind::OpTypeMismatch: return "OpTypeMismatch";
        case DiffKind::AttributeMismatch: return "AttributeMismatch";
        case DiffKind::EdgeMismatch: return "EdgeMismatch";
        case DiffKind::InterfaceMismatch: return "InterfaceMismatch";
        case DiffKind::InitializerShapeMismatch: return "InitializerShapeMismatch";
        case DiffKind::OpsetMismatch: return "OpsetMismatch";
    }
    return "Unknown";
}

namespace {

constexpr std::string_view kAbsent = "<absent>";

struct Step {
    std::optional<std::size_t> ref;
    std::optional<std::size_t> cand;
};

std::string node_key(const CanonicalNode& n) { return n.op_type + '\x1f' + n.domain; }

// Longest-common-subsequence alignment on (op_type, domain). Unmatched runs
// sitting between the same pair of anchors are paired positionally: that is
// a node whose type changed rather than one removal plus one addition.
std::vector<Step> align(const std::vector<CanonicalNode>& a, const std::vector<CanonicalNode>& b) {
    const auto n = a.size(), m = b.size();
    std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = node_key(a[i]) == node_key(b[j]) ? lcs[i + 1][j + 1] + 1
                                                         : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    std::vector<Step> steps;
    std::vector<std::size_t> gap_a, gap_b;
    auto flush = [&] {
        std::size_t k = 0;
        for (; k < std::min(gap_a.size(), gap_b.size()); ++k) steps.push_back({gap_a[k], gap_b[k]});
        for (std::size_t r = k; r < gap_a.size(); ++r) steps.push_back({gap_a[r], std::nullopt});
        for (std::size_t r = k; r < gap_b.size(); ++r) steps.push_back({std::nullopt, gap_b[r]});
        gap_a.clear();
        gap_b.clear();
    };
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && node_key(a[i]) == node_key(b[j]) && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
            flush();
            steps.push_back({i++, j++});
        } else if (j == m || (i < n && lcs[i + 1][j] >= lcs[i][j + 1])) {
            gap_a.push_back(i++);
        } else {
            gap_b.push_back(j++);
        }
    }
    flush();
    return steps;
}

class Differ {
public:
    Differ(const ArchitectureSignature& ref, const ArchitectureSignature& cand)
        : ref_(ref), cand_(cand), strict_(ref.mode == SignatureMode::StrictNames) {}

    DiffReport run() {
        compare_opsets();
        compare_inputs();
        for (const auto& step : align(ref_.nodes, cand_.nodes)) {
            if (step.ref && step.cand) {
                compare_nodes(*step.ref, *step.cand);
            } else if (step.ref) {
                const auto& n = ref_.nodes[*step.ref];
                add(DiffKind::NodeMissing, ref_.node_location(*step.ref), n.op_type, std::string(kAbsent));
            } else {
                const auto& n = cand_.nodes[*step.cand];
                add(DiffKind::NodeAdded, cand_.node_location(*step.cand), std::string(kAbsent), n.op_type);
            }
        }
        compare_outputs();
        compare_unmapped_initializers();
        if (report_.entries.empty() && ref_.digest != cand_.digest) {
            add(DiffKind::EdgeMismatch, "graph", ref_.digest, cand_.digest);
        }
        return std::move(report_);
    }

private:
    void add(DiffKind kind, std::string location, std::string ref_value, std::string cand_value) {
        report_.entries.push_back({kind, std::move(location), std::move(ref_value), std::move(cand_value)});
    }

    std::string describe(const ArchitectureSignature& sig, std::size_t id) const {
        if (id == kAbsentTensor) return "-";
        std::string s = "t" + std::to_string(id);
        if (auto it = sig.initializer_slots.find(id); it != sig.initializer_slots.end())
            s += " initializer " + detail::tensor_desc(it->second.dtype, it->second.dims);
        return s + " " + detail::quote(sig.tensor_names[id]);
    }

    static std::string interface_text(const InterfaceEntry& e) {
        std::string shape = e.shape ? shape_to_string(*e.shape) : "unknown";
        return std::string(to_string(e.dtype)) + " " + shape;
    }

    bool map(std::size_t r, std::size_t c) {
        auto fwd = forward_.find(r);
        auto bwd = backward_.find(c);
        if (fwd != forward_.end() || bwd != backward_.end()) {
            return fwd != forward_.end() && fwd->second == c && bwd != backward_.end() && bwd->second == r;
        }
        forward_[r] = c;
        backward_[c] = r;
        return true;
    }

    void compare_opsets() {
        std::set<std::string> domains;
        for (const auto& [d, v] : ref_.opset_imports) domains.insert(d);
        for (const auto& [d, v] : cand_.opset_imports) domains.insert(d);
        for (const auto& d : domains) {
            auto r = ref_.opset_imports.find(d);
            auto c = cand_.opset_imports.find(d);
            auto rv = r == ref_.opset_imports.end() ? std::string(kAbsent) : std::to_string(r->second);
            auto cv = c == cand_.opset_imports.end() ? std::string(kAbsent) : std::to_string(c->second);
            if (rv != cv) add(DiffKind::OpsetMismatch, "opset[" + (d.empty() ? std::string("ai.onnx") : d) + "]", rv, cv);
        }
    }

    void compare_inputs() {
        auto n = std::max(ref_.inputs.size(), cand_.inputs.size());
        for (std::size_t i = 0; i < n; ++i) {
            auto loc = "input[" + std::to_string(i) + "]";
            if (i >= ref_.inputs.size() || i >= cand_.inputs.size()) {
                add(DiffKind::InterfaceMismatch, loc,
                    i < ref_.inputs.size() ? interface_text(ref_.inputs[i]) : std::string(kAbsent),
                    i < cand_.inputs.size() ? interface_text(cand_.inputs[i]) : std::string(kAbsent));
                continue;
            }
            const auto& r = ref_.inputs[i];
            const auto& c = cand_.inputs[i];
            if (interface_text(r) != interface_text(c)) add(DiffKind::InterfaceMismatch, loc, interface_text(r), interface_text(c));
            if (strict_ && r.name != c.name) add(DiffKind::InterfaceMismatch, loc + "/name", r.name, c.name);
            map(r.tensor, c.tensor);
        }
    }

    void compare_outputs() {
        auto n = std::max(ref_.outputs.size(), cand_.outputs.size());
        for (std::size_t i = 0; i < n; ++i) {
            auto loc = "output[" + std::to_string(i) + "]";
            if (i >= ref_.outputs.size() || i >= cand_.outputs.size()) {
                add(DiffKind::InterfaceMismatch, loc,
                    i < ref_.outputs.size() ? interface_text(ref_.outputs[i]) : std::string(kAbsent),
                    i < cand_.outputs.size() ? interface_text(cand_.outputs[i]) : std::string(kAbsent));
                continue;
            }
            const auto& r = ref_.outputs[i];
            const auto& c = cand_.outputs[i];
            if (interface_text(r) != interface_text(c)) add(DiffKind::InterfaceMismatch, loc, interface_text(r), interface_text(c));
            if (strict_ && r.name != c.name) add(DiffKind::InterfaceMismatch, loc + "/name", r.name, c.name);
            auto fwd = forward_.find(r.tensor);
            if (fwd == forward_.end() || fwd->second != c.tensor) {
                add(DiffKind::EdgeMismatch, loc + "/source", describe(ref_, r.tensor), describe(cand_, c.tensor));
            }
        }
    }

    void compare_nodes(std::size_t ri, std::size_t ci) {
        const auto& r = ref_.nodes[ri];
        const auto& c = cand_.nodes[ci];
        auto loc = ref_.node_location(ri);
        if (node_key(r) != node_key(c)) {
            auto text = [](const CanonicalNode& n) { return n.domain.empty() ? n.op_type : n.domain + "::" + n.op_type; };
            add(DiffKind::OpTypeMismatch, loc, text(r), text(c));
        } else {
            compare_attributes(loc, r, c);
        }
        if (strict_ && r.name != c.name) add(DiffKind::AttributeMismatch, loc + "/name", r.name, c.name);

        auto n_in = std::max(r.inputs.size(), c.inputs.size());
        for (std::size_t s = 0; s < n_in; ++s) {
            auto slot_loc = loc + "/input[" + std::to_string(s) + "]";
            if (s >= r.inputs.size() || s >= c.inputs.size()) {
                add(DiffKind::EdgeMismatch, slot_loc,
                    s < r.inputs.size() ? describe(ref_, r.inputs[s]) : std::string(kAbsent),
                    s < c.inputs.size() ? describe(cand_, c.inputs[s]) : std::string(kAbsent));
                continue;
            }
            compare_input(slot_loc, r.inputs[s], c.inputs[s]);
        }

        auto n_out = std::max(r.outputs.size(), c.outputs.size());
        for (std::size_t s = 0; s < n_out; ++s) {
            auto slot_loc = loc + "/output[" + std::to_string(s) + "]";
            if (s >= r.outputs.size() || s >= c.outputs.size()) {
                add(DiffKind::EdgeMismatch, slot_loc,
                    s < r.outputs.size() ? describe(ref_, r.outputs[s]) : std::string(kAbsent),
                    s < c.outputs.size() ? describe(cand_, c.outputs[s]) : std::string(kAbsent));
                continue;
            }
            if (!map(r.outputs[s], c.outputs[s])) {
                add(DiffKind::EdgeMismatch, slot_loc, describe(ref_, r.outputs[s]), describe(cand_, c.outputs[s]));
            } else if (strict_ && ref_.tensor_names[r.outputs[s]] != cand_.tensor_names[c.outputs[s]]) {
                add(DiffKind::EdgeMismatch, slot_loc + "/name", ref_.tensor_names[r.outputs[s]],
                    cand_.tensor_names[c.outputs[s]]);
            }
        }
    }

    void compare_attributes(const std::string& loc, const CanonicalNode& r, const CanonicalNode& c) {
        std::map<std::string, std::pair<std::string, std::string>> values;
        for (const auto& a : r.attributes) values[a.name].first = detail::render_attribute_value(a);
        for (const auto& a : c.attributes) values[a.name].second = detail::render_attribute_value(a);
        for (const auto& [name, v] : values) {
            if (v.first != v.second) {
                add(DiffKind::AttributeMismatch, loc + "/attr:" + name, v.first.empty() ? std::string(kAbsent) : v.first,
                    v.second.empty() ? std::string(kAbsent) : v.second);
            }
        }
    }

    void compare_input(const std::string& loc, std::size_t r, std::size_t c) {
        if (r == kAbsentTensor || c == kAbsentTensor) {
            if (r != c) add(DiffKind::EdgeMismatch, loc, describe(ref_, r), describe(cand_, c));
            return;
        }
        auto fwd = forward_.find(r);
        if (fwd != forward_.end()) {
            if (fwd->second != c) add(DiffKind::EdgeMismatch, loc, describe(ref_, r), describe(cand_, c));
            return;
        }
        auto rs = ref_.initializer_slots.find(r);
        auto cs = cand_.initializer_slots.find(c);
        if (rs == ref_.initializer_slots.end() || cs == cand_.initializer_slots.end() || backward_.contains(c)) {
            add(DiffKind::EdgeMismatch, loc, describe(ref_, r), describe(cand_, c));
            return;
        }
        map(r, c);
        auto rt = detail::tensor_desc(rs->second.dtype, rs->second.dims);
        auto ct = detail::tensor_desc(cs->second.dtype, cs->second.dims);
        if (rt != ct) {
            add(DiffKind::InitializerShapeMismatch, loc, rt, ct);
        } else if (rs->second.value_digest != cs->second.value_digest) {
            report_.weight_changes.push_back(cs->second.name);
        }
        if (strict_ && rs->second.name != cs->second.name) add(DiffKind::EdgeMismatch, loc + "/name", rs->second.name, cs->second.name);
    }

    void compare_unmapped_initializers() {
        std::vector<std::size_t> r_left, c_left;
        for (const auto& [id, slot] : ref_.initializer_slots)
            if (!forward_.contains(id)) r_left.push_back(id);
        for (const auto& [id, slot] : cand_.initializer_slots)
            if (!backward_.contains(id)) c_left.push_back(id);
        // Initializers of missing/added nodes are already covered by the node entry.
        auto consumed_by_node = [](const ArchitectureSignature& sig, std::size_t id) {
            for (const auto& n : sig.nodes)
                if (std::find(n.inputs.begin(), n.inputs.end(), id) != n.inputs.end()) return true;
            return false;
        };
        std::erase_if(r_left, [&](std::size_t id) { return consumed_by_node(ref_, id); });
        std::erase_if(c_left, [&](std::size_t id) { return consumed_by_node(cand_, id); });
        auto n = std::max(r_left.size(), c_left.size());
        for (std::size_t k = 0; k < n; ++k) {
            auto text = [](const ArchitectureSignature& sig, const std::vector<std::size_t>& ids, std::size_t i) {
                if (i >= ids.size()) return std::string(kAbsent);
                const auto& s = sig.initializer_slots.at(ids[i]);
                return detail::tensor_desc(s.dtype, s.dims);
            };
            auto rt = text(ref_, r_left, k);
            auto ct = text(cand_, c_left, k);
            if (rt != ct) add(DiffKind::InitializerShapeMismatch, "unused_initializer[" + std::to_string(k) + "]", rt, ct);
        }
    }

    const ArchitectureSignature& ref_;
    const ArchitectureSignature& cand_;
    bool strict_;
    std::unordered_map<std::size_t, std::size_t> forward_;
    std::unordered_map<std::size_t, std::size_t> backward_;
    DiffReport report_;
};

}  // namespace

DiffReport diff_signatures(const ArchitectureSignature& reference, const ArchitectureSignature& candidate) {
    if (reference.mode != candidate.mode) {
        throw Error(ErrorKind::ModeMismatch, "reference signature is " + std::string(to_string(reference.mode)) +
                                                 ", candidate is " + std::string(to_string(candidate.mode)));
    }
    return Differ(reference, candidate).run();
}

}  // namespace safeai
