#include "safeai/signature.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "safeai/error.hpp"
#include "text_util.hpp"

namespace safeai {

std::string_view to_string(SignatureMode mode) {
    return mode == SignatureMode::Structural ? "structural" : "strict_names";
}

std::string ArchitectureSignature::node_location(std::size_t canonical_index) const {
    return "node[" + std::to_string(canonical_index) + "]:" + nodes.at(canonical_index).op_type;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::InvalidArgument, "SHA-256 computation failed");
    }
    return detail::hex(std::string_view(reinterpret_cast<const char*>(md), len));
}

namespace {

using detail::quote;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    auto [end, ec] = std::to_chars(buf, buf + 16, v, 16);
    return std::string(16 - static_cast<std::size_t>(end - buf), '0') + std::string(buf, end);
}

std::string tensor_ref(std::size_t id) { return id == kAbsentTensor ? "-" : "t" + std::to_string(id); }

struct Builder {
    const Graph& g;
    bool strict;

    std::unordered_map<std::string, std::size_t> producer_node;
    std::unordered_map<std::string, const Initializer*> initializers;
    std::unordered_map<std::string, std::size_t> ids;
    std::vector<std::string> names;
    std::map<std::size_t, InitializerSlot> slots;
    std::vector<std::string> local_key;
    std::vector<std::uint64_t> down_color;

    Builder(const Graph& graph, bool strict_names) : g(graph), strict(strict_names) {
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            for (const auto& out : g.nodes[i].outputs) producer_node.emplace(out, i);
        for (const auto& init : g.initializers) initializers.emplace(init.name, &init);
    }

    std::size_t assign(const std::string& tensor) {
        auto [it, inserted] = ids.emplace(tensor, names.size());
        if (inserted) {
            names.push_back(tensor);
            if (auto init = initializers.find(tensor); init != initializers.end()) {
                const auto& t = *init->second;
                slots[it->second] = {t.dtype, t.dims, t.name,
                                     sha256_hex(std::string_view(reinterpret_cast<const char*>(t.raw.data()),
                                                                 t.raw.size()))};
            }
        }
        return it->second;
    }

    std::string initializer_desc(const Initializer& t) const {
        auto d = "w:" + detail::tensor_desc(t.dtype, t.dims);
        if (strict) d += ":" + quote(t.name);
        return d;
    }

    void compute_local_keys() {
        local_key.resize(g.nodes.size());
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const auto& n = g.nodes[i];
            auto attrs = detail::sorted_attributes(n.attributes);
            std::string k = n.op_type + '\x1f' + n.domain;
            for (const auto& a : attrs) k += '\x1f' + a.name + '=' + detail::render_attribute_value(a);
            if (strict) k += "\x1fname=" + n.name;
            local_key[i] = std::move(k);
        }
    }

    // Refinement from the consumer side: two ready nodes that look identical
    // from their inputs are still told apart by what consumes their results.
    void compute_down_colors(const std::vector<std::size_t>& topo) {
        std::unordered_map<std::string, std::vector<std::string>> uses;
        for (std::size_t pos = 0; pos < g.outputs.size(); ++pos) {
            auto tag = "o:" + std::to_string(pos);
            if (strict) tag += ":" + g.outputs[pos].name;
            uses[g.outputs[pos].name].push_back(tag);
        }
        down_color.assign(g.nodes.size(), 0);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            const auto& n = g.nodes[*it];
            std::string acc = local_key[*it];
            for (const auto& out : n.outputs) {
                auto parts = uses[out];
                std::sort(parts.begin(), parts.end());
                acc += '|';
                for (const auto& p : parts) acc += p + ';';
            }
            down_color[*it] = fnv1a(acc);
            for (std::size_t slot = 0; slot < n.inputs.size(); ++slot) {
                if (n.inputs[slot].empty()) continue;
                uses[n.inputs[slot]].push_back("c:" + hex64(down_color[*it]) + ":" + std::to_string(slot));
            }
        }
    }

    std::string input_desc(const std::string& tensor) const {
        if (tensor.empty()) return "-";
        if (auto it = ids.find(tensor); it != ids.end()) return "t" + std::to_string(it->second);
        if (auto it = initializers.find(tensor); it != initializers.end()) return initializer_desc(*it->second);
        return "?";
    }

    std::string ready_key(std::size_t node) const {
        std::string k = local_key[node] + '\x1e';
        for (const auto& in : g.nodes[node].inputs) k += input_desc(in) + ',';
        return k + '\x1e' + hex64(down_color[node]);
    }

    std::vector<std::size_t> canonical_order() {
        auto topo = topological_order(g);
        compute_local_keys();
        compute_down_colors(topo);

        std::vector<std::size_t> indegree(g.nodes.size(), 0);
        std::vector<std::vector<std::size_t>> consumers(g.nodes.size());
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            for (const auto& in : g.nodes[i].inputs) {
                auto p = producer_node.find(in);
                if (in.empty() || p == producer_node.end()) continue;
                consumers[p->second].push_back(i);
                ++indegree[i];
            }
        }
        std::vector<std::size_t> ready;
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            if (indegree[i] == 0) ready.push_back(i);

        std::vector<std::size_t> order;
        while (!ready.empty()) {
            std::size_t best = 0;
            std::string best_key = ready_key(ready[0]);
            for (std::size_t r = 1; r < ready.size(); ++r) {
                auto k = ready_key(ready[r]);
                if (k < best_key || (k == best_key && ready[r] < ready[best])) {
                    best = r;
                    best_key = std::move(k);
                }
            }
            auto node = ready[best];
            ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(best));
            order.push_back(node);
            for (const auto& in : g.nodes[node].inputs)
                if (!in.empty()) assign(in);
            for (const auto& out : g.nodes[node].outputs) assign(out);
            for (auto c : consumers[node])
                if (--indegree[c] == 0) ready.push_back(c);
        }
        return order;
    }
};

std::string canonical_shape(const std::optional<TensorShape>& shape) {
    if (!shape) return "unknown";
    std::string s = "[";
    for (std::size_t i = 0; i < shape->size(); ++i) {
        if (i) s += ",";
        const auto& d = (*shape)[i];
        s += d.is_symbolic() ? "?" + quote(d.symbol()) : std::to_string(d.extent());
    }
    return s + "]";
}

}  // namespace

ArchitectureSignature extract_signature(const Model& model, SignatureMode mode) {
    validate_model(model);
    const Graph& g = model.graph;
    const bool strict = mode == SignatureMode::StrictNames;

    Builder b(g, strict);
    for (const auto& vi : g.inputs) b.assign(vi.name);
    auto order = b.canonical_order();

    // Initializers no node consumes: ordered by descriptor, then name.
    std::vector<const Initializer*> unused;
    for (const auto& init : g.initializers)
        if (!b.ids.contains(init.name)) unused.push_back(&init);
    std::sort(unused.begin(), unused.end(), [&](const Initializer* x, const Initializer* y) {
        auto dx = detail::tensor_desc(x->dtype, x->dims);
        auto dy = detail::tensor_desc(y->dtype, y->dims);
        return dx != dy ? dx < dy : x->name < y->name;
    });
    for (const auto* init : unused) b.assign(init->name);

    ArchitectureSignature sig;
    sig.mode = mode;
    sig.opset_imports = model.opset_imports;
    for (const auto& vi : g.inputs) sig.inputs.push_back({b.ids.at(vi.name), vi.dtype, vi.shape, vi.name});
    for (const auto& vi : g.outputs) sig.outputs.push_back({b.ids.at(vi.name), vi.dtype, vi.shape, vi.name});
    for (std::size_t c = 0; c < order.size(); ++c) {
        const auto& n = g.nodes[order[c]];
        CanonicalNode cn;
        cn.canonical_id = c;
        cn.op_type = n.op_type;
        cn.domain = n.domain;
        cn.attributes = detail::sorted_attributes(n.attributes);
        for (const auto& in : n.inputs) cn.inputs.push_back(in.empty() ? kAbsentTensor : b.ids.at(in));
        for (const auto& out : n.outputs) cn.outputs.push_back(b.ids.at(out));
        cn.name = n.name;
        cn.original_index = order[c];
        sig.nodes.push_back(std::move(cn));
    }
    sig.initializer_slots = std::move(b.slots);
    sig.tensor_names = std::move(b.names);

    auto named = [&](std::size_t id) {
        auto r = tensor_ref(id);
        if (strict && id != kAbsentTensor) r += "=" + quote(sig.tensor_names[id]);
        return r;
    };

    std::ostringstream out;
    out << "safeai-architecture 1\n";
    out << "mode " << to_string(mode) << "\n";
    for (const auto& [domain, version] : sig.opset_imports) out << "opset " << quote(domain) << " " << version << "\n";
    for (const auto& e : sig.inputs)
        out << "input " << named(e.tensor) << " " << to_string(e.dtype) << " " << canonical_shape(e.shape) << "\n";
    for (const auto& e : sig.outputs)
        out << "output " << named(e.tensor) << " " << to_string(e.dtype) << " " << canonical_shape(e.shape) << "\n";
    for (const auto& n : sig.nodes) {
        out << "node " << n.canonical_id << " " << quote(n.op_type) << " domain " << quote(n.domain);
        if (strict) out << " name " << quote(n.name);
        out << "\n";
        for (const auto& a : n.attributes)
            out << "  attr " << quote(a.name) << " " << detail::render_attribute_value(a) << "\n";
        out << "  in";
        for (auto t : n.inputs) out << " " << named(t);
        out << "\n  out";
        for (auto t : n.outputs) out << " " << named(t);
        out << "\n";
    }
    for (const auto& [id, slot] : sig.initializer_slots)
        out << "initializer " << named(id) << " " << detail::tensor_desc(slot.dtype, slot.dims) << "\n";

    sig.canonical_text = std::move(out).str();
    sig.digest = sha256_hex(sig.canonical_text);
    return sig;
}

std::string render_architecture_report(const ArchitectureSignature& sig) {
    std::ostringstream out;
    auto tensor = [&](std::size_t id) {
        if (id == kAbsentTensor) return std::string("-");
        auto s = tensor_ref(id) + " " + quote(sig.tensor_names[id]);
        if (auto it = sig.initializer_slots.find(id); it != sig.initializer_slots.end())
            s += " (initializer " + detail::tensor_desc(it->second.dtype, it->second.dims) + ")";
        return s;
    };

    out << "ARCHITECTURE REPORT\n";
    out << "mode: " << to_string(sig.mode) << "\n";
    out << "opsets:";
    for (const auto& [domain, version] : sig.opset_imports)
        out << " " << (domain.empty() ? std::string("ai.onnx") : domain) << "=" << version;
    out << "\n\nINTERFACE\n";
    for (std::size_t i = 0; i < sig.inputs.size(); ++i) {
        const auto& e = sig.inputs[i];
        out << "  input[" << i << "]  " << tensor(e.tensor) << " " << to_string(e.dtype) << " "
            << canonical_shape(e.shape) << "\n";
    }
    for (std::size_t i = 0; i < sig.outputs.size(); ++i) {
        const auto& e = sig.outputs[i];
        out << "  output[" << i << "] " << tensor(e.tensor) << " " << to_string(e.dtype) << " "
            << canonical_shape(e.shape) << "\n";
    }
    out << "\nLAYERS (canonical order: " << sig.nodes.size() << ")\n";
    for (const auto& n : sig.nodes) {
        out << "  [" << n.canonical_id << "] " << n.op_type;
        if (!n.domain.empty()) out << " (domain " << quote(n.domain) << ")";
        if (!n.name.empty()) out << " name " << quote(n.name);
        out << "\n";
        for (const auto& a : n.attributes)
            out << "      hyperparameter " << a.name << " = " << detail::render_attribute_value(a) << "\n";
        for (std::size_t s = 0; s < n.inputs.size(); ++s)
            out << "      input[" << s << "]  <- " << tensor(n.inputs[s]) << "\n";
        for (std::size_t s = 0; s < n.outputs.size(); ++s)
            out << "      output[" << s << "] -> " << tensor(n.outputs[s]) << "\n";
    }
    out << "\nTRAINABLE PARAMETER SLOTS (" << sig.initializer_slots.size() << ")\n";
    for (const auto& [id, slot] : sig.initializer_slots)
        out << "  " << tensor_ref(id) << " " << quote(slot.name) << " "
            << detail::tensor_desc(slot.dtype, slot.dims) << "\n";
    out << "\ndigest: " << sig.digest << "\n";
    return std::move(out).str();
}

}  // namespace safeai
