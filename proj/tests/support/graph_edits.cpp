#include "support/graph_edits.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace safeai::testing {

std::string_view to_string(Mutation m) {
    switch (m) {
        case Mutation::NodeAddRemove: return "node add/remove";
        case Mutation::OpTypeChange: return "op_type change";
        case Mutation::AttributeChange: return "attribute change";
        case Mutation::EdgeRewire: return "edge rewire";
        case Mutation::InterfaceChange: return "interface change";
        case Mutation::InitializerReshape: return "initializer reshape";
        case Mutation::OpsetBump: return "opset bump";
    }
    return "?";
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::vector<std::size_t> eligible_nodes(const Model& m, const std::vector<std::string>& protected_nodes) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.graph.nodes.size(); ++i) {
        const auto& n = m.graph.nodes[i];
        if (std::find(protected_nodes.begin(), protected_nodes.end(), n.name) == protected_nodes.end()) out.push_back(i);
    }
    return out;
}

const ValueInfo* info_for(const Model& m, const std::string& tensor) { return m.graph.find_value_info(tensor); }

std::optional<Model> add_node(const Model& model, std::mt19937_64& rng, const std::vector<std::size_t>& sites) {
    if (sites.empty()) return std::nullopt;
    Model m = model;
    const auto& src = m.graph.nodes[sites[pick(rng, sites.size())]];
    auto t = src.outputs[0];
    auto fresh = t + "__mut";
    for (auto& n : m.graph.nodes)
        for (auto& in : n.inputs)
            if (in == t) in = fresh;
    for (auto& o : m.graph.outputs)
        if (o.name == t) o.name = fresh;
    if (const auto* vi = info_for(model, t)) {
        auto copy = *vi;
        copy.name = t;
        std::erase_if(m.graph.value_infos, [&](const ValueInfo& v) { return v.name == t; });
        m.graph.value_infos.push_back(copy);
        bool is_output = std::any_of(m.graph.outputs.begin(), m.graph.outputs.end(),
                                     [&](const ValueInfo& o) { return o.name == fresh; });
        if (!is_output) {
            copy.name = fresh;
            m.graph.value_infos.push_back(copy);
        }
    }
    Node relu;
    relu.name = "mutation_relu";
    relu.op_type = "Relu";
    relu.inputs = {t};
    relu.outputs = {fresh};
    m.graph.nodes.push_back(relu);
    return m;
}

std::optional<Model> remove_node(const Model& model, std::mt19937_64& rng, const std::vector<std::size_t>& sites) {
    std::vector<std::size_t> removable;
    for (auto i : sites) {
        const auto& n = model.graph.nodes[i];
        if ((n.op_type == "Relu" || n.op_type == "Abs") && n.inputs.size() == 1 && n.outputs.size() == 1) {
            removable.push_back(i);
        }
    }
    if (removable.empty()) return std::nullopt;
    Model m = model;
    auto idx = removable[pick(rng, removable.size())];
    auto in = m.graph.nodes[idx].inputs[0];
    auto out = m.graph.nodes[idx].outputs[0];
    m.graph.nodes.erase(m.graph.nodes.begin() + static_cast<std::ptrdiff_t>(idx));
    bool out_is_graph_output = false;
    for (auto& o : m.graph.outputs) out_is_graph_output |= o.name == out;
    bool in_is_graph_io = model.graph.find_initializer(in) != nullptr;
    for (const auto& gi : m.graph.inputs) in_is_graph_io |= gi.name == in;
    for (const auto& go : m.graph.outputs) in_is_graph_io |= go.name == in;
    if (out_is_graph_output && in_is_graph_io) return std::nullopt;
    if (out_is_graph_output) {
        // Keep the interface name: the upstream tensor takes it over.
        rename_tensor(m, in, out);
    } else {
        for (auto& n : m.graph.nodes)
            for (auto& x : n.inputs)
                if (x == out) x = in;
        std::erase_if(m.graph.value_infos, [&](const ValueInfo& v) { return v.name == out; });
    }
    return m;
}

std::optional<Model> change_op(const Model& model, std::mt19937_64& rng, const std::vector<std::size_t>& sites) {
    if (sites.empty()) return std::nullopt;
    static const std::vector<std::string> ops = {"Relu", "Abs", "Sigmoid", "Tanh", "Neg", "Conv", "Gemm", "MaxPool"};
    Model m = model;
    auto& n = m.graph.nodes[sites[pick(rng, sites.size())]];
    std::vector<std::string> choices;
    for (const auto& op : ops)
        if (op != n.op_type) choices.push_back(op);
    n.op_type = choices[pick(rng, choices.size())];
    return m;
}

std::optional<Model> change_attribute(const Model& model, std::mt19937_64& rng, const std::vector<std::size_t>& sites) {
    if (sites.empty()) return std::nullopt;
    Model m = model;
    auto& n = m.graph.nodes[sites[pick(rng, sites.size())]];
    if (n.attributes.empty()) {
        n.attributes.push_back({"mutated", std::int64_t{1}});
        return m;
    }
    auto& a = n.attributes[pick(rng, n.attributes.size())];
    std::visit(
        [&](auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                v += 1;
            } else if constexpr (std::is_same_v<T, float>) {
                v += 0.5f;
            } else if constexpr (std::is_same_v<T, std::string>) {
                v += "x";
            } else if constexpr (std::is_same_v<T, TensorData>) {
                if (v.raw.empty()) v.dims.push_back(0);
                else v.raw[0] ^= 0x01;
            } else {
                if (v.empty()) v.push_back(1);
                else v[pick(rng, v.size())] += 1;
            }
        },
        a.value);
    return m;
}

std::optional<Model> rewire_edge(const Model& model, std::mt19937_64& rng, const std::vector<std::size_t>& sites) {
    const auto& g = model.graph;
    std::unordered_map<std::string, std::size_t> producer;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        for (const auto& o : g.nodes[i].outputs) producer[o] = i;

    struct Option {
        std::size_t node, slot;
        std::string tensor;
    };
    std::vector<Option> options;
    for (auto i : sites) {
        // Descendants of i (including i) must not feed i.
        std::set<std::size_t> desc{i};
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t j = 0; j < g.nodes.size(); ++j) {
                if (desc.contains(j)) continue;
                for (const auto& in : g.nodes[j].inputs) {
                    auto p = producer.find(in);
                    if (p != producer.end() && desc.contains(p->second)) {
                        desc.insert(j);
                        grew = true;
                        break;
                    }
                }
            }
        }
        std::vector<std::string> pool;
        for (const auto& gi : g.inputs) pool.push_back(gi.name);
        for (std::size_t j = 0; j < g.nodes.size(); ++j)
            if (!desc.contains(j))
                for (const auto& o : g.nodes[j].outputs) pool.push_back(o);
        const auto& n = g.nodes[i];
        for (std::size_t s = 0; s < n.inputs.size(); ++s) {
            if (n.inputs[s].empty() || g.find_initializer(n.inputs[s])) continue;
            for (const auto& t : pool)
                if (t != n.inputs[s]) options.push_back({i, s, t});
        }
    }
    if (options.empty()) return std::nullopt;
    Model m = model;
    const auto& o = options[pick(rng, options.size())];
    m.graph.nodes[o.node].inputs[o.slot] = o.tensor;
    return m;
}

std::optional<Model> change_interface(const Model& model, std::mt19937_64& rng) {
    Model m = model;
    auto& list = (rng() % 2 == 0 || m.graph.outputs.empty()) ? m.graph.inputs : m.graph.outputs;
    if (list.empty()) return std::nullopt;
    auto& vi = list[pick(rng, list.size())];
    if (vi.shape && !vi.shape->empty() && !(*vi.shape)[0].is_symbolic()) {
        (*vi.shape)[0] = Dim((*vi.shape)[0].extent() + 1);
    } else {
        vi.dtype = vi.dtype == DataType::Float64 ? DataType::Float32 : DataType::Float64;
    }
    return m;
}

std::optional<Model> reshape_initializer(const Model& model, std::mt19937_64& rng) {
    std::vector<std::size_t> sites;
    for (std::size_t i = 0; i < model.graph.initializers.size(); ++i)
        if (!model.graph.initializers[i].dims.empty()) sites.push_back(i);
    if (sites.empty()) return std::nullopt;
    Model m = model;
    auto& t = m.graph.initializers[sites[pick(rng, sites.size())]];
    if (t.dims.size() >= 2) {
        auto last = t.dims.back();
        t.dims.pop_back();
        t.dims.back() *= last;
    } else {
        t.dims.insert(t.dims.begin(), 1);
    }
    return m;
}

}  // namespace

void rename_tensor(Model& model, const std::string& from, const std::string& to) {
    auto& g = model.graph;
    auto fix = [&](std::string& s) {
        if (s == from) s = to;
    };
    for (auto& vi : g.inputs) fix(vi.name);
    for (auto& vi : g.outputs) fix(vi.name);
    for (auto& vi : g.value_infos) fix(vi.name);
    for (auto& init : g.initializers) fix(init.name);
    for (auto& n : g.nodes) {
        for (auto& in : n.inputs) fix(in);
        for (auto& out : n.outputs) fix(out);
    }
    // A value_info for the surviving name may now be duplicated.
    std::set<std::string> seen;
    std::erase_if(g.value_infos, [&](const ValueInfo& v) { return !seen.insert(v.name).second; });
}

std::optional<Model> mutate(const Model& model, Mutation kind, std::mt19937_64& rng,
                            const std::vector<std::string>& protected_nodes) {
    auto sites = eligible_nodes(model, protected_nodes);
    std::optional<Model> out;
    switch (kind) {
        case Mutation::NodeAddRemove:
            if (rng() % 2 == 0) {
                out = remove_node(model, rng, sites);
                if (!out) out = add_node(model, rng, sites);
            } else {
                out = add_node(model, rng, sites);
            }
            break;
        case Mutation::OpTypeChange: out = change_op(model, rng, sites); break;
        case Mutation::AttributeChange: out = change_attribute(model, rng, sites); break;
        case Mutation::EdgeRewire: out = rewire_edge(model, rng, sites); break;
        case Mutation::InterfaceChange: out = change_interface(model, rng); break;
        case Mutation::InitializerReshape: out = reshape_initializer(model, rng); break;
        case Mutation::OpsetBump: {
            Model m = model;
            m.opset_imports[""] += 1;
            out = m;
            break;
        }
    }
    if (out) validate_model(*out);
    return out;
}

Model perturb_weights(const Model& model, std::mt19937_64& rng) {
    Model m = model;
    std::uniform_real_distribution<float> scale(0.5f, 1.5f);
    std::normal_distribution<float> noise(0.0f, 0.05f);
    for (auto& init : m.graph.initializers) {
        if (init.dtype != DataType::Float32) continue;
        auto v = init.floats();
        for (auto& x : v) x = x * scale(rng) + noise(rng);
        if (!v.empty()) v[0] += 1.0f;
        init.set_floats(v);
    }
    return m;
}

Model shuffle_node_order(const Model& model, std::mt19937_64& rng) {
    const auto& g = model.graph;
    std::unordered_map<std::string, std::size_t> producer;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        for (const auto& o : g.nodes[i].outputs) producer[o] = i;
    std::vector<std::size_t> indegree(g.nodes.size(), 0);
    std::vector<std::vector<std::size_t>> consumers(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        for (const auto& in : g.nodes[i].inputs)
            if (auto p = producer.find(in); p != producer.end()) {
                consumers[p->second].push_back(i);
                ++indegree[i];
            }
    std::vector<std::size_t> ready, order;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (indegree[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
        auto k = pick(rng, ready.size());
        auto i = ready[k];
        ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(k));
        order.push_back(i);
        for (auto c : consumers[i])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    Model m = model;
    m.graph.nodes.clear();
    for (auto i : order) m.graph.nodes.push_back(g.nodes[i]);
    std::shuffle(m.graph.initializers.begin(), m.graph.initializers.end(), rng);
    std::shuffle(m.graph.value_infos.begin(), m.graph.value_infos.end(), rng);
    return m;
}

Model rename_everything(const Model& model, const std::string& tag) {
    Model m = model;
    std::map<std::string, std::string> names;
    auto fresh = [&](const std::string& old) -> const std::string& {
        auto it = names.find(old);
        if (it == names.end()) it = names.emplace(old, tag + "_" + std::to_string(names.size()) + "_r").first;
        return it->second;
    };
    auto& g = m.graph;
    for (auto& vi : g.inputs) vi.name = fresh(vi.name);
    for (auto& init : g.initializers) init.name = fresh(init.name);
    for (auto& n : g.nodes)
        for (auto& o : n.outputs) o = fresh(o);
    for (auto& n : g.nodes)
        for (auto& in : n.inputs)
            if (!in.empty()) in = fresh(in);
    for (auto& vi : g.outputs) vi.name = fresh(vi.name);
    for (auto& vi : g.value_infos) vi.name = fresh(vi.name);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) g.nodes[i].name = tag + "_node_" + std::to_string(g.nodes.size() - i);
    g.name = tag + "_graph";
    return m;
}

}  // namespace safeai::testing
