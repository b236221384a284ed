#include "support/spec_gen.hpp"

#include <unordered_map>

namespace safeai::testing {

namespace {

std::vector<std::size_t> random_topological_order(const Graph& g, std::mt19937_64& rng) {
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
        auto k = static_cast<std::size_t>(rng() % ready.size());
        auto i = ready[k];
        ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(k));
        order.push_back(i);
        for (auto c : consumers[i])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    return order;
}

}  // namespace

PartitionSpec random_spec(const Model& model, std::mt19937_64& rng) {
    const auto& g = model.graph;
    auto order = random_topological_order(g, rng);
    auto cut = 1 + static_cast<std::size_t>(rng() % (order.size() - 1));
    std::vector<bool> reliable(g.nodes.size(), false);
    for (std::size_t k = 0; k < cut; ++k) reliable[order[k]] = true;

    PartitionSpec spec;
    spec.default_target = rng() % 2 ? Target::Reliable : Target::NonReliable;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        auto t = reliable[i] ? Target::Reliable : Target::NonReliable;
        if (t == spec.default_target) continue;
        const auto& n = g.nodes[i];
        bool by_name = !n.name.empty() && rng() % 2 == 0;
        spec.assignments.emplace_back(by_name ? n.name : n.outputs[0], t);
    }

    std::vector<std::size_t> d_nodes(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<std::size_t> convs;
    for (auto i : d_nodes) {
        const auto& n = g.nodes[i];
        if (n.op_type != "Conv") continue;
        const auto* w = g.find_initializer(n.inputs[1]);
        if (w && w->dims.size() == 4 && w->dims[2] >= 3 && w->dims[3] >= 3) convs.push_back(i);
    }
    if (!convs.empty() && rng() % 2 == 0) {
        const auto& n = g.nodes[convs[rng() % convs.size()]];
        auto out_channels = g.find_initializer(n.inputs[1])->dims[0];
        SobelReplace s;
        s.conv_node = n.name;
        s.channel_count = std::min<std::int64_t>(2, out_channels);
        s.first_channel = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(out_channels - s.channel_count + 1));
        spec.safety_insertions.push_back(s);
    }
    if (rng() % 3 != 0) {
        const auto& n = g.nodes[d_nodes[rng() % d_nodes.size()]];
        spec.safety_insertions.push_back(RedundantNode{n.name.empty() ? n.outputs[0] : n.name, 0.0});
    }
    if (rng() % 3 == 0) {
        const auto& n = g.nodes[d_nodes[rng() % d_nodes.size()]];
        spec.safety_insertions.push_back(ExposeTensor{n.outputs[0]});
    }
    return spec;
}

}  // namespace safeai::testing
