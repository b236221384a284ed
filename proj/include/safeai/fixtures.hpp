#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safeai/model.hpp"

namespace safeai {

inline Attribute int_attr(std::string name, std::int64_t v) { return {std::move(name), v}; }
inline Attribute ints_attr(std::string name, std::vector<std::int64_t> v) { return {std::move(name), std::move(v)}; }
inline Attribute float_attr(std::string name, float v) { return {std::move(name), v}; }

// One layer of a chain fixture. `out_channels` is the Conv output-channel
// count or the Gemm output-feature count; other ops ignore it. A Reshape layer
// takes its target shape from an ints attribute named "shape", which becomes
// an int64 initializer input.
struct LayerSpec {
    std::string op_type;
    std::vector<Attribute> attributes;
    std::int64_t out_channels = 0;
};

struct ChainSpec {
    std::vector<std::int64_t> input_shape{1, 3, 8, 8};
    std::vector<LayerSpec> layers;
};

// Single-input, single-output chain with pseudo-random weights derived from
// `seed`. Every intermediate tensor gets a value_info with its concrete shape.
// A Flatten is inserted ahead of a Gemm whose input has rank > 2.
Model build_chain_fixture(const ChainSpec& spec, std::uint64_t seed);

// Random branching DAG of at most `max_nodes` nodes (>= 3) over the runtime's
// operator set. Tensors nobody consumes become graph outputs.
Model build_dag_fixture(std::uint64_t seed, std::size_t max_nodes = 12);

// Conv-Relu-Pool x2, then three Gemm layers and a Softmax, on 1x3x32x32.
ChainSpec lenet_chain_spec();

}  // namespace safeai
