#pragma once

#include <vector>

#include "safeai/fixtures.hpp"

namespace safeai::testing {

inline ChainSpec conv_relu_gemm_spec() {
    ChainSpec s;
    s.layers = {{"Conv", {ints_attr("kernel_shape", {3, 3})}, 8}, {"Relu", {}, 0}, {"Gemm", {}, 10}};
    return s;
}

inline ChainSpec conv_pool_spec() {
    ChainSpec s;
    s.layers = {{"Conv", {ints_attr("kernel_shape", {3, 3}), ints_attr("pads", {1, 1, 1, 1})}, 4},
                {"Relu", {}, 0},
                {"MaxPool", {ints_attr("kernel_shape", {2, 2}), ints_attr("strides", {2, 2})}, 0},
                {"Gemm", {}, 5},
                {"Softmax", {int_attr("axis", 1)}, 0}};
    return s;
}

// Chains and DAGs used by the property suites. Always at least 10 models.
inline std::vector<Model> fixture_corpus(std::size_t dag_count = 8) {
    std::vector<Model> out;
    out.push_back(build_chain_fixture(conv_relu_gemm_spec(), 7));
    out.push_back(build_chain_fixture(conv_pool_spec(), 11));
    out.push_back(build_chain_fixture(lenet_chain_spec(), 5));
    for (std::uint64_t seed = 1; seed <= dag_count; ++seed) out.push_back(build_dag_fixture(seed * 101));
    return out;
}

}  // namespace safeai::testing
