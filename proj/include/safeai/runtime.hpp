#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "safeai/kernels.hpp"
#include "safeai/model.hpp"

namespace safeai {

enum class ExecutionMode { Single, Redundant };

// Flips one bit of one element of one replica's result, before comparison.
struct Fault {
    std::string node;  // node name, or its first output when the node is unnamed
    int replica = 2;   // 1 or 2
    std::size_t element = 0;
    int bit = 0;       // 0..31
};

using FaultPlan = std::optional<Fault>;

// "node:replica:element:bit"; throws InvalidArgument.
Fault parse_fault(std::string_view text);

struct RunOutcome {
    std::map<std::string, Tensor> outputs;
    bool qualifier = true;
    std::map<std::string, bool> node_qualifiers;  // keyed like Fault::node
};

// Node label used by node_qualifiers and Fault::node.
std::string runtime_label(const Node& node);

// Operators: Conv, Relu, MaxPool, Gemm, Flatten, Add, Sub, Abs, ReduceMax,
// Softmax, Reshape. Nodes execute in canonical topological order. Redundant
// mode evaluates each node twice and compares the results bit for bit;
// outputs always come from replica 1.
//
// Throws MissingInput, ShapeMismatch, UnsupportedOp, InvalidArgument (bad
// fault plan or unknown input name) and NonFiniteResult. A non-finite value
// only raises NonFiniteResult while every node so far has agreed: once a
// mismatch is detected the qualifier already reports the fault.
RunOutcome run(const Model& model, const std::map<std::string, Tensor>& inputs, ExecutionMode mode,
               const FaultPlan& faults = std::nullopt);

// Rejects models the runtime cannot execute (UnsupportedOp) without running them.
void check_supported(const Model& model);

}  // namespace safeai
