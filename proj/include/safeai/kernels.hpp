#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace safeai {

// Float32 tensor with concrete row-major extents.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> shape_, std::vector<float> data_);
    static Tensor zeros(std::vector<std::int64_t> shape_);

    std::size_t size() const { return data.size(); }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape.size()); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(std::span<const std::int64_t> shape);

// Bitwise comparison: NaN payloads and signed zeros count.
bool bitwise_equal(const Tensor& a, const Tensor& b);

// Every kernel below iterates in one fixed order, so two evaluations on the
// same inputs produce identical bits. All throw ShapeMismatch on inconsistent
// operands.

struct ConvParams {
    std::array<std::int64_t, 2> strides{1, 1};
    std::array<std::int64_t, 4> pads{0, 0, 0, 0};  // top, left, bottom, right
};

// N x C x H x W input, O x C x Kh x Kw weight, optional O bias. Accumulates
// c, then i, then j into a zeroed float, then adds the bias.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor* bias, const ConvParams& params);

struct PoolParams {
    std::array<std::int64_t, 2> kernel{2, 2};
    std::array<std::int64_t, 2> strides{1, 1};
    std::array<std::int64_t, 4> pads{0, 0, 0, 0};
};

// Padding cells never win; output uses floor rounding.
Tensor maxpool2d(const Tensor& input, const PoolParams& params);

struct GemmParams {
    float alpha = 1.0f;
    float beta = 1.0f;
    bool trans_a = false;
    bool trans_b = false;
};

// alpha * (A B) + beta * C with C broadcast to M x N. The dot product
// accumulates k in ascending order.
Tensor gemm(const Tensor& a, const Tensor& b, const Tensor* c, const GemmParams& params);

Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
// Multidirectional (numpy) broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor flatten(const Tensor& x, std::int64_t axis);
// Along a single axis: subtract the max, exponentiate, divide by the sum.
Tensor softmax(const Tensor& x, std::int64_t axis);
// Empty `axes` reduces every axis.
Tensor reduce_max(const Tensor& x, std::vector<std::int64_t> axes, bool keepdims);
// ONNX Reshape semantics with allowzero = 0: 0 copies the input extent, -1 is inferred.
Tensor reshape(const Tensor& x, std::span<const std::int64_t> target);

}  // namespace safeai
