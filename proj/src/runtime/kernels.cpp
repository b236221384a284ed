#include "safeai/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <string>

#include "safeai/error.hpp"

namespace safeai {

namespace {

[[noreturn]] void shape_error(const std::string& msg) { throw Error(ErrorKind::ShapeMismatch, msg); }

std::string shape_text(const std::vector<std::int64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

std::int64_t normalize_axis(std::int64_t axis, std::int64_t rank, const char* op) {
    if (axis < -rank || axis >= rank + (std::string_view(op) == "Flatten" ? 1 : 0))
        shape_error(std::string(op) + " axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
    return axis < 0 ? axis + rank : axis;
}

template <typename F>
Tensor unary(const Tensor& x, F f) {
    Tensor out = x;
    for (auto& v : out.data) v = f(v);
    return out;
}

template <typename F>
Tensor broadcast(const Tensor& a, const Tensor& b, F f, const char* op) {
    auto rank = std::max(a.shape.size(), b.shape.size());
    std::vector<std::int64_t> out_shape(rank);
    std::vector<std::int64_t> as(rank, 1), bs(rank, 1);
    std::copy(a.shape.begin(), a.shape.end(), as.begin() + static_cast<std::ptrdiff_t>(rank - a.shape.size()));
    std::copy(b.shape.begin(), b.shape.end(), bs.begin() + static_cast<std::ptrdiff_t>(rank - b.shape.size()));
    for (std::size_t d = 0; d < rank; ++d) {
        if (as[d] != bs[d] && as[d] != 1 && bs[d] != 1)
            shape_error(std::string(op) + " cannot broadcast " + shape_text(a.shape) + " with " + shape_text(b.shape));
        out_shape[d] = as[d] == 1 ? bs[d] : as[d];
    }
    // Strides with 0 on broadcast axes.
    std::vector<std::int64_t> astride(rank, 0), bstride(rank, 0);
    std::int64_t sa = 1, sb = 1;
    for (std::size_t d = rank; d-- > 0;) {
        astride[d] = as[d] == 1 ? 0 : sa;
        bstride[d] = bs[d] == 1 ? 0 : sb;
        sa *= as[d];
        sb *= bs[d];
    }
    Tensor out = Tensor::zeros(out_shape);
    std::vector<std::int64_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::int64_t ia = 0, ib = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            ia += idx[d] * astride[d];
            ib += idx[d] * bstride[d];
        }
        out.data[flat] = f(a.data[static_cast<std::size_t>(ia)], b.data[static_cast<std::size_t>(ib)]);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

}  // namespace

std::size_t element_count(std::span<const std::int64_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d < 0) shape_error("negative extent");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<std::int64_t> shape_, std::vector<float> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (element_count(shape) != data.size())
        shape_error("shape " + shape_text(shape) + " needs " + std::to_string(element_count(shape)) + " values, got " +
                    std::to_string(data.size()));
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape_) {
    auto n = element_count(shape_);
    return Tensor(std::move(shape_), std::vector<float>(n, 0.0f));
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape &&
           (a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor* bias, const ConvParams& p) {
    if (input.rank() != 4 || weight.rank() != 4) shape_error("Conv expects rank-4 input and weight");
    const auto N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const auto O = weight.shape[0], Kh = weight.shape[2], Kw = weight.shape[3];
    if (weight.shape[1] != C)
        shape_error("Conv weight " + shape_text(weight.shape) + " does not match input " + shape_text(input.shape));
    if (bias && (bias->rank() != 1 || bias->shape[0] != O)) shape_error("Conv bias must have " + std::to_string(O) + " entries");
    const auto [sh, sw] = p.strides;
    const auto [pt, pl, pb, pr] = p.pads;
    if (sh < 1 || sw < 1) shape_error("Conv strides must be >= 1");
    const auto Hp = H + pt + pb, Wp = W + pl + pr;
    if (Hp < Kh || Wp < Kw) shape_error("Conv kernel larger than padded input");
    const auto OH = (Hp - Kh) / sh + 1, OW = (Wp - Kw) / sw + 1;

    Tensor out = Tensor::zeros({N, O, OH, OW});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < O; ++o)
            for (std::int64_t y = 0; y < OH; ++y)
                for (std::int64_t x = 0; x < OW; ++x) {
                    float acc = 0.0f;
                    for (std::int64_t c = 0; c < C; ++c)
                        for (std::int64_t i = 0; i < Kh; ++i) {
                            const auto iy = y * sh + i - pt;
                            if (iy < 0 || iy >= H) continue;
                            for (std::int64_t j = 0; j < Kw; ++j) {
                                const auto ix = x * sw + j - pl;
                                if (ix < 0 || ix >= W) continue;
                                acc += input.data[static_cast<std::size_t>(((n * C + c) * H + iy) * W + ix)] *
                                       weight.data[static_cast<std::size_t>(((o * C + c) * Kh + i) * Kw + j)];
                            }
                        }
                    if (bias) acc = acc + bias->data[static_cast<std::size_t>(o)];
                    out.data[static_cast<std::size_t>(((n * O + o) * OH + y) * OW + x)] = acc;
                }
    return out;
}

Tensor maxpool2d(const Tensor& input, const PoolParams& p) {
    if (input.rank() != 4) shape_error("MaxPool expects a rank-4 input");
    const auto N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const auto [kh, kw] = p.kernel;
    const auto [sh, sw] = p.strides;
    const auto [pt, pl, pb, pr] = p.pads;
    if (kh < 1 || kw < 1 || sh < 1 || sw < 1) shape_error("MaxPool kernel and strides must be >= 1");
    const auto Hp = H + pt + pb, Wp = W + pl + pr;
    if (Hp < kh || Wp < kw) shape_error("MaxPool kernel larger than padded input");
    const auto OH = (Hp - kh) / sh + 1, OW = (Wp - kw) / sw + 1;

    Tensor out = Tensor::zeros({N, C, OH, OW});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t y = 0; y < OH; ++y)
                for (std::int64_t x = 0; x < OW; ++x) {
                    float best = -std::numeric_limits<float>::infinity();
                    for (std::int64_t i = 0; i < kh; ++i) {
                        const auto iy = y * sh + i - pt;
                        if (iy < 0 || iy >= H) continue;
                        for (std::int64_t j = 0; j < kw; ++j) {
                            const auto ix = x * sw + j - pl;
                            if (ix < 0 || ix >= W) continue;
                            best = std::max(best, input.data[static_cast<std::size_t>(((n * C + c) * H + iy) * W + ix)]);
                        }
                    }
                    out.data[static_cast<std::size_t>(((n * C + c) * OH + y) * OW + x)] = best;
                }
    return out;
}

Tensor gemm(const Tensor& a, const Tensor& b, const Tensor* c, const GemmParams& p) {
    if (a.rank() != 2 || b.rank() != 2) shape_error("Gemm expects rank-2 A and B");
    const auto M = p.trans_a ? a.shape[1] : a.shape[0];
    const auto K = p.trans_a ? a.shape[0] : a.shape[1];
    const auto Kb = p.trans_b ? b.shape[1] : b.shape[0];
    const auto N = p.trans_b ? b.shape[0] : b.shape[1];
    if (K != Kb) shape_error("Gemm inner dimensions differ: " + shape_text(a.shape) + " x " + shape_text(b.shape));

    std::int64_t crow = 0, ccol = 0;  // strides into C, 0 on broadcast axes
    if (c) {
        const auto& cs = c->shape;
        if (cs.size() > 2) shape_error("Gemm C must have rank <= 2");
        std::int64_t cm = cs.size() == 2 ? cs[0] : 1;
        std::int64_t cn = cs.empty() ? 1 : cs.back();
        if ((cm != 1 && cm != M) || (cn != 1 && cn != N))
            shape_error("Gemm C " + shape_text(cs) + " does not broadcast to [" + std::to_string(M) + "," + std::to_string(N) + "]");
        ccol = cn == 1 ? 0 : 1;
        crow = cm == 1 ? 0 : cn;
    }

    Tensor out = Tensor::zeros({M, N});
    for (std::int64_t m = 0; m < M; ++m)
        for (std::int64_t n = 0; n < N; ++n) {
            float acc = 0.0f;
            for (std::int64_t k = 0; k < K; ++k) {
                const float av = a.data[static_cast<std::size_t>(p.trans_a ? k * M + m : m * K + k)];
                const float bv = b.data[static_cast<std::size_t>(p.trans_b ? n * K + k : k * N + n)];
                acc += av * bv;
            }
            float v = p.alpha == 1.0f ? acc : p.alpha * acc;
            if (c) {
                const float cv = c->data[static_cast<std::size_t>(m * crow + n * ccol)];
                v = v + (p.beta == 1.0f ? cv : p.beta * cv);
            }
            out.data[static_cast<std::size_t>(m * N + n)] = v;
        }
    return out;
}

Tensor relu(const Tensor& x) {
    return unary(x, [](float v) { return v > 0.0f ? v : 0.0f; });
}

Tensor abs(const Tensor& x) {
    return unary(x, [](float v) { return std::fabs(v); });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return broadcast(a, b, [](float x, float y) { return x + y; }, "Add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return broadcast(a, b, [](float x, float y) { return x - y; }, "Sub");
}

Tensor flatten(const Tensor& x, std::int64_t axis) {
    axis = normalize_axis(axis, x.rank(), "Flatten");
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t d = 0; d < x.rank(); ++d) (d < axis ? outer : inner) *= x.shape[static_cast<std::size_t>(d)];
    return Tensor({outer, inner}, x.data);
}

Tensor softmax(const Tensor& x, std::int64_t axis) {
    axis = normalize_axis(axis, x.rank(), "Softmax");
    std::int64_t outer = 1, len = x.shape[static_cast<std::size_t>(axis)], inner = 1;
    for (std::int64_t d = 0; d < axis; ++d) outer *= x.shape[static_cast<std::size_t>(d)];
    for (std::int64_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape[static_cast<std::size_t>(d)];
    Tensor out = x;
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < inner; ++i) {
            auto at = [&](std::int64_t k) { return static_cast<std::size_t>((o * len + k) * inner + i); };
            float mx = -std::numeric_limits<float>::infinity();
            for (std::int64_t k = 0; k < len; ++k) mx = std::max(mx, x.data[at(k)]);
            std::vector<double> e(static_cast<std::size_t>(len));
            double sum = 0.0;
            for (std::int64_t k = 0; k < len; ++k) {
                e[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(x.data[at(k)]) - static_cast<double>(mx));
                sum += e[static_cast<std::size_t>(k)];
            }
            for (std::int64_t k = 0; k < len; ++k) out.data[at(k)] = static_cast<float>(e[static_cast<std::size_t>(k)] / sum);
        }
    return out;
}

Tensor reduce_max(const Tensor& x, std::vector<std::int64_t> axes, bool keepdims) {
    const auto rank = x.rank();
    std::vector<bool> reduce(static_cast<std::size_t>(rank), axes.empty());
    for (auto a : axes) reduce[static_cast<std::size_t>(normalize_axis(a, rank, "ReduceMax"))] = true;

    std::vector<std::int64_t> kept;  // shape with reduced axes set to 1
    for (std::int64_t d = 0; d < rank; ++d) kept.push_back(reduce[static_cast<std::size_t>(d)] ? 1 : x.shape[static_cast<std::size_t>(d)]);
    Tensor out = Tensor::zeros(kept);
    std::fill(out.data.begin(), out.data.end(), -std::numeric_limits<float>::infinity());

    std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
    for (std::size_t flat = 0; flat < x.size(); ++flat) {
        std::int64_t o = 0;
        for (std::int64_t d = 0; d < rank; ++d) {
            auto ud = static_cast<std::size_t>(d);
            o = o * kept[ud] + (reduce[ud] ? 0 : idx[ud]);
        }
        auto& slot = out.data[static_cast<std::size_t>(o)];
        const float v = x.data[flat];
        if (v > slot || std::isnan(v)) slot = v;
        for (auto d = static_cast<std::size_t>(rank); d-- > 0;) {
            if (++idx[d] < x.shape[d]) break;
            idx[d] = 0;
        }
    }
    if (!keepdims) {
        std::vector<std::int64_t> squeezed;
        for (std::int64_t d = 0; d < rank; ++d)
            if (!reduce[static_cast<std::size_t>(d)]) squeezed.push_back(x.shape[static_cast<std::size_t>(d)]);
        out.shape = squeezed;
    }
    return out;
}

Tensor reshape(const Tensor& x, std::span<const std::int64_t> target) {
    std::vector<std::int64_t> shape(target.begin(), target.end());
    std::int64_t known = 1;
    std::optional<std::size_t> infer;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (shape[d] == 0) {
            if (d >= x.shape.size()) shape_error("Reshape copies a missing input dimension");
            shape[d] = x.shape[d];
        }
        if (shape[d] == -1) {
            if (infer) shape_error("Reshape has more than one -1");
            infer = d;
        } else if (shape[d] < 0) {
            shape_error("Reshape extent " + std::to_string(shape[d]) + " is invalid");
        } else {
            known *= shape[d];
        }
    }
    if (infer) {
        if (known == 0 || static_cast<std::int64_t>(x.size()) % known != 0)
            shape_error("Reshape cannot infer -1 for " + std::to_string(x.size()) + " values");
        shape[*infer] = static_cast<std::int64_t>(x.size()) / known;
    }
    if (element_count(shape) != x.size())
        shape_error("Reshape " + shape_text(x.shape) + " -> " + shape_text(shape) + " changes the element count");
    return Tensor(shape, x.data);
}

}  // namespace safeai
