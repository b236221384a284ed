#include <cstring>

#include "doctest.h"
#include "safeai/error.hpp"
#include "safeai/fixtures.hpp"
#include "safeai/onnx_io.hpp"
#include "support/temp_dir.hpp"
#include "model_io/protowire.hpp"

using namespace safeai;

namespace {

Model relu_model() {
    Model m;
    m.opset_imports[""] = 13;
    m.graph.name = "relu";
    m.graph.inputs.push_back({"x", DataType::Float32, TensorShape{1, 4}});
    m.graph.outputs.push_back({"y", DataType::Float32, TensorShape{1, 4}});
    Node n;
    n.op_type = "Relu";
    n.inputs = {"x"};
    n.outputs = {"y"};
    m.graph.nodes.push_back(n);
    return m;
}

Model parse_bytes(const std::string& bytes) {
    return parse_model(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("minimal Relu model round-trips through a file") {
    testing::TempDir dir;
    save_model(relu_model(), dir / "relu.onnx");
    auto m = load_model(dir / "relu.onnx");
    CHECK(m.graph.nodes.size() == 1);
    CHECK(m.graph.inputs.size() == 1);
    CHECK(m.graph.outputs.size() == 1);
    CHECK(m.graph.nodes[0].name.empty());
    CHECK(m == relu_model());
}

TEST_CASE("truncated file is a ParseError") {
    auto bytes = serialize_model(build_chain_fixture(lenet_chain_spec(), 3));
    for (std::size_t cut : {bytes.size() / 2, bytes.size() / 3, std::size_t{5}}) {
        CHECK(kind_of([&] { parse_bytes(bytes.substr(0, cut)); }) == ErrorKind::Parse);
    }
}

TEST_CASE("two-node cycle is InvalidGraph") {
    auto m = relu_model();
    Node n1, n2;
    n1.op_type = n2.op_type = "Relu";
    n1.name = "n1";
    n2.name = "n2";
    n1.inputs = {"b"};
    n1.outputs = {"a"};
    n2.inputs = {"a"};
    n2.outputs = {"b"};
    m.graph.nodes.push_back(n1);
    m.graph.nodes.push_back(n2);
    CHECK(kind_of([&] { parse_bytes(serialize_model(m)); }) == ErrorKind::InvalidGraph);
}

TEST_CASE("dangling input and duplicate producer are InvalidGraph") {
    auto dangling = relu_model();
    dangling.graph.nodes[0].inputs = {"nowhere"};
    CHECK(kind_of([&] { validate_model(dangling); }) == ErrorKind::InvalidGraph);

    auto dup = relu_model();
    dup.graph.nodes.push_back(dup.graph.nodes[0]);
    CHECK(kind_of([&] { validate_model(dup); }) == ErrorKind::InvalidGraph);

    auto no_out = relu_model();
    no_out.graph.outputs[0].name = "z";
    CHECK(kind_of([&] { validate_model(no_out); }) == ErrorKind::InvalidGraph);
}

TEST_CASE("unsupported features are rejected at load") {
    SUBCASE("element type") {
        auto m = relu_model();
        auto bytes = serialize_model(m);
        // float16 (10) is outside the accepted subset; patch the elem_type byte.
        m.graph.inputs[0].dtype = DataType::Float64;
        auto patched = serialize_model(m);
        auto pos = patched.find(std::string("\x08\x0b", 2));
        REQUIRE(pos != std::string::npos);
        patched[pos + 1] = 10;
        CHECK(kind_of([&] { parse_bytes(patched); }) == ErrorKind::UnsupportedFeature);
    }
    SUBCASE("control flow") {
        auto m = relu_model();
        m.graph.nodes[0].op_type = "Loop";
        CHECK(kind_of([&] { parse_bytes(serialize_model(m)); }) == ErrorKind::UnsupportedFeature);
    }
    SUBCASE("old opset") {
        auto m = relu_model();
        m.opset_imports[""] = 11;
        CHECK(kind_of([&] { parse_bytes(serialize_model(m)); }) == ErrorKind::UnsupportedFeature);
    }
}

TEST_CASE("save rejects duplicate metadata keys before writing") {
    testing::TempDir dir;
    auto m = relu_model();
    m.metadata_props = {{"k", "1"}, {"k", "2"}};
    CHECK(kind_of([&] { save_model(m, dir / "dup.onnx"); }) == ErrorKind::InvalidModel);
    CHECK_FALSE(std::filesystem::exists(dir / "dup.onnx"));
}

TEST_CASE("missing file is an IoError") {
    CHECK(kind_of([] { load_model("/nonexistent/model.onnx"); }) == ErrorKind::Io);
}

TEST_CASE("chain fixture: Conv 3->8 k3, Relu, Gemm ->10") {
    ChainSpec spec;
    spec.layers = {{"Conv", {ints_attr("kernel_shape", {3, 3})}, 8}, {"Relu", {}, 0}, {"Gemm", {}, 10}};
    auto m = build_chain_fixture(spec, 7);
    // Gemm needs a rank-2 operand, so a Flatten is inserted ahead of it.
    REQUIRE(m.graph.nodes.size() == 4);
    CHECK(m.graph.nodes[0].op_type == "Conv");
    CHECK(m.graph.nodes[2].op_type == "Flatten");
    const auto* w = m.graph.find_initializer(m.graph.nodes[0].inputs[1]);
    REQUIRE(w != nullptr);
    CHECK(w->dims == std::vector<std::int64_t>{8, 3, 3, 3});
    CHECK(m.graph.outputs[0].shape == TensorShape{1, 10});

    SUBCASE("same seed gives byte-identical files") {
        CHECK(serialize_model(build_chain_fixture(spec, 7)) == serialize_model(m));
    }
    SUBCASE("different seed changes values only") {
        auto other = build_chain_fixture(spec, 8);
        CHECK(other.graph.initializers[0].dims == m.graph.initializers[0].dims);
        CHECK(other.graph.initializers[0].raw != m.graph.initializers[0].raw);
    }
}

TEST_CASE("fixture rejects ops outside the runtime set") {
    ChainSpec spec;
    spec.layers = {{"Sigmoid", {}, 0}};
    CHECK(kind_of([&] { build_chain_fixture(spec, 1); }) == ErrorKind::UnsupportedFeature);
}

TEST_CASE("DAG fixtures are valid and deterministic") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto m = build_dag_fixture(seed);
        CHECK_NOTHROW(validate_model(m));
        CHECK(m.graph.nodes.size() <= 12);
        CHECK(m.graph.nodes.size() >= 2);
        auto bytes = serialize_model(m);
        CHECK(parse_bytes(bytes) == m);
        CHECK(serialize_model(build_dag_fixture(seed)) == bytes);
    }
}

TEST_CASE("typed payload fields decode to the same bytes as raw_data") {
    // Hand-encoded model whose initializer uses packed float_data and an
    // unpacked dims list, as other ONNX writers emit them.
    wire::Writer tensor;
    tensor.int_field(1, 2);
    tensor.int_field(2, 1);
    float vals[2] = {1.5f, -2.0f};
    tensor.bytes_field(4, std::string_view(reinterpret_cast<const char*>(vals), sizeof vals));
    tensor.bytes_field(8, "w");

    wire::Writer node;
    node.bytes_field(1, "x");
    node.bytes_field(2, "y");
    node.bytes_field(4, "Relu");

    auto vi = [](const char* name) {
        wire::Writer tt, type, v;
        tt.int_field(1, 1);
        type.message_field(1, tt);
        v.bytes_field(1, name);
        v.message_field(2, type);
        return v;
    };
    wire::Writer graph, opset, model;
    graph.message_field(1, node);
    graph.message_field(5, tensor);
    graph.message_field(11, vi("x"));
    graph.message_field(12, vi("y"));
    opset.int_field(2, 13);
    model.int_field(1, 8);
    model.message_field(7, graph);
    model.message_field(8, opset);

    auto m = parse_bytes(model.data());
    REQUIRE(m.graph.initializers.size() == 1);
    CHECK(m.graph.initializers[0].floats() == std::vector<float>{1.5f, -2.0f});
    CHECK(m.graph.initializers[0] == TensorData::from_floats("w", {2}, vals));
    CHECK_FALSE(m.graph.inputs[0].shape.has_value());
}
