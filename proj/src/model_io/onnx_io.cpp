#include "safeai/onnx_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "protowire.hpp"
#include "safeai/error.hpp"

namespace safeai {

namespace {

using wire::Field;
using wire::Reader;
using wire::WireType;
using wire::Writer;

[[noreturn]] void unsupported(const std::string& msg) {
    throw Error(ErrorKind::UnsupportedFeature, msg);
}

void expect(const Field& f, WireType type, const char* what) {
    if (f.type != type) {
        Reader::fail(std::string("unexpected wire type for ") + what + " (field " +
                     std::to_string(f.number) + ")");
    }
}

// Repeated scalar fields may arrive packed (one Length field) or unpacked.
template <typename Fn>
void for_each_varint(const Field& f, Fn&& fn) {
    if (f.type == WireType::Varint) {
        fn(f.varint);
    } else if (f.type == WireType::Length) {
        Reader r(f.bytes);
        while (!r.at_end()) fn(r.read_varint());
    } else {
        Reader::fail("expected varint or packed varints in field " + std::to_string(f.number));
    }
}

template <typename Fn>
void for_each_fixed(const Field& f, std::size_t width, Fn&& fn) {
    auto scalar = width == 4 ? WireType::Fixed32 : WireType::Fixed64;
    if (f.type == scalar) {
        fn(f.varint);
    } else if (f.type == WireType::Length) {
        Reader r(f.bytes);
        while (!r.at_end()) fn(r.read_fixed(width));
    } else {
        Reader::fail("expected fixed-width values in field " + std::to_string(f.number));
    }
}

template <typename T>
void append_bytes(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

// ---------------------------------------------------------------------------
// Decoding

TensorData parse_tensor(std::span<const std::uint8_t> bytes) {
    TensorData t;
    std::int32_t code = 0;
    bool has_raw = false;
    std::vector<std::uint64_t> ints;
    std::vector<std::uint64_t> fixed32s;
    std::vector<std::uint64_t> fixed64s;
    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        switch (f.number) {
            case 1: for_each_varint(f, [&](std::uint64_t v) { t.dims.push_back(static_cast<std::int64_t>(v)); }); break;
            case 2: expect(f, WireType::Varint, "data_type"); code = static_cast<std::int32_t>(f.varint); break;
            case 3: unsupported("segmented tensors");
            case 4: for_each_fixed(f, 4, [&](std::uint64_t v) { fixed32s.push_back(v); }); break;
            case 5:
            case 7:
            case 11: for_each_varint(f, [&](std::uint64_t v) { ints.push_back(v); }); break;
            case 6: unsupported("string tensors");
            case 8: expect(f, WireType::Length, "tensor name"); t.name = std::string(f.text()); break;
            case 9:
                expect(f, WireType::Length, "raw_data");
                t.raw.assign(f.bytes.begin(), f.bytes.end());
                has_raw = true;
                break;
            case 10: for_each_fixed(f, 8, [&](std::uint64_t v) { fixed64s.push_back(v); }); break;
            case 13: unsupported("external tensor data ('" + t.name + "')");
            case 14:
                if (f.varint != 0) unsupported("external tensor data ('" + t.name + "')");
                break;
            default: break;
        }
    }
    auto dtype = data_type_from_onnx(code);
    if (!dtype) unsupported("tensor '" + t.name + "' has element type " + std::to_string(code));
    t.dtype = *dtype;
    if (has_raw) return t;

    switch (t.dtype) {
        case DataType::Float32:
            for (auto v : fixed32s) append_bytes(t.raw, static_cast<std::uint32_t>(v));
            break;
        case DataType::Float64:
            for (auto v : fixed64s) append_bytes(t.raw, v);
            break;
        case DataType::Int64:
            for (auto v : ints) append_bytes(t.raw, v);
            break;
        case DataType::Int32:
            for (auto v : ints) append_bytes(t.raw, static_cast<std::uint32_t>(v));
            break;
        case DataType::Uint8:
        case DataType::Bool:
            for (auto v : ints) t.raw.push_back(static_cast<std::uint8_t>(v));
            break;
    }
    return t;
}

TensorShape parse_shape(std::span<const std::uint8_t> bytes) {
    TensorShape shape;
    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        if (f.number != 1) continue;
        expect(f, WireType::Length, "dimension");
        Dim d{std::string()};
        Reader dr(f.bytes);
        while (!dr.at_end()) {
            auto df = dr.next();
            if (df.number == 1) {
                expect(df, WireType::Varint, "dim_value");
                d = Dim(static_cast<std::int64_t>(df.varint));
            } else if (df.number == 2) {
                expect(df, WireType::Length, "dim_param");
                d = Dim(std::string(df.text()));
            }
        }
        shape.push_back(std::move(d));
    }
    return shape;
}

// Returns false when the ValueInfoProto carries no type at all.
bool parse_value_info(std::span<const std::uint8_t> bytes, ValueInfo& vi) {
    bool typed = false;
    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        if (f.number == 1) {
            expect(f, WireType::Length, "value name");
            vi.name = std::string(f.text());
        } else if (f.number == 2) {
            expect(f, WireType::Length, "type");
            Reader tr(f.bytes);
            while (!tr.at_end()) {
                auto tf = tr.next();
                if (tf.number == 4 || tf.number == 5 || tf.number == 8 || tf.number == 9) {
                    unsupported("non-tensor type for value '" + vi.name + "'");
                }
                if (tf.number != 1) continue;
                expect(tf, WireType::Length, "tensor_type");
                typed = true;
                std::int32_t code = 0;
                Reader ttr(tf.bytes);
                while (!ttr.at_end()) {
                    auto ttf = ttr.next();
                    if (ttf.number == 1) {
                        expect(ttf, WireType::Varint, "elem_type");
                        code = static_cast<std::int32_t>(ttf.varint);
                    } else if (ttf.number == 2) {
                        expect(ttf, WireType::Length, "shape");
                        vi.shape = parse_shape(ttf.bytes);
                    }
                }
                auto dtype = data_type_from_onnx(code);
                if (!dtype) unsupported("value '" + vi.name + "' has element type " + std::to_string(code));
                vi.dtype = *dtype;
            }
        }
    }
    return typed;
}

Attribute parse_attribute(std::span<const std::uint8_t> bytes) {
    Attribute a;
    std::int32_t type = 0;
    std::optional<float> f_val;
    std::optional<std::int64_t> i_val;
    std::optional<std::string> s_val;
    std::optional<TensorData> t_val;
    std::vector<float> floats;
    std::vector<std::int64_t> ints;
    bool saw_floats = false;
    bool saw_ints = false;

    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        switch (f.number) {
            case 1: expect(f, WireType::Length, "attribute name"); a.name = std::string(f.text()); break;
            case 2: expect(f, WireType::Fixed32, "attribute f"); f_val = f.as_float(); break;
            case 3: expect(f, WireType::Varint, "attribute i"); i_val = static_cast<std::int64_t>(f.varint); break;
            case 4: expect(f, WireType::Length, "attribute s"); s_val = std::string(f.text()); break;
            case 5: expect(f, WireType::Length, "attribute t"); t_val = parse_tensor(f.bytes); break;
            case 6:
            case 11: unsupported("subgraph attribute '" + a.name + "'");
            case 7:
                saw_floats = true;
                for_each_fixed(f, 4, [&](std::uint64_t v) {
                    Field tmp;
                    tmp.varint = v;
                    floats.push_back(tmp.as_float());
                });
                break;
            case 8:
                saw_ints = true;
                for_each_varint(f, [&](std::uint64_t v) { ints.push_back(static_cast<std::int64_t>(v)); });
                break;
            case 9: unsupported("string-list attribute '" + a.name + "'");
            case 10: unsupported("tensor-list attribute '" + a.name + "'");
            case 14:
            case 15: unsupported("type-proto attribute '" + a.name + "'");
            case 21: unsupported("reference attribute '" + a.name + "'");
            case 22:
            case 23: unsupported("sparse tensor attribute '" + a.name + "'");
            case 20: expect(f, WireType::Varint, "attribute type"); type = static_cast<std::int32_t>(f.varint); break;
            default: break;
        }
    }

    if (type == 0) {  // pre-IR-v3 files may omit the discriminator
        if (f_val) type = 1;
        else if (i_val) type = 2;
        else if (s_val) type = 3;
        else if (t_val) type = 4;
        else if (saw_floats) type = 6;
        else if (saw_ints) type = 7;
    }
    switch (type) {
        case 1: a.value = f_val.value_or(0.0f); break;
        case 2: a.value = i_val.value_or(0); break;
        case 3: a.value = s_val.value_or(std::string()); break;
        case 4:
            if (!t_val) Reader::fail("tensor attribute '" + a.name + "' without payload");
            a.value = std::move(*t_val);
            break;
        case 6: a.value = std::move(floats); break;
        case 7: a.value = std::move(ints); break;
        default: unsupported("attribute '" + a.name + "' of type " + std::to_string(type));
    }
    return a;
}

Node parse_node(std::span<const std::uint8_t> bytes) {
    Node n;
    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        switch (f.number) {
            case 1: expect(f, WireType::Length, "node input"); n.inputs.emplace_back(f.text()); break;
            case 2: expect(f, WireType::Length, "node output"); n.outputs.emplace_back(f.text()); break;
            case 3: expect(f, WireType::Length, "node name"); n.name = std::string(f.text()); break;
            case 4: expect(f, WireType::Length, "op_type"); n.op_type = std::string(f.text()); break;
            case 5: expect(f, WireType::Length, "attribute"); n.attributes.push_back(parse_attribute(f.bytes)); break;
            case 6: expect(f, WireType::Length, "node doc_string"); n.doc_string = std::string(f.text()); break;
            case 7: expect(f, WireType::Length, "domain"); n.domain = std::string(f.text()); break;
            case 8: unsupported("function overloads on node '" + n.name + "'");
            default: break;
        }
    }
    if ((n.domain.empty() || n.domain == "ai.onnx") &&
        (n.op_type == "If" || n.op_type == "Loop" || n.op_type == "Scan")) {
        unsupported("control-flow operator " + n.op_type);
    }
    return n;
}

Graph parse_graph(std::span<const std::uint8_t> bytes) {
    Graph g;
    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        switch (f.number) {
            case 1: expect(f, WireType::Length, "node"); g.nodes.push_back(parse_node(f.bytes)); break;
            case 2: expect(f, WireType::Length, "graph name"); g.name = std::string(f.text()); break;
            case 5: expect(f, WireType::Length, "initializer"); g.initializers.push_back(parse_tensor(f.bytes)); break;
            case 11:
            case 12: {
                expect(f, WireType::Length, "graph interface");
                ValueInfo vi;
                if (!parse_value_info(f.bytes, vi)) {
                    throw Error(ErrorKind::InvalidModel, "graph interface value '" + vi.name + "' has no tensor type");
                }
                (f.number == 11 ? g.inputs : g.outputs).push_back(std::move(vi));
                break;
            }
            case 13: {
                expect(f, WireType::Length, "value_info");
                ValueInfo vi;
                if (parse_value_info(f.bytes, vi)) g.value_infos.push_back(std::move(vi));
                break;
            }
            case 14: unsupported("quantization annotations");
            case 15: unsupported("sparse initializers");
            default: break;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Encoding

Writer encode_tensor(const TensorData& t) {
    Writer w;
    for (auto d : t.dims) w.int_field(1, d);
    w.int_field(2, static_cast<std::int32_t>(t.dtype));
    if (!t.name.empty()) w.bytes_field(8, t.name);
    w.bytes_field(9, std::string_view(reinterpret_cast<const char*>(t.raw.data()), t.raw.size()));
    return w;
}

Writer encode_value_info(const ValueInfo& vi) {
    Writer tensor_type;
    tensor_type.int_field(1, static_cast<std::int32_t>(vi.dtype));
    if (vi.shape) {
        Writer shape;
        for (const auto& d : *vi.shape) {
            Writer dim;
            if (d.is_symbolic()) {
                if (!d.symbol().empty()) dim.bytes_field(2, d.symbol());
            } else {
                dim.int_field(1, d.extent());
            }
            shape.message_field(1, dim);
        }
        tensor_type.message_field(2, shape);
    }
    Writer type;
    type.message_field(1, tensor_type);
    Writer w;
    w.bytes_field(1, vi.name);
    w.message_field(2, type);
    return w;
}

Writer encode_attribute(const Attribute& a) {
    Writer w;
    w.bytes_field(1, a.name);
    std::int32_t type = 0;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, float>) {
                w.float_field(2, v);
                type = 1;
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                w.int_field(3, v);
                type = 2;
            } else if constexpr (std::is_same_v<T, std::string>) {
                w.bytes_field(4, v);
                type = 3;
            } else if constexpr (std::is_same_v<T, TensorData>) {
                w.message_field(5, encode_tensor(v));
                type = 4;
            } else if constexpr (std::is_same_v<T, std::vector<float>>) {
                for (auto x : v) w.float_field(7, x);
                type = 6;
            } else {
                for (auto x : v) w.int_field(8, x);
                type = 7;
            }
        },
        a.value);
    w.int_field(20, type);
    return w;
}

Writer encode_node(const Node& n) {
    Writer w;
    for (const auto& in : n.inputs) w.bytes_field(1, in);
    for (const auto& out : n.outputs) w.bytes_field(2, out);
    if (!n.name.empty()) w.bytes_field(3, n.name);
    w.bytes_field(4, n.op_type);
    for (const auto& a : n.attributes) w.message_field(5, encode_attribute(a));
    if (!n.doc_string.empty()) w.bytes_field(6, n.doc_string);
    if (!n.domain.empty()) w.bytes_field(7, n.domain);
    return w;
}

Writer encode_graph(const Graph& g) {
    Writer w;
    for (const auto& n : g.nodes) w.message_field(1, encode_node(n));
    w.bytes_field(2, g.name);
    for (const auto& i : g.initializers) w.message_field(5, encode_tensor(i));
    for (const auto& vi : g.inputs) w.message_field(11, encode_value_info(vi));
    for (const auto& vi : g.outputs) w.message_field(12, encode_value_info(vi));
    for (const auto& vi : g.value_infos) w.message_field(13, encode_value_info(vi));
    return w;
}

}  // namespace

Model parse_model(std::span<const std::uint8_t> bytes) {
    Model m;
    bool has_graph = false;
    Reader r(bytes);
    while (!r.at_end()) {
        auto f = r.next();
        switch (f.number) {
            case 1: expect(f, WireType::Varint, "ir_version"); m.ir_version = static_cast<std::int64_t>(f.varint); break;
            case 2: expect(f, WireType::Length, "producer_name"); m.producer_name = std::string(f.text()); break;
            case 7:
                expect(f, WireType::Length, "graph");
                if (has_graph) Reader::fail("more than one top-level graph");
                m.graph = parse_graph(f.bytes);
                has_graph = true;
                break;
            case 8: {
                expect(f, WireType::Length, "opset_import");
                std::string domain;
                std::int64_t version = 0;
                Reader sr(f.bytes);
                while (!sr.at_end()) {
                    auto sf = sr.next();
                    if (sf.number == 1) {
                        expect(sf, WireType::Length, "opset domain");
                        domain = std::string(sf.text());
                    } else if (sf.number == 2) {
                        expect(sf, WireType::Varint, "opset version");
                        version = static_cast<std::int64_t>(sf.varint);
                    }
                }
                if (domain == "ai.onnx") domain.clear();
                m.opset_imports[domain] = version;
                break;
            }
            case 14: {
                expect(f, WireType::Length, "metadata_props");
                std::string key, value;
                Reader sr(f.bytes);
                while (!sr.at_end()) {
                    auto sf = sr.next();
                    if (sf.number == 1) key = std::string(sf.text());
                    else if (sf.number == 2) value = std::string(sf.text());
                }
                m.metadata_props.emplace_back(std::move(key), std::move(value));
                break;
            }
            case 20: unsupported("training_info");
            case 25: unsupported("model-local functions");
            default: break;
        }
    }
    if (!has_graph) Reader::fail("model has no graph");
    if (!m.opset_imports.contains("")) {
        throw Error(ErrorKind::InvalidModel, "model does not import the default operator set");
    }
    validate_model(m);
    return m;
}

std::string serialize_model(const Model& model) {
    Writer w;
    w.int_field(1, model.ir_version);
    if (!model.producer_name.empty()) w.bytes_field(2, model.producer_name);
    w.message_field(7, encode_graph(model.graph));
    for (const auto& [domain, version] : model.opset_imports) {
        Writer o;
        if (!domain.empty()) o.bytes_field(1, domain);
        o.int_field(2, version);
        w.message_field(8, o);
    }
    for (const auto& [k, v] : model.metadata_props) {
        Writer e;
        e.bytes_field(1, k);
        e.bytes_field(2, v);
        w.message_field(14, e);
    }
    return w.data();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(ErrorKind::Io, "read failed for '" + path.string() + "'");
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot create '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return parse_model(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

void save_model(const Model& model, const std::filesystem::path& path) {
    validate_model(model);
    write_file(path, serialize_model(model));
}

}  // namespace safeai
