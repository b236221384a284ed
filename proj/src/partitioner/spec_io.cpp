#include <algorithm>
#include <set>

#include "json.hpp"
#include "safeai/error.hpp"
#include "safeai/partitioner.hpp"

namespace safeai {

using json = nlohmann::ordered_json;

std::string_view to_string(Target target) { return target == Target::Reliable ? "reliable" : "nonreliable"; }

std::string_view insertion_kind(const SafetyInsertion& ins) {
    switch (ins.index()) {
        case 0: return "sobel_replace";
        case 1: return "redundant_node";
        default: return "expose_tensor";
    }
}

namespace {

[[noreturn]] void schema(const std::string& msg) { throw Error(ErrorKind::SpecSchema, msg); }

void closed_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) schema(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            schema("unknown key \"" + key + "\" in " + where);
    }
}

const json& required(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema(std::string("missing \"") + key + "\" in " + where);
    return *it;
}

std::string text(const json& v, const std::string& what) {
    if (!v.is_string()) schema(what + " must be a string");
    auto s = v.get<std::string>();
    if (s.empty()) schema(what + " must not be empty");
    return s;
}

std::int64_t integer(const json& v, const std::string& what) {
    if (!v.is_number_integer()) schema(what + " must be an integer");
    return v.get<std::int64_t>();
}

double real(const json& v, const std::string& what) {
    if (!v.is_number()) schema(what + " must be a number");
    return v.get<double>();
}

Target target(const json& v, const std::string& what) {
    auto s = text(v, what);
    if (s == "reliable") return Target::Reliable;
    if (s == "nonreliable") return Target::NonReliable;
    schema(what + " must be \"reliable\" or \"nonreliable\", got \"" + s + "\"");
}

SafetyInsertion parse_insertion(const json& v, std::size_t index) {
    auto where = "safety_insertions[" + std::to_string(index) + "]";
    if (!v.is_object()) schema(where + " must be an object");
    auto kind = text(required(v, "kind", where), where + ".kind");
    if (kind == "sobel_replace") {
        closed_keys(v, {"kind", "conv_node", "first_channel", "channel_count", "luminance_weights"}, where);
        SobelReplace s;
        s.conv_node = text(required(v, "conv_node", where), where + ".conv_node");
        if (v.contains("first_channel")) s.first_channel = integer(v["first_channel"], where + ".first_channel");
        if (v.contains("channel_count")) s.channel_count = integer(v["channel_count"], where + ".channel_count");
        if (s.first_channel < 0) schema(where + ".first_channel must be >= 0");
        if (s.channel_count < 1) schema(where + ".channel_count must be >= 1");
        if (v.contains("luminance_weights")) {
            const auto& lw = v["luminance_weights"];
            if (!lw.is_array() || lw.size() != 3) schema(where + ".luminance_weights must be 3 numbers");
            for (std::size_t i = 0; i < 3; ++i) s.luminance_weights[i] = real(lw[i], where + ".luminance_weights");
        }
        return s;
    }
    if (kind == "redundant_node") {
        closed_keys(v, {"kind", "node", "tolerance"}, where);
        RedundantNode r;
        r.node = text(required(v, "node", where), where + ".node");
        if (v.contains("tolerance")) r.tolerance = real(v["tolerance"], where + ".tolerance");
        if (!(r.tolerance >= 0.0)) schema(where + ".tolerance must be >= 0");
        return r;
    }
    if (kind == "expose_tensor") {
        closed_keys(v, {"kind", "tensor"}, where);
        return ExposeTensor{text(required(v, "tensor", where), where + ".tensor")};
    }
    schema(where + ".kind \"" + kind + "\" is not one of sobel_replace, redundant_node, expose_tensor");
}

json shape_json(const std::optional<TensorShape>& shape) {
    if (!shape) return nullptr;
    json out = json::array();
    for (const auto& d : *shape) {
        if (d.is_symbolic()) out.push_back(d.symbol());
        else out.push_back(d.extent());
    }
    return out;
}

json value_info_json(const ValueInfo& vi) {
    return json{{"name", vi.name}, {"dtype", to_string(vi.dtype)}, {"shape", shape_json(vi.shape)}};
}

[[noreturn]] void bad_manifest(const std::string& msg) { throw Error(ErrorKind::Parse, "manifest: " + msg); }

const json& field(const json& obj, const char* key) {
    if (!obj.is_object()) bad_manifest("expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) bad_manifest(std::string("missing \"") + key + "\"");
    return *it;
}

std::string mstring(const json& obj, const char* key) {
    const auto& v = field(obj, key);
    if (!v.is_string()) bad_manifest(std::string("\"") + key + "\" must be a string");
    return v.get<std::string>();
}

std::int64_t mint(const json& obj, const char* key) {
    const auto& v = field(obj, key);
    if (!v.is_number_integer()) bad_manifest(std::string("\"") + key + "\" must be an integer");
    return v.get<std::int64_t>();
}

const json& marray(const json& obj, const char* key) {
    const auto& v = field(obj, key);
    if (!v.is_array()) bad_manifest(std::string("\"") + key + "\" must be an array");
    return v;
}

std::vector<std::string> mstrings(const json& obj, const char* key) {
    std::vector<std::string> out;
    for (const auto& v : marray(obj, key)) {
        if (!v.is_string()) bad_manifest(std::string("\"") + key + "\" must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

DataType mdtype(const json& obj) {
    auto s = mstring(obj, "dtype");
    auto dt = data_type_from_string(s);
    if (!dt) bad_manifest("unknown dtype \"" + s + "\"");
    return *dt;
}

std::optional<TensorShape> mshape(const json& obj) {
    const auto& v = field(obj, "shape");
    if (v.is_null()) return std::nullopt;
    if (!v.is_array()) bad_manifest("\"shape\" must be an array or null");
    TensorShape shape;
    for (const auto& d : v) {
        if (d.is_number_integer()) shape.emplace_back(d.get<std::int64_t>());
        else if (d.is_string()) shape.emplace_back(d.get<std::string>());
        else bad_manifest("shape entries must be integers or strings");
    }
    return shape;
}

std::vector<ValueInfo> mvalue_infos(const json& obj, const char* key) {
    std::vector<ValueInfo> out;
    for (const auto& v : marray(obj, key)) out.push_back({mstring(v, "name"), mdtype(v), mshape(v)});
    return out;
}

Target mtarget(const json& obj) {
    auto s = mstring(obj, "target");
    if (s == "reliable") return Target::Reliable;
    if (s == "nonreliable") return Target::NonReliable;
    bad_manifest("unknown target \"" + s + "\"");
}

}  // namespace

PartitionSpec parse_spec(std::string_view text_in) {
    json doc;
    try {
        doc = json::parse(text_in.begin(), text_in.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::SpecParse, e.what());
    }
    closed_keys(doc, {"version", "default_target", "assignments", "safety_insertions", "boundary_prefix"}, "spec");

    PartitionSpec spec;
    auto version = integer(required(doc, "version", "spec"), "version");
    if (version != 1) schema("version must be 1, got " + std::to_string(version));
    spec.version = 1;
    spec.default_target = target(required(doc, "default_target", "spec"), "default_target");

    if (doc.contains("assignments")) {
        const auto& list = doc["assignments"];
        if (!list.is_array()) schema("assignments must be an array");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < list.size(); ++i) {
            auto where = "assignments[" + std::to_string(i) + "]";
            const auto& a = list[i];
            if (!a.is_array() || a.size() != 2) schema(where + " must be [selector, target]");
            auto selector = text(a[0], where + " selector");
            if (!seen.insert(selector).second) schema("duplicate selector \"" + selector + "\"");
            spec.assignments.emplace_back(selector, target(a[1], where + " target"));
        }
    }
    if (doc.contains("safety_insertions")) {
        const auto& list = doc["safety_insertions"];
        if (!list.is_array()) schema("safety_insertions must be an array");
        for (std::size_t i = 0; i < list.size(); ++i) spec.safety_insertions.push_back(parse_insertion(list[i], i));
    }
    if (doc.contains("boundary_prefix")) spec.boundary_prefix = text(doc["boundary_prefix"], "boundary_prefix");
    return spec;
}

std::string spec_to_json(const PartitionSpec& spec) {
    json doc;
    doc["version"] = spec.version;
    doc["default_target"] = to_string(spec.default_target);
    doc["assignments"] = json::array();
    for (const auto& [selector, t] : spec.assignments) doc["assignments"].push_back(json::array({selector, to_string(t)}));
    doc["safety_insertions"] = json::array();
    for (const auto& ins : spec.safety_insertions) {
        json j{{"kind", insertion_kind(ins)}};
        if (const auto* s = std::get_if<SobelReplace>(&ins)) {
            j["conv_node"] = s->conv_node;
            j["first_channel"] = s->first_channel;
            j["channel_count"] = s->channel_count;
            j["luminance_weights"] = s->luminance_weights;
        } else if (const auto* r = std::get_if<RedundantNode>(&ins)) {
            j["node"] = r->node;
            j["tolerance"] = r->tolerance;
        } else {
            j["tensor"] = std::get<ExposeTensor>(ins).tensor;
        }
        doc["safety_insertions"].push_back(j);
    }
    doc["boundary_prefix"] = spec.boundary_prefix;
    return doc.dump(2) + "\n";
}

std::string manifest_to_json(const PartitionManifest& m) {
    json doc;
    doc["version"] = m.version;
    doc["source_digest"] = m.source_digest;
    doc["allocations"] = json::array();
    for (const auto& a : m.allocations) {
        doc["allocations"].push_back({{"location", a.location},
                                      {"name", a.name},
                                      {"output", a.output},
                                      {"op_type", a.op_type},
                                      {"target", to_string(a.target)}});
    }
    doc["boundary_tensors"] = json::array();
    for (const auto& b : m.boundary_tensors) {
        doc["boundary_tensors"].push_back(
            {{"name", b.name}, {"dtype", to_string(b.dtype)}, {"shape", shape_json(b.shape)}, {"direction", "D->E"}});
    }
    doc["safety_nodes"] = m.safety_nodes;
    doc["safety_functions"] = json::array();
    for (const auto& f : m.safety_functions) {
        doc["safety_functions"].push_back({{"kind", f.kind},
                                           {"target", f.target},
                                           {"location", f.location},
                                           {"nodes", f.nodes},
                                           {"qualifier_output", f.qualifier_output},
                                           {"tolerance", f.tolerance}});
    }
    doc["exposed_tensors"] = m.exposed_tensors;
    doc["modified_initializers"] = json::array();
    for (const auto& mi : m.modified_initializers) {
        doc["modified_initializers"].push_back(
            {{"name", mi.name}, {"first_channel", mi.first_channel}, {"channel_count", mi.channel_count}});
    }
    doc["original_inputs"] = json::array();
    for (const auto& vi : m.original_inputs) doc["original_inputs"].push_back(value_info_json(vi));
    doc["original_outputs"] = json::array();
    for (const auto& vi : m.original_outputs) doc["original_outputs"].push_back(value_info_json(vi));
    return doc.dump(2) + "\n";
}

PartitionManifest parse_manifest(std::string_view text_in) {
    json doc;
    try {
        doc = json::parse(text_in.begin(), text_in.end());
    } catch (const json::parse_error& e) {
        bad_manifest(e.what());
    }
    PartitionManifest m;
    m.version = static_cast<int>(mint(doc, "version"));
    if (m.version != 1) bad_manifest("unsupported version " + std::to_string(m.version));
    m.source_digest = mstring(doc, "source_digest");
    for (const auto& a : marray(doc, "allocations")) {
        m.allocations.push_back(
            {mstring(a, "location"), mstring(a, "name"), mstring(a, "output"), mstring(a, "op_type"), mtarget(a)});
    }
    for (const auto& b : marray(doc, "boundary_tensors")) {
        auto shape = mshape(b);
        if (!shape) bad_manifest("boundary tensor without shape");
        if (mstring(b, "direction") != "D->E") bad_manifest("boundary direction must be \"D->E\"");
        m.boundary_tensors.push_back({mstring(b, "name"), mdtype(b), *shape});
    }
    m.safety_nodes = mstrings(doc, "safety_nodes");
    for (const auto& f : marray(doc, "safety_functions")) {
        SafetyFunction sf;
        sf.kind = mstring(f, "kind");
        sf.target = mstring(f, "target");
        sf.location = mstring(f, "location");
        sf.nodes = mstrings(f, "nodes");
        sf.qualifier_output = mstring(f, "qualifier_output");
        const auto& tol = field(f, "tolerance");
        if (!tol.is_number()) bad_manifest("\"tolerance\" must be a number");
        sf.tolerance = tol.get<double>();
        m.safety_functions.push_back(std::move(sf));
    }
    m.exposed_tensors = mstrings(doc, "exposed_tensors");
    for (const auto& mi : marray(doc, "modified_initializers")) {
        m.modified_initializers.push_back({mstring(mi, "name"), mint(mi, "first_channel"), mint(mi, "channel_count")});
    }
    m.original_inputs = mvalue_infos(doc, "original_inputs");
    m.original_outputs = mvalue_infos(doc, "original_outputs");
    return m;
}

}  // namespace safeai
