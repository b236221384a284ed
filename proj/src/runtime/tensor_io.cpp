#include "safeai/tensor_io.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

#include "safeai/error.hpp"
#include "safeai/onnx_io.hpp"

namespace safeai {

namespace {

using ojson = nlohmann::ordered_json;

ojson tensor_value(const Tensor& t) {
    ojson data = ojson::array();
    for (float v : t.data) {
        if (std::isfinite(v)) data.push_back(static_cast<double>(v));
        else data.push_back(nullptr);
    }
    return ojson{{"dtype", "float32"}, {"shape", t.shape}, {"data", std::move(data)}};
}

}  // namespace

Tensor parse_tensor_json(std::string_view text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("tensor file: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Parse, "tensor file must hold a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "dtype" && key != "shape" && key != "data") throw Error(ErrorKind::Parse, "tensor file has unknown key \"" + key + "\"");
    if (!j.contains("dtype") || !j["dtype"].is_string()) throw Error(ErrorKind::Parse, "tensor file lacks a dtype string");
    if (j["dtype"] != "float32") throw Error(ErrorKind::UnsupportedOp, "tensor dtype " + j["dtype"].get<std::string>() + "; only float32 executes");
    if (!j.contains("shape") || !j["shape"].is_array()) throw Error(ErrorKind::Parse, "tensor file lacks a shape array");
    if (!j.contains("data") || !j["data"].is_array()) throw Error(ErrorKind::Parse, "tensor file lacks a data array");

    std::vector<std::int64_t> shape;
    for (const auto& d : j["shape"]) {
        if (!d.is_number_integer() || d.get<std::int64_t>() < 0) throw Error(ErrorKind::Parse, "tensor shape entries must be non-negative integers");
        shape.push_back(d.get<std::int64_t>());
    }
    std::vector<float> data;
    data.reserve(j["data"].size());
    for (const auto& v : j["data"]) {
        if (v.is_null()) data.push_back(std::numeric_limits<float>::quiet_NaN());
        else if (v.is_number()) data.push_back(v.get<float>());
        else throw Error(ErrorKind::Parse, "tensor data entries must be numbers");
    }
    if (element_count(shape) != data.size())
        throw Error(ErrorKind::Parse, "tensor data has " + std::to_string(data.size()) + " values, shape needs " + std::to_string(element_count(shape)));
    return Tensor(std::move(shape), std::move(data));
}

std::string tensor_to_json(const Tensor& t) { return tensor_value(t).dump(2) + "\n"; }

Tensor image_to_tensor(const GrayImage& image) {
    std::vector<float> data(image.pixels.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(image.pixels[i]) / 255.0f;
    return Tensor({1, 1, image.height, image.width}, std::move(data));
}

Tensor read_tensor_file(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    if (looks_like_pnm(bytes)) return image_to_tensor(parse_pnm(bytes));
    return parse_tensor_json(bytes);
}

std::string run_outcome_json(const RunOutcome& outcome) {
    ojson nodes = ojson::object();
    for (const auto& [name, ok] : outcome.node_qualifiers) nodes[name] = ok;
    ojson outputs = ojson::object();
    for (const auto& [name, t] : outcome.outputs) outputs[name] = tensor_value(t);
    ojson j{{"qualifier", outcome.qualifier}, {"node_qualifiers", std::move(nodes)}, {"outputs", std::move(outputs)}};
    return j.dump(2) + "\n";
}

}  // namespace safeai
