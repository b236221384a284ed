#include "json.hpp"
#include "safeai/error.hpp"
#include "safeai/shape_qualifier.hpp"

namespace safeai {

using ojson = nlohmann::ordered_json;

ReferenceTable parse_reference_table(std::string_view text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("reference table: ") + e.what());
    }
    auto bad = [](const std::string& what) { return Error(ErrorKind::Parse, "reference table: " + what); };
    if (!j.is_object()) throw bad("top level must be an object");
    ReferenceTable table;
    for (const auto& [label, entry] : j.items()) {
        if (!entry.is_object()) throw bad("class \"" + label + "\" must be an object");
        for (const auto& [key, _] : entry.items())
            if (key != "words" && key != "threshold") throw bad("class \"" + label + "\" has unknown key \"" + key + "\"");
        if (!entry.contains("words") || !entry["words"].is_array() || entry["words"].empty())
            throw bad("class \"" + label + "\" needs a nonempty words array");
        if (!entry.contains("threshold") || !entry["threshold"].is_number() || entry["threshold"].get<double>() < 0)
            throw bad("class \"" + label + "\" needs a threshold >= 0");
        ReferenceClass cls;
        cls.threshold = entry["threshold"].get<double>();
        for (const auto& w : entry["words"]) {
            if (!w.is_array() || w.empty()) throw bad("class \"" + label + "\" has a word that is not a nonempty array");
            SaxWord word;
            for (const auto& s : w) {
                if (!s.is_number_integer() || s.get<std::int64_t>() < 0 || s.get<std::int64_t>() > 9)
                    throw bad("class \"" + label + "\" has a symbol outside 0..9");
                word.push_back(s.get<int>());
            }
            cls.words.push_back(std::move(word));
        }
        table.emplace(label, std::move(cls));
    }
    return table;
}

std::string reference_table_to_json(const ReferenceTable& table) {
    ojson j = ojson::object();
    for (const auto& [label, cls] : table) j[label] = ojson{{"words", cls.words}, {"threshold", cls.threshold}};
    return j.dump(2) + "\n";
}

}  // namespace safeai
