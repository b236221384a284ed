#include <random>

#include "doctest.h"
#include "safeai/error.hpp"
#include "safeai/onnx_io.hpp"
#include "safeai/reports.hpp"
#include "safeai/train_validator.hpp"
#include "support/corpus.hpp"
#include "support/graph_edits.hpp"

using namespace safeai;

namespace {

std::size_t safeai_keys(const Model& m) {
    std::size_t n = 0;
    for (const auto& [k, v] : m.metadata_props) n += k.starts_with("safeai.");
    return n;
}

Model maxpool_fixture(std::int64_t kernel) {
    ChainSpec spec;
    spec.layers = {{"Conv", {ints_attr("kernel_shape", {3, 3}), ints_attr("pads", {1, 1, 1, 1})}, 4},
                   {"MaxPool", {ints_attr("kernel_shape", {2, 2}), ints_attr("strides", {2, 2})}, 0},
                   {"Relu", {}, 0}};
    auto m = build_chain_fixture(spec, 1);
    // Edit the attribute in place, as a training tool would; declared shapes stay.
    for (auto& n : m.graph.nodes)
        for (auto& a : n.attributes)
            if (n.op_type == "MaxPool" && a.name == "kernel_shape") a.value = std::vector<std::int64_t>{kernel, kernel};
    return m;
}

}  // namespace

TEST_CASE("fixtures from seeds 1 and 2 validate, every initializer changed") {
    auto spec = safeai::testing::conv_relu_gemm_spec();
    auto a = build_chain_fixture(spec, 1);
    auto b = build_chain_fixture(spec, 2);
    auto out = validate_training(a, b);
    CHECK(out.verdict == Verdict::Validated);
    CHECK(out.diff.entries.empty());
    CHECK(out.diff.weight_changes.size() == b.graph.initializers.size());
    CHECK(out.warnings.empty());
    REQUIRE(out.stamped_model);
    CHECK(out.stamped_model->metadata(kMetaStage) == std::string(kStageValidatedTrained));
    CHECK(out.stamped_model->metadata(kMetaSignature) == out.candidate_digest);
    CHECK(out.stamped_model->graph == b.graph);
}

TEST_CASE("identity training validates with a warning") {
    auto a = build_chain_fixture(safeai::testing::conv_relu_gemm_spec(), 1);
    auto out = validate_training(a, a);
    CHECK(out.verdict == Verdict::Validated);
    CHECK(out.diff.weight_changes.empty());
    CHECK(out.warnings.size() == 1);

    ValidationPolicy quiet;
    quiet.require_weight_change = false;
    CHECK(validate_training(a, a, quiet).warnings.empty());
}

TEST_CASE("MaxPool kernel 2 -> 3 is rejected with one AttributeMismatch") {
    auto out = validate_training(maxpool_fixture(2), maxpool_fixture(3));
    CHECK(out.verdict == Verdict::Rejected);
    CHECK_FALSE(out.stamped_model);
    REQUIRE(out.diff.entries.size() == 1);
    CHECK(out.diff.entries[0].kind == DiffKind::AttributeMismatch);
    CHECK(out.diff.entries[0].location.ends_with("/attr:kernel_shape"));
}

TEST_CASE("stamping") {
    auto m = build_chain_fixture(safeai::testing::conv_pool_spec(), 3);
    m.metadata_props.push_back({"author", "x"});
    auto d = extract_signature(m).digest;

    auto once = stamp_model(m, "validated-trained", d);
    CHECK(safeai_keys(once) == 3);
    CHECK(once.metadata("safeai.schema") == "1");
    CHECK(once.metadata("author") == "x");
    CHECK(extract_signature(once).digest == d);

    auto twice = stamp_model(once, "other-stage", d);
    CHECK(safeai_keys(twice) == 3);
    CHECK(twice.metadata(kMetaStage) == "other-stage");
    CHECK(serialize_model(stamp_model(once, "validated-trained", d)) == serialize_model(once));

    try {
        stamp_model(m, "", d);
        FAIL("expected InvalidStage");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidStage);
    }
}

TEST_CASE("metadata additions only warn") {
    auto a = build_chain_fixture(safeai::testing::conv_relu_gemm_spec(), 1);
    auto b = build_chain_fixture(safeai::testing::conv_relu_gemm_spec(), 2);
    b.metadata_props.push_back({"trainer", "tool"});
    ValidationPolicy policy;
    policy.allow_metadata_additions = false;
    auto out = validate_training(a, b, policy);
    CHECK(out.verdict == Verdict::Validated);
    REQUIRE(out.warnings.size() == 1);
    CHECK(out.warnings[0].find("trainer") != std::string::npos);
}

TEST_CASE("strict_names rejects renaming that structural mode accepts") {
    auto a = build_chain_fixture(safeai::testing::conv_relu_gemm_spec(), 1);
    auto b = safeai::testing::rename_everything(a, "x");
    CHECK(validate_training(a, b).verdict == Verdict::Validated);
    ValidationPolicy strict;
    strict.mode = SignatureMode::StrictNames;
    CHECK(validate_training(a, b, strict).verdict == Verdict::Rejected);
}

TEST_CASE("soundness and completeness over the corpus") {
    std::mt19937_64 rng(2024);
    auto corpus = safeai::testing::fixture_corpus();
    for (const auto& m : corpus) {
        for (auto kind : safeai::testing::kAllMutations) {
            auto mutated = safeai::testing::mutate(m, kind, rng);
            if (!mutated) continue;
            CAPTURE(safeai::testing::to_string(kind));
            CHECK(validate_training(m, *mutated).verdict == Verdict::Rejected);
        }
        auto trained = safeai::testing::perturb_weights(m, rng);
        auto out = validate_training(m, trained);
        CHECK(out.verdict == Verdict::Validated);
        CHECK(out.diff.entries.empty());
    }
}

TEST_CASE("training report JSON shape") {
    auto out = validate_training(maxpool_fixture(2), maxpool_fixture(3));
    auto text = training_report_json(out);
    CHECK(text.starts_with("{\n  \"verdict\": \"Rejected\",\n  \"entries\": ["));
    CHECK(text.find("\"kind\": \"AttributeMismatch\"") != std::string::npos);
    CHECK(text.find("\"reference_digest\": \"" + out.reference_digest + "\"") != std::string::npos);
    CHECK(text == training_report_json(validate_training(maxpool_fixture(2), maxpool_fixture(3))));
}
