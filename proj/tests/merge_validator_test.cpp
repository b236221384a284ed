#include <algorithm>
#include <random>

#include "doctest.h"
#include "safeai/error.hpp"
#include "safeai/merge_validator.hpp"
#include "safeai/reports.hpp"
#include "support/corpus.hpp"
#include "support/graph_edits.hpp"
#include "support/spec_gen.hpp"

using namespace safeai;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

Model stamped(Model m) { return stamp_model(m, kStageValidatedTrained, extract_signature(m).digest); }

Model conv_relu_gemm() { return stamped(build_chain_fixture(safeai::testing::conv_relu_gemm_spec(), 7)); }

PartitionSpec conv_spec_with_insertions() {
    PartitionSpec s;
    s.assignments = {{"conv_0", Target::Reliable}};
    s.safety_insertions = {SobelReplace{"conv_0"}, RedundantNode{"conv_0", 0.0}, ExposeTensor{"conv_0_out"}};
    return s;
}

}  // namespace

TEST_CASE("honest partition merges back to the source architecture") {
    auto c = conv_relu_gemm();
    auto r = partition(c, conv_spec_with_insertions());
    auto merged = merge_partitions(r.reliable, r.nonreliable, r.manifest);
    CHECK(extract_signature(merged).digest == extract_signature(c).digest);
    CHECK(merged.graph.nodes.size() == c.graph.nodes.size());

    auto out = validate_partition(c, r.reliable, r.nonreliable, r.manifest);
    CHECK(out.verdict == Verdict::Validated);
    CHECK(out.consistency_failures.empty());
    CHECK(out.diff.entries.empty());
    CHECK(out.safety_report.size() == 3);
    CHECK(out.safety_report[1].kind == "redundant_node");
    CHECK(out.safety_report[1].location == "node[0]:Conv");
    auto changed = out.diff.weight_changes;
    std::sort(changed.begin(), changed.end());
    CHECK(changed == std::vector<std::string>{"conv_0.bias", "conv_0.weight"});
    REQUIRE(out.stamped_reliable);
    REQUIRE(out.stamped_nonreliable);
    for (const auto* m : {&*out.stamped_reliable, &*out.stamped_nonreliable}) {
        CHECK(m->metadata(kMetaStage) == std::string(kStageValidatedPartition));
        CHECK(m->metadata(kMetaSignature) == r.manifest.source_digest);
    }
}

TEST_CASE("boundary output renamed by hand is BoundaryMismatch") {
    auto c = conv_relu_gemm();
    PartitionSpec s;
    s.assignments = {{"conv_0", Target::Reliable}};
    auto r = partition(c, s);
    auto d = r.reliable;
    d.graph.outputs[0].name = "renamed";
    d.graph.nodes[0].outputs[0] = "renamed";
    CHECK(kind_of([&] { merge_partitions(d, r.nonreliable, r.manifest); }) == ErrorKind::BoundaryMismatch);
    auto out = validate_partition(c, d, r.nonreliable, r.manifest);
    CHECK(out.verdict == Verdict::Rejected);
    CHECK_FALSE(out.consistency_failures.empty());
    CHECK_FALSE(out.stamped_reliable);
}

TEST_CASE("safety output feeding a non-safety node is DanglingSafetyNode") {
    auto c = conv_relu_gemm();
    auto spec = conv_spec_with_insertions();
    auto r = partition(c, spec);
    auto e = r.nonreliable;
    auto relu = std::find_if(e.graph.nodes.begin(), e.graph.nodes.end(), [](const Node& n) { return n.op_type == "Relu"; });
    relu->inputs[0] = "conv_0_out__safeai_red";
    auto d = r.reliable;
    d.graph.outputs.push_back({"conv_0_out__safeai_red", DataType::Float32, TensorShape{1, 8, 6, 6}});
    CHECK(kind_of([&] { merge_partitions(d, e, r.manifest); }) == ErrorKind::DanglingSafetyNode);
}

TEST_CASE("extra Relu in E is rejected with NodeAdded") {
    auto c = conv_relu_gemm();
    PartitionSpec s;
    s.assignments = {{"conv_0", Target::Reliable}};
    auto r = partition(c, s);
    auto e = r.nonreliable;
    auto& g = e.graph;
    auto gemm = std::find_if(g.nodes.begin(), g.nodes.end(), [](const Node& n) { return n.op_type == "Gemm"; });
    auto src = gemm->inputs[0];
    gemm->inputs[0] = "extra_out";
    g.nodes.push_back({"extra", "Relu", "", {src}, {"extra_out"}, {}, "safeai.allocation=nonreliable"});
    auto out = validate_partition(c, r.reliable, e, r.manifest);
    CHECK(out.verdict == Verdict::Rejected);
    CHECK(std::any_of(out.diff.entries.begin(), out.diff.entries.end(),
                      [](const DiffEntry& d) { return d.kind == DiffKind::NodeAdded; }));
    auto report = partition_report_json(out);
    CHECK(report.find("\"verdict\": \"Rejected\"") != std::string::npos);
    CHECK(report.find("\"safety_report\"") != std::string::npos);
}

TEST_CASE("edited source digest is ManifestDigestMismatch") {
    auto c = conv_relu_gemm();
    auto r = partition(c, conv_spec_with_insertions());
    auto m = r.manifest;
    m.source_digest[0] = m.source_digest[0] == '0' ? '1' : '0';
    CHECK(kind_of([&] { validate_partition(c, r.reliable, r.nonreliable, m); }) == ErrorKind::ManifestDigestMismatch);
}

TEST_CASE("unstamped source needs force") {
    auto bare = build_chain_fixture(safeai::testing::conv_relu_gemm_spec(), 7);
    auto r = partition(bare, conv_spec_with_insertions(), {.force = true});
    CHECK(kind_of([&] { validate_partition(bare, r.reliable, r.nonreliable, r.manifest); }) == ErrorKind::NotStamped);
    CHECK(validate_partition(bare, r.reliable, r.nonreliable, r.manifest, {}, {.force = true}).verdict ==
          Verdict::Validated);
}

TEST_CASE("marker tampering is rejected") {
    auto c = conv_relu_gemm();
    auto r = partition(c, conv_spec_with_insertions());

    auto d = r.reliable;
    d.graph.nodes[0].doc_string = "safeai.allocation=nonreliable";
    CHECK(validate_partition(c, d, r.nonreliable, r.manifest).verdict == Verdict::Rejected);

    auto e = r.nonreliable;
    e.graph.nodes[0].doc_string += "\nsafeai.safety_function=true";
    CHECK(validate_partition(c, r.reliable, e, r.manifest).verdict == Verdict::Rejected);

    auto m = r.manifest;
    m.safety_nodes.pop_back();
    CHECK(validate_partition(c, r.reliable, r.nonreliable, m).verdict == Verdict::Rejected);

    auto chain = r.reliable;
    for (auto& n : chain.graph.nodes)
        if (n.op_type == "Abs") n.op_type = "Relu";
    CHECK(validate_partition(c, chain, r.nonreliable, r.manifest).verdict == Verdict::Rejected);
}

TEST_CASE("round-trip and tamper sensitivity over random fixtures") {
    std::mt19937_64 rng(31);
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        auto c = stamped(seed % 3 == 0 ? build_chain_fixture(safeai::testing::conv_pool_spec(), seed)
                                       : build_dag_fixture(seed * 7));
        auto spec = safeai::testing::random_spec(c, rng);
        CAPTURE(spec_to_json(spec));
        auto r = partition(c, spec);
        auto out = validate_partition(c, r.reliable, r.nonreliable, r.manifest);
        CHECK(out.verdict == Verdict::Validated);
        CHECK(out.safety_report.size() == spec.safety_insertions.size());
        for (const auto& f : out.consistency_failures) MESSAGE(f);

        auto merged = merge_partitions(r.reliable, r.nonreliable, r.manifest);
        CHECK(merged.graph.nodes.size() == c.graph.nodes.size());

        for (auto kind : safeai::testing::kAllMutations) {
            bool on_d = rng() % 2 == 0;
            const auto& victim = on_d ? r.reliable : r.nonreliable;
            auto mutated = safeai::testing::mutate(victim, kind, rng, r.manifest.safety_nodes);
            if (!mutated) continue;
            CAPTURE(safeai::testing::to_string(kind));
            CAPTURE(on_d);
            auto tampered = on_d ? validate_partition(c, *mutated, r.nonreliable, r.manifest)
                                 : validate_partition(c, r.reliable, *mutated, r.manifest);
            CHECK(tampered.verdict == Verdict::Rejected);
        }
    }
}
