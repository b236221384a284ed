// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "safeai/merge_validator.hpp"
#include "safeai/onnx_io.hpp"
#include "safeai/partitioner.hpp"
#include "safeai/runtime.hpp"
#include "safeai/shape_qualifier.hpp"
#include "safeai/signature.hpp"
#include "safeai/tensor_io.hpp"
#include "safeai/train_validator.hpp"
#include "support/cli_runner.hpp"
#include "support/corpus.hpp"
#include "support/graph_edits.hpp"
#include "support/inputs.hpp"
#include "support/kernel_sweep.hpp"
#include "support/shapes.hpp"
#include "support/spec_gen.hpp"
#include "support/temp_dir.hpp"

using namespace safeai;
namespace st = safeai::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Model stamped(Model m) { return stamp_model(m, kStageValidatedTrained, extract_signature(m).digest); }

Outcome mutation_detection() {
    std::mt19937_64 rng(1001);
    auto corpus = st::fixture_corpus();
    int mutated = 0, rejected = 0;
    for (auto kind : st::kAllMutations) {
        int made = 0;
        for (int attempt = 0; made < 20 && attempt < 2000; ++attempt) {
            const auto& a = corpus[rng() % corpus.size()];
            auto b = st::mutate(st::perturb_weights(a, rng), kind, rng, {});
            if (!b) continue;
            ++made;
            rejected += validate_training(a, *b).verdict == safeai::Verdict::Rejected;
        }
        mutated += made;
    }
    int validated = 0, clean = 0;
    for (int i = 0; i < 50; ++i) {
        const auto& a = corpus[static_cast<std::size_t>(i) % corpus.size()];
        auto out = validate_training(a, st::perturb_weights(a, rng));
        validated += out.verdict == safeai::Verdict::Validated;
        clean += out.diff.entries.empty();
    }
    std::ostringstream d;
    d << corpus.size() << " models, " << rejected << "/" << mutated << " mutations rejected, " << validated << "/50 weight-only validated, "
      << clean << "/50 with empty diff";
    return {corpus.size() >= 10 && mutated == 140 && rejected == mutated && validated == 50 && clean == 50, d.str()};
}

Model random_small_fixture(int i, std::mt19937_64& rng) {
    if (i % 3 == 0) return build_chain_fixture(i % 2 ? st::conv_pool_spec() : st::conv_relu_gemm_spec(), rng());
    return build_dag_fixture(5000 + static_cast<std::uint64_t>(i), 12);
}

Outcome partition_round_trip() {
    std::mt19937_64 rng(2002);
    int validated = 0, tampered = 0, tamper_rejected = 0, max_nodes = 0;
    for (int i = 0; i < 100; ++i) {
        auto c = stamped(random_small_fixture(i, rng));
        max_nodes = std::max(max_nodes, static_cast<int>(c.graph.nodes.size()));
        auto r = partition(c, st::random_spec(c, rng));
        validated += validate_partition(c, r.reliable, r.nonreliable, r.manifest).verdict == safeai::Verdict::Validated;
        for (int attempt = 0; attempt < 100; ++attempt) {
            bool on_d = rng() % 2 == 0;
            auto kind = st::kAllMutations[rng() % std::size(st::kAllMutations)];
            auto m = st::mutate(on_d ? r.reliable : r.nonreliable, kind, rng, r.manifest.safety_nodes);
            if (!m) continue;
            auto out = on_d ? validate_partition(c, *m, r.nonreliable, r.manifest) : validate_partition(c, r.reliable, *m, r.manifest);
            ++tampered;
            tamper_rejected += out.verdict == safeai::Verdict::Rejected;
            break;
        }
    }
    std::ostringstream d;
    d << validated << "/100 validated (largest " << max_nodes << " nodes), " << tamper_rejected << "/" << tampered << " tampered rejected";
    return {validated == 100 && tampered == 100 && tamper_rejected == 100 && max_nodes <= 12, d.str()};
}

Outcome canonicalization() {
    std::mt19937_64 rng(3003);
    auto corpus = st::fixture_corpus();
    for (std::uint64_t s = 1; s <= 30; ++s) corpus.push_back(build_dag_fixture(7000 + s));
    int checks = 0, equal = 0, exceptions = 0;
    for (const auto& m : corpus) {
        try {
            auto ref = extract_signature(m).digest;
            for (int k = 0; k < 5; ++k) {
                auto variant = st::rename_everything(st::shuffle_node_order(m, rng), "v" + std::to_string(k) + "_");
                ++checks;
                equal += extract_signature(variant).digest == ref;
            }
        } catch (const std::exception&) {
            ++exceptions;
        }
    }
    std::ostringstream d;
    d << corpus.size() << " fixtures, " << equal << "/" << checks << " reordered+renamed digests equal, " << exceptions << " exceptions";
    return {checks == static_cast<int>(corpus.size()) * 5 && equal == checks && exceptions == 0, d.str()};
}

Outcome fault_detection() {
    std::mt19937_64 rng(4004);
    std::vector<Model> fixtures{build_chain_fixture(st::conv_relu_gemm_spec(), 7), build_chain_fixture(st::conv_pool_spec(), 11),
                                build_dag_fixture(41), build_dag_fixture(42), build_dag_fixture(43)};
    const int bits[] = {0, 5, 11, 17, 22, 23, 27, 31};
    int injected = 0, detected = 0, clean_runs = 0, clean_true = 0, bitwise = 0;
    for (const auto& m : fixtures) {
        auto in = st::random_inputs(m, rng);
        auto single = run(m, in, ExecutionMode::Single);
        auto clean = run(m, in, ExecutionMode::Redundant);
        ++clean_runs;
        clean_true += clean.qualifier;
        bool same = true;
        for (const auto& [name, t] : single.outputs) same = same && st::same_bits(t, clean.outputs.at(name));
        bitwise += same;
        for (const auto& n : m.graph.nodes) {
            std::size_t size = 1;
            if (const auto* vi = m.graph.find_value_info(n.outputs[0]); vi && vi->shape)
                if (auto e = concrete_extents(*vi->shape)) size = element_count(*e);
            for (int replica : {1, 2})
                for (int bit : bits) {
                    Fault f{runtime_label(n), replica, static_cast<std::size_t>(rng() % size), bit};
                    ++injected;
                    detected += !run(m, in, ExecutionMode::Redundant, f).qualifier;
                }
        }
    }
    std::ostringstream d;
    d << detected << "/" << injected << " injected runs flagged, " << clean_true << "/" << clean_runs << " clean runs true, " << bitwise << "/"
      << clean_runs << " redundant outputs bitwise equal to single mode";
    return {injected > 0 && detected == injected && clean_true == clean_runs && bitwise == clean_runs, d.str()};
}

Outcome kernel_oracles() {
    std::mt19937_64 rng(5005);
    auto r = st::kernel_sweep(rng, 120);
    std::ostringstream d;
    d << "conv " << r.conv_cases - r.conv_mismatches << "/" << r.conv_cases << ", gemm " << r.gemm_cases - r.gemm_mismatches << "/" << r.gemm_cases
      << ", maxpool " << r.pool_cases - r.pool_mismatches << "/" << r.pool_cases << " exact; softmax " << r.softmax_rows - r.softmax_bad_rows
      << "/" << r.softmax_rows << " rows within 1e-6";
    return {r.conv_cases >= 100 && r.gemm_cases >= 100 && r.pool_cases >= 100 && r.conv_mismatches + r.gemm_mismatches + r.pool_mismatches == 0 &&
                r.softmax_bad_rows == 0,
            d.str()};
}

Outcome sax_lower_bound() {
    std::mt19937_64 rng(6006);
    std::normal_distribution<double> g;
    int trials = 0, violations = 0;
    for (int a : {3, 4, 6}) {
        auto cfg = SaxConfig::make(64, 8, a);
        for (int t = 0; t < 1000; ++t) {
            std::vector<double> x(64), y(64);
            for (auto& v : x) v = g(rng);
            for (auto& v : y) v = g(rng);
            auto zx = znormalize(x), zy = znormalize(y);
            double euclid = 0;
            for (std::size_t i = 0; i < 64; ++i) euclid += (zx[i] - zy[i]) * (zx[i] - zy[i]);
            auto d = mindist(symbolize(paa(zx, 8), cfg.breakpoints), symbolize(paa(zy, 8), cfg.breakpoints), cfg);
            violations += d > std::sqrt(euclid);
            ++trials;
        }
    }
    std::ostringstream d;
    d << trials - violations << "/" << trials << " pairs with mindist <= euclidean (a = 3, 4, 6)";
    return {violations == 0, d.str()};
}

Outcome shape_discrimination() {
    SaxConfig cfg;  // 360, 16, 4
    auto circle = shape_word(st::centred_disc(64, 20), cfg);
    auto rescaled = shape_word(st::centred_disc(64, 12), cfg);
    auto square = shape_word(st::centred_square(64, 20), cfg);
    const double same = mindist(circle, rescaled, cfg), cross = mindist(circle, square, cfg);
    const double threshold = (same + cross) / 2;
    ReferenceTable table{{"circle", {{circle}, threshold}}, {"square", {{square}, threshold}}};
    auto right = qualify("circle", rescaled, table, cfg).verdict;
    auto swapped = qualify("square", rescaled, table, cfg).verdict;
    std::ostringstream d;
    d << "circle " << word_to_string(circle) << ", rescaled " << word_to_string(rescaled) << ", square " << word_to_string(square)
      << "; mindist same " << same << " vs cross " << cross << "; true class " << to_string(right) << ", swapped " << to_string(swapped);
    return {same < cross && right == QualifierVerdict::Accept && swapped == QualifierVerdict::Reject, d.str()};
}

Outcome sobel_neutrality() {
    ChainSpec spec;
    spec.input_shape = {1, 3, 16, 16};
    spec.layers = {{"Conv", {ints_attr("kernel_shape", {11, 11})}, 8}, {"Relu", {}, 0}, {"Gemm", {}, 4}};
    auto m = build_chain_fixture(spec, 8);
    SobelReplace s{"conv_0"};
    auto out = apply_sobel_replacement(m, s);
    const bool digest_same = extract_signature(out).digest == extract_signature(m).digest;
    const int gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    const int gy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    auto w = out.graph.find_initializer("conv_0.weight")->floats();
    auto before = m.graph.find_initializer("conv_0.weight")->floats();
    int centre_ok = 0, centre = 0, rest_zero = 0, rest = 0, untouched = 0, others = 0;
    std::size_t i = 0;
    for (int o = 0; o < 8; ++o)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x, ++i) {
                    if (o >= 2) {
                        ++others;
                        untouched += w[i] == before[i];
                        continue;
                    }
                    if (y >= 4 && y < 7 && x >= 4 && x < 7) {
                        const int g = o == 0 ? gx[y - 4][x - 4] : gy[y - 4][x - 4];
                        ++centre;
                        centre_ok += w[i] == static_cast<float>(s.luminance_weights[static_cast<std::size_t>(c)] * g);
                    } else {
                        ++rest;
                        rest_zero += w[i] == 0.0f;
                    }
                }
    std::ostringstream d;
    d << "digest " << (digest_same ? "unchanged" : "CHANGED") << ", centre " << centre_ok << "/" << centre << " luminance-scaled Gx/Gy, "
      << rest_zero << "/" << rest << " other entries 0, " << untouched << "/" << others << " other channels untouched";
    return {digest_same && centre_ok == centre && rest_zero == rest && untouched == others, d.str()};
}

Outcome end_to_end() {
    st::TempDir dir("safeai-acceptance");
    auto q = [&](const std::string& leaf) { return st::quoted(dir / leaf); };
    auto cli = [&](const std::string& args) { return st::run_cli(args, dir.path()).code; };
    std::mt19937_64 rng(9009);
    auto a = build_chain_fixture(lenet_chain_spec(), 1);
    save_model(a, dir / "a.onnx");
    save_model(st::perturb_weights(a, rng), dir / "b.onnx");

    PartitionSpec spec;
    spec.assignments = {{"conv_0", Target::Reliable}, {"relu_1", Target::Reliable}, {"maxpool_2", Target::Reliable}};
    spec.safety_insertions = {SobelReplace{"conv_0"}, RedundantNode{"conv_0", 0.0}};
    write_file(dir / "spec.json", spec_to_json(spec));
    write_file(dir / "x.json", tensor_to_json(st::random_tensor({1, 3, 32, 32}, rng)));

    std::vector<std::pair<std::string, int>> stages;
    stages.emplace_back("validate-train", cli("validate-train --reference " + q("a.onnx") + " --trained " + q("b.onnx") + " --out " + q("c.onnx")));
    stages.emplace_back("partition", cli("partition --model " + q("c.onnx") + " --spec " + q("spec.json") + " --out-reliable " + q("d.onnx") +
                                         " --out-nonreliable " + q("e.onnx") + " --manifest " + q("m.json")));
    stages.emplace_back("validate-partition",
                        cli("validate-partition --model " + q("c.onnx") + " --reliable " + q("d.onnx") + " --nonreliable " + q("e.onnx") +
                            " --manifest " + q("m.json") + " --out-reliable " + q("dv.onnx") + " --out-nonreliable " + q("ev.onnx")));
    stages.emplace_back("run-reliable", cli("run-reliable --model " + q("dv.onnx") + " --input " + q("x.json") + " --redundant --out " + q("o.json")));
    bool all_zero = true;
    std::ostringstream d;
    for (const auto& [name, code] : stages) {
        d << name << "=" << code << " ";
        all_zero = all_zero && code == 0;
    }
    bool qualifier = false;
    if (all_zero) qualifier = read_file(dir / "o.json").find("\"qualifier\": true") != std::string::npos;
    d << "qualifier " << (qualifier ? "true" : "false");
    return {all_zero && qualifier, d.str()};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no limit
    std::function<Outcome()> check;
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {1, "mutation detection", 30, mutation_detection},
        {2, "partition/merge round-trip", 60, partition_round_trip},
        {3, "canonicalization", 0, canonicalization},
        {4, "redundancy fault detection", 0, fault_detection},
        {5, "kernel oracle equivalence", 0, kernel_oracles},
        {6, "SAX lower bound", 0, sax_lower_bound},
        {7, "shape discrimination", 5, shape_discrimination},
        {8, "Sobel neutrality", 0, sobel_neutrality},
        {9, "end-to-end workflow", 30, end_to_end},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_seconds == 0 || secs < c.limit_seconds;
        const bool pass = v.pass && in_time;
        failures += !pass;
        std::printf("criterion %d %s %s: %s (%.2f s%s)\n", c.id, pass ? "PASS" : "FAIL", c.name, v.detail.c_str(), secs,
                    c.limit_seconds > 0 ? (in_time ? ", within limit" : ", OVER LIMIT") : "");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
    return failures == 0 ? 0 : 1;
}
