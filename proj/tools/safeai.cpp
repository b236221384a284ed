#include <algorithm>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "safeai/error.hpp"
#include "safeai/merge_validator.hpp"
#include "safeai/onnx_io.hpp"
#include "safeai/partitioner.hpp"
#include "safeai/reports.hpp"
#include "safeai/runtime.hpp"
#include "safeai/shape_qualifier.hpp"
#include "safeai/signature.hpp"
#include "safeai/tensor_io.hpp"
#include "safeai/train_validator.hpp"

using namespace safeai;

namespace {

enum Exit : int { kOk = 0, kRejected = 1, kUsage = 2, kIo = 3, kInternal = 4 };

constexpr const char* kExitTable =
    "Exit codes:\n"
    "  0  success, Validated, run finished (even with qualifier=false), sax ACCEPT or UNDECIDED\n"
    "  1  Rejected, CyclicCut, NotStamped, ManifestDigestMismatch, sax REJECT\n"
    "  2  usage error (bad flags, bad --inject or --config value)\n"
    "  3  I/O, parse, unsupported model or operator, invalid graph, bad spec, bad input tensor\n"
    "  4  internal invariant violation\n"
    "run-reliable reports a failed redundancy check as qualifier=false with exit 0: the qualifier is\n"
    "the product, not a tool failure. sax exits 1 on REJECT because that verdict is terminal.";

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::CyclicCut:
        case ErrorKind::NotStamped:
        case ErrorKind::ManifestDigestMismatch:
            return kRejected;
        case ErrorKind::InvalidArgument:
            return kUsage;
        case ErrorKind::ModeMismatch:
            return kInternal;
        default:
            return kIo;
    }
}

SignatureMode parse_mode(const std::string& text) {
    if (text == "structural") return SignatureMode::Structural;
    if (text == "strict-names") return SignatureMode::StrictNames;
    throw Error(ErrorKind::InvalidArgument, "mode must be structural or strict-names");
}

void emit(const std::string& path, const std::string& text) {
    if (path == "-") std::cout << text;
    else write_file(path, text);
}

std::string utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void print_diff(const DiffReport& diff) {
    for (const auto& e : diff.entries)
        std::cerr << "  " << to_string(e.kind) << " at " << e.location << ": " << e.reference_value << " -> " << e.candidate_value << "\n";
}

struct InspectArgs {
    std::string model, report, mode = "structural";
};

int cmd_inspect(const InspectArgs& a) {
    auto sig = extract_signature(load_model(a.model), parse_mode(a.mode));
    if (a.report == "-") {
        std::cout << signature_json(sig);
        return kOk;
    }
    std::cout << render_architecture_report(sig);
    if (!a.report.empty()) write_file(a.report, signature_json(sig));
    return kOk;
}

struct TrainArgs {
    std::string reference, trained, out, report, mode = "structural";
    bool weight_warning = false, stamp_time = false;
};

int cmd_validate_train(const TrainArgs& a) {
    auto reference = load_model(a.reference);
    auto trained = load_model(a.trained);
    ValidationPolicy policy;
    policy.mode = parse_mode(a.mode);
    policy.require_weight_change = a.weight_warning;
    auto outcome = validate_training(reference, trained, policy);
    if (!a.report.empty()) emit(a.report, training_report_json(outcome));
    for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
    if (outcome.verdict == Verdict::Rejected) {
        std::cerr << "Rejected: trained model differs in architecture\n";
        print_diff(outcome.diff);
        return kRejected;
    }
    auto stamped = *outcome.stamped_model;
    if (a.stamp_time) stamped.metadata_props.emplace_back(std::string(kMetaValidatedAt), utc_now());
    save_model(stamped, a.out);
    std::cout << "Validated " << outcome.candidate_digest << "\n";
    return kOk;
}

struct PartitionArgs {
    std::string model, spec, out_reliable, out_nonreliable, manifest;
    bool force = false;
};

int cmd_partition(const PartitionArgs& a) {
    auto model = load_model(a.model);
    auto spec = parse_spec(read_file(a.spec));
    auto r = partition(model, spec, {.force = a.force});
    save_model(r.reliable, a.out_reliable);
    save_model(r.nonreliable, a.out_nonreliable);
    write_file(a.manifest, manifest_to_json(r.manifest));
    std::cout << "reliable " << r.reliable.graph.nodes.size() << " nodes, nonreliable " << r.nonreliable.graph.nodes.size()
              << " nodes, " << r.manifest.boundary_tensors.size() << " boundary tensors\n";
    return kOk;
}

struct MergeArgs {
    std::string model, reliable, nonreliable, manifest, out_reliable, out_nonreliable, report, mode = "structural";
    bool force = false;
};

int cmd_validate_partition(const MergeArgs& a) {
    auto source = load_model(a.model);
    auto d = load_model(a.reliable);
    auto e = load_model(a.nonreliable);
    auto manifest = parse_manifest(read_file(a.manifest));
    ValidationPolicy policy;
    policy.mode = parse_mode(a.mode);
    policy.require_weight_change = false;
    auto outcome = validate_partition(source, d, e, manifest, policy, {.force = a.force});
    if (!a.report.empty()) emit(a.report, partition_report_json(outcome));
    if (outcome.verdict == Verdict::Rejected) {
        std::cerr << "Rejected: partition does not reconstruct the source architecture\n";
        print_diff(outcome.diff);
        for (const auto& f : outcome.consistency_failures) std::cerr << "  " << f << "\n";
        return kRejected;
    }
    if (!a.out_reliable.empty()) save_model(*outcome.stamped_reliable, a.out_reliable);
    if (!a.out_nonreliable.empty()) save_model(*outcome.stamped_nonreliable, a.out_nonreliable);
    std::cout << "Validated " << outcome.reference_digest << "\n";
    for (const auto& s : outcome.safety_report) std::cout << "  safety " << s.kind << " on " << s.location << "\n";
    return kOk;
}

struct RunArgs {
    std::string model, out, inject;
    std::vector<std::string> inputs;
    bool redundant = false;
};

int cmd_run(const RunArgs& a) {
    auto model = load_model(a.model);
    check_supported(model);
    std::vector<std::string> names;
    for (const auto& vi : model.graph.inputs)
        if (!model.graph.find_initializer(vi.name)) names.push_back(vi.name);

    std::map<std::string, Tensor> inputs;
    for (const auto& arg : a.inputs) {
        auto eq = arg.find('=');
        if (eq != std::string::npos && std::find(names.begin(), names.end(), arg.substr(0, eq)) != names.end()) {
            inputs.insert_or_assign(arg.substr(0, eq), read_tensor_file(arg.substr(eq + 1)));
        } else if (names.size() == 1) {
            inputs.insert_or_assign(names[0], read_tensor_file(arg));
        } else {
            throw Error(ErrorKind::InvalidArgument, "model has " + std::to_string(names.size()) + " inputs; bind each with --input name=path");
        }
    }
    FaultPlan fault;
    if (!a.inject.empty()) fault = parse_fault(a.inject);
    auto outcome = run(model, inputs, a.redundant ? ExecutionMode::Redundant : ExecutionMode::Single, fault);
    emit(a.out.empty() ? "-" : a.out, run_outcome_json(outcome));
    std::cerr << "qualifier " << (outcome.qualifier ? "true" : "false") << "\n";
    return kOk;
}

struct SaxArgs {
    std::string image, config = "360,16,4", ref, label;
    bool emit_word = false;
};

int cmd_sax(const SaxArgs& a) {
    auto cfg = SaxConfig::parse(a.config);
    auto img = binarize(read_pnm(a.image));
    auto word = shape_word(img, cfg);
    if (a.emit_word) {
        std::cout << "[";
        for (std::size_t i = 0; i < word.size(); ++i) std::cout << (i ? "," : "") << word[i];
        std::cout << "]\n";
    }
    if (a.label.empty()) return kOk;
    auto table = parse_reference_table(read_file(a.ref));
    auto q = qualify(a.label, word, table, cfg);
    std::cout << to_string(q.verdict);
    if (q.verdict != QualifierVerdict::Undecided) std::cout << " distance " << q.distance;
    std::cout << " word " << word_to_string(word) << "\n";
    return q.verdict == QualifierVerdict::Reject ? kRejected : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Architecture validation, partitioning and reliable execution for ONNX models", "safeai"};
    app.footer(kExitTable);
    app.require_subcommand(1);

    InspectArgs inspect;
    auto* c_inspect = app.add_subcommand("inspect", "Print the architecture report of a model");
    c_inspect->add_option("model", inspect.model, "ONNX file")->required();
    c_inspect->add_option("--report", inspect.report, "Write the JSON signature to a path, or - for stdout");
    c_inspect->add_option("--mode", inspect.mode, "structural or strict-names")->capture_default_str();

    TrainArgs train;
    auto* c_train = app.add_subcommand("validate-train", "Check that training changed only weights; write the stamped model");
    c_train->add_option("--reference", train.reference, "Untrained model A")->required();
    c_train->add_option("--trained", train.trained, "Trained model B")->required();
    c_train->add_option("--out", train.out, "Stamped model C, written only when Validated")->required();
    c_train->add_option("--report", train.report, "JSON report path, or -");
    c_train->add_option("--mode", train.mode, "structural or strict-names")->capture_default_str();
    c_train->add_flag("--force-weight-warning", train.weight_warning, "Warn when no initializer value changed");
    c_train->add_flag("--stamp-time", train.stamp_time, "Also record the validation time (output no longer byte-stable)");

    PartitionArgs part;
    auto* c_part = app.add_subcommand("partition", "Split a validated model into reliable and non-reliable files");
    c_part->add_option("--model", part.model, "Validated model C")->required();
    c_part->add_option("--spec", part.spec, "Partition spec JSON")->required();
    c_part->add_option("--out-reliable", part.out_reliable, "Reliable model D")->required();
    c_part->add_option("--out-nonreliable", part.out_nonreliable, "Non-reliable model E")->required();
    c_part->add_option("--manifest", part.manifest, "Manifest JSON to write")->required();
    c_part->add_flag("--force", part.force, "Accept a model without the validated-trained stamp");

    MergeArgs merge;
    auto* c_merge = app.add_subcommand("validate-partition", "Check that D and E, without safety functions, rebuild C");
    c_merge->add_option("--model", merge.model, "Validated model C")->required();
    c_merge->add_option("--reliable", merge.reliable, "Reliable model D")->required();
    c_merge->add_option("--nonreliable", merge.nonreliable, "Non-reliable model E")->required();
    c_merge->add_option("--manifest", merge.manifest, "Manifest JSON")->required();
    c_merge->add_option("--out-reliable", merge.out_reliable, "Stamped D, written only when Validated");
    c_merge->add_option("--out-nonreliable", merge.out_nonreliable, "Stamped E, written only when Validated");
    c_merge->add_option("--report", merge.report, "JSON report path, or -");
    c_merge->add_option("--mode", merge.mode, "structural or strict-names")->capture_default_str();
    c_merge->add_flag("--force", merge.force, "Accept a model without the validated-trained stamp");

    RunArgs runa;
    auto* c_run = app.add_subcommand("run-reliable", "Execute a model, optionally redundantly with a fault injected");
    c_run->add_option("--model", runa.model, "Model to execute")->required();
    c_run->add_option("--input", runa.inputs, "Tensor JSON or PGM/PBM image; name=path for multi-input models")->required();
    c_run->add_flag("--redundant", runa.redundant, "Evaluate every node twice and compare bit for bit");
    c_run->add_option("--inject", runa.inject, "Flip one bit: node:replica:element:bit");
    c_run->add_option("--out", runa.out, "Output JSON path (default stdout)");
    c_run->footer("Exit 0 whenever execution finishes; a failed comparison is qualifier=false in the output.");

    SaxArgs sax;
    auto* c_sax = app.add_subcommand("sax", "Shape word of a binary image and its verdict against a reference table");
    c_sax->add_option("--image", sax.image, "PGM (thresholded at 128) or PBM image")->required();
    c_sax->add_option("--config", sax.config, "n,w,a")->capture_default_str();
    auto* ref = c_sax->add_option("--ref", sax.ref, "Reference table JSON");
    c_sax->add_option("--class", sax.label, "Class predicted by the CNN")->needs(ref);
    c_sax->add_flag("--emit-word", sax.emit_word, "Print the word as a JSON array");
    c_sax->footer("Exit 1 on REJECT: the verdict is a terminal safety decision.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*c_inspect) return cmd_inspect(inspect);
        if (*c_train) return cmd_validate_train(train);
        if (*c_part) return cmd_partition(part);
        if (*c_merge) return cmd_validate_partition(merge);
        if (*c_run) return cmd_run(runa);
        if (*c_sax) return cmd_sax(sax);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
