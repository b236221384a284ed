#include "safeai/train_validator.hpp"

#include <set>

#include "safeai/error.hpp"

namespace safeai {

std::string_view to_string(Verdict verdict) {
    return verdict == Verdict::Validated ? "Validated" : "Rejected";
}

Model stamp_model(const Model& model, std::string_view stage, std::string_view digest) {
    if (stage.empty()) throw Error(ErrorKind::InvalidStage, "stage text is empty");
    Model out = model;
    std::erase_if(out.metadata_props, [](const auto& kv) { return kv.first.starts_with("safeai."); });
    out.metadata_props.emplace_back(kMetaSchema, "1");
    out.metadata_props.emplace_back(kMetaStage, stage);
    out.metadata_props.emplace_back(kMetaSignature, digest);
    return out;
}

ValidationOutcome validate_training(const Model& reference, const Model& trained, const ValidationPolicy& policy) {
    auto ref_sig = extract_signature(reference, policy.mode);
    auto cand_sig = extract_signature(trained, policy.mode);

    ValidationOutcome out;
    out.diff = diff_signatures(ref_sig, cand_sig);
    out.reference_digest = ref_sig.digest;
    out.candidate_digest = cand_sig.digest;
    out.verdict = out.diff.architectures_equal() ? Verdict::Validated : Verdict::Rejected;

    if (policy.require_weight_change && out.diff.weight_changes.empty()) {
        out.warnings.push_back("no initializer value changed between reference and trained model");
    }
    if (!policy.allow_metadata_additions) {
        std::set<std::string> known;
        for (const auto& [k, v] : reference.metadata_props) known.insert(k);
        for (const auto& [k, v] : trained.metadata_props) {
            if (!known.contains(k)) out.warnings.push_back("metadata key added by training: " + k);
        }
    }
    if (out.verdict == Verdict::Validated) {
        out.stamped_model = stamp_model(trained, kStageValidatedTrained, cand_sig.digest);
    }
    return out;
}

}  // namespace safeai
