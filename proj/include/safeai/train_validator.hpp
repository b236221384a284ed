#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "safeai/model.hpp"
#include "safeai/signature.hpp"

namespace safeai {

enum class Verdict { Validated, Rejected };

std::string_view to_string(Verdict verdict);

inline constexpr std::string_view kStageValidatedTrained = "validated-trained";
inline constexpr std::string_view kStageValidatedPartition = "validated-partition";

inline constexpr std::string_view kMetaSchema = "safeai.schema";
inline constexpr std::string_view kMetaStage = "safeai.stage";
inline constexpr std::string_view kMetaSignature = "safeai.signature";
inline constexpr std::string_view kMetaValidatedAt = "safeai.validated_at";

struct ValidationPolicy {
    SignatureMode mode = SignatureMode::Structural;
    // Warn (never reject) when no initializer value changed.
    bool require_weight_change = true;
    // When false, metadata keys present in the trained file but not in the
    // reference produce a warning. Metadata never affects the verdict.
    bool allow_metadata_additions = true;
};

struct ValidationOutcome {
    Verdict verdict = Verdict::Rejected;
    DiffReport diff;
    std::optional<Model> stamped_model;  // present iff Validated
    std::vector<std::string> warnings;
    std::string reference_digest;
    std::string candidate_digest;
};

// Drops every existing "safeai." metadata key, then appends schema, stage and
// signature in that order. Throws InvalidStage for an empty stage.
Model stamp_model(const Model& model, std::string_view stage, std::string_view digest);

ValidationOutcome validate_training(const Model& reference, const Model& trained,
                                   const ValidationPolicy& policy = {});

}  // namespace safeai
