#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safeai/model.hpp"
#include "safeai/partitioner.hpp"
#include "safeai/signature.hpp"
#include "safeai/train_validator.hpp"

namespace safeai {

struct SafetyReportEntry {
    std::string kind;
    std::string target;
    std::string location;
    std::vector<std::string> nodes;
};

struct MergeOutcome {
    Verdict verdict = Verdict::Rejected;
    DiffReport diff;
    std::vector<SafetyReportEntry> safety_report;
    // Manifest/marker/structure inconsistencies that reject the pair even when
    // the merged architecture matches.
    std::vector<std::string> consistency_failures;
    std::optional<Model> stamped_reliable;
    std::optional<Model> stamped_nonreliable;
    std::string reference_digest;
    std::string merged_digest;
};

// Fuses the two files back into one model, dropping the safety nodes and
// restoring the original interface. Throws BoundaryMismatch,
// DanglingSafetyNode or InterfaceMismatch.
Model merge_partitions(const Model& reliable, const Model& nonreliable, const PartitionManifest& manifest);

struct MergeOptions {
    bool force = false;  // accept a source model without the validated-trained stamp
};

// Throws NotStamped and ManifestDigestMismatch. Merge failures and marker
// inconsistencies are reported as a Rejected verdict.
MergeOutcome validate_partition(const Model& source, const Model& reliable, const Model& nonreliable,
                                const PartitionManifest& manifest, const ValidationPolicy& policy = {},
                                const MergeOptions& options = {});

}  // namespace safeai
