#pragma once

#include <string>

#include "safeai/merge_validator.hpp"
#include "safeai/signature.hpp"
#include "safeai/train_validator.hpp"

namespace safeai {

// Deterministic JSON renderings, two-space indented, trailing newline.
std::string training_report_json(const ValidationOutcome& outcome);
std::string partition_report_json(const MergeOutcome& outcome);
std::string signature_json(const ArchitectureSignature& sig);

}  // namespace safeai
