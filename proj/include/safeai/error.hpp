#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace safeai {

enum class ErrorKind {
    Io,
    Parse,
    UnsupportedFeature,
    InvalidGraph,
    InvalidModel,
    ModeMismatch,
    InvalidStage,
    SpecParse,
    SpecSchema,
    UnresolvedSelector,
    CyclicCut,
    UnknownBoundaryShape,
    EmptyPartition,
    NotStamped,
    NotAConv,
    WeightNotInitializer,
    ChannelRange,
    KernelTooSmall,
    BoundaryMismatch,
    DanglingSafetyNode,
    InterfaceMismatch,
    ManifestDigestMismatch,
    MissingInput,
    ShapeMismatch,
    UnsupportedOp,
    NonFiniteResult,
    InvalidArgument,
    NoShape,
    DegenerateShape,
    BadWordLength,
    LengthMismatch,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the toolchain carries a kind so callers (the CLI in
// particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace safeai
