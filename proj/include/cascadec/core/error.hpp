// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cascadec {

enum class Errc {
    missing_field,
    kind_mismatch,
    empty_inputs,
    unknown_key,
    invalid_config,
    provider_unavailable,
    context_overflow,
    dim_mismatch,
    empty_training_set,
    bad_distribution,
    empty_sequence,
    non_positive_prob,
    not_enough_examples,
    parse_failure,
    zero_cost,
    empty_validation,
    missing_provider,
    untrainable_model,
    schema_mismatch,
    io_error,
    corrupt_cache,
};

constexpr std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::missing_field: return "MissingField";
    case Errc::kind_mismatch: return "KindMismatch";
    case Errc::empty_inputs: return "EmptyInputs";
    case Errc::unknown_key: return "UnknownKey";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::provider_unavailable: return "ProviderUnavailable";
    case Errc::context_overflow: return "ContextOverflow";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::empty_training_set: return "EmptyTrainingSet";
    case Errc::bad_distribution: return "BadDistribution";
    case Errc::empty_sequence: return "EmptySequence";
    case Errc::non_positive_prob: return "NonPositiveProb";
    case Errc::not_enough_examples: return "NotEnoughExamples";
    case Errc::parse_failure: return "ParseFailure";
    case Errc::zero_cost: return "ZeroCost";
    case Errc::empty_validation: return "EmptyValidation";
    case Errc::missing_provider: return "MissingProvider";
    case Errc::untrainable_model: return "UntrainableModel";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::io_error: return "IoError";
    case Errc::corrupt_cache: return "CorruptCache";
    }
    return "Unknown";
}

/// The single exception type thrown by the library. `code()` identifies the
/// failure class; the message carries the detail.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& detail)
        : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace cascadec
