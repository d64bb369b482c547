#pragma once

#include <stdexcept>
#include <string>

namespace rdsa {

// Broad failure categories; the CLI maps these onto process exit codes.
enum class ErrorKind {
    config,    // bad run configuration, rejected before any work starts
    data,      // unreadable or malformed input data
    training,  // optimization failure (divergence)
    pipeline,  // a pipeline-stage contract was violated
    logic,     // precondition violation inside the library
};

enum class ErrorCode {
    missing_column,
    non_numeric_cell,
    empty_file,
    fraction_out_of_range,
    not_positive_semi_definite,
    empty_feature,
    non_finite_value,
    invalid_architecture,
    dimension_mismatch,
    non_finite_loss,
    scope_mismatch,
    too_many_vars,
    empty_outcome_list,
    shape_mismatch,
    too_few_samples,
    single_class,
    length_mismatch,
    empty_list,
    insufficient_adversaries,
    missing_run_artifacts,
    bad_config,
    io_failure,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, ErrorCode code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(code) {}

    ErrorKind kind() const noexcept { return kind_; }
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    ErrorCode code_;
};

}  // namespace rdsa
