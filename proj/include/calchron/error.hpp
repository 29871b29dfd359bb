#pragma once

#include <stdexcept>
#include <string>

namespace calchron {

/// Machine-checkable failure categories. Messages carry the human detail
/// (line numbers, offending labels); the code is what callers switch on.
enum class errc {
    malformed_row,
    duplicate_cal_age,
    too_few_knots,
    negative_sigma,
    theta_out_of_domain,
    syntax_error,
    unknown_context,
    duplicate_label,
    cyclic_constraints,
    empty_model,
    infeasible_model,
    too_few_samples,
    shape_mismatch,
    grid_too_large,
    bad_argument,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::malformed_row: return "MalformedRow";
        case errc::duplicate_cal_age: return "DuplicateCalAge";
        case errc::too_few_knots: return "TooFewKnots";
        case errc::negative_sigma: return "NegativeSigma";
        case errc::theta_out_of_domain: return "ThetaOutOfDomain";
        case errc::syntax_error: return "SyntaxError";
        case errc::unknown_context: return "UnknownContext";
        case errc::duplicate_label: return "DuplicateLabel";
        case errc::cyclic_constraints: return "CyclicConstraints";
        case errc::empty_model: return "EmptyModel";
        case errc::infeasible_model: return "InfeasibleModel";
        case errc::too_few_samples: return "TooFewSamples";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::grid_too_large: return "GridTooLarge";
        case errc::bad_argument: return "BadArgument";
        case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace calchron
