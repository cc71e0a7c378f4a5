#pragma once

#include <stdexcept>
#include <string>

namespace mixsel {

// Error families map to CLI exit codes: InputError -> 2,
// NumericalError -> 3, FlatPath (unrecovered) -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

// Malformed rows/cells in tabular input.
struct ParseError : InputError {
    using InputError::InputError;
};

// A variable with fewer than 2 observed states.
struct DegenerateVariable : InputError {
    using InputError::InputError;
};

// Model/parameter shape or simplex violations.
struct InvalidModel : InputError {
    using InputError::InputError;
};

// JSON document does not match the documented schema.
struct SchemaError : InputError {
    using InputError::InputError;
};

// Enumerable sample space exceeds the configured point cap.
struct SpaceTooLarge : InputError {
    using InputError::InputError;
};

// Exhaustive enumeration would exceed the fit budget.
struct BudgetExceeded : InputError {
    using InputError::InputError;
};

struct EmptyPool : InputError {
    using InputError::InputError;
};

// A mixture component lost all its responsibility mass.
struct EmptyCluster : NumericalError {
    using NumericalError::NumericalError;
};

// Some observation has zero density under every component.
struct AllComponentsZero : NumericalError {
    using NumericalError::NumericalError;
};

// All candidate models share one dimension; no slope to fit.
struct DegenerateRegression : NumericalError {
    using NumericalError::NumericalError;
};

// The dimension path shows no jump at all.
struct FlatPath : Error {
    using Error::Error;
};

} // namespace mixsel
