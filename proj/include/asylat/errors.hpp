#pragma once

#include <stdexcept>
#include <string>

namespace asylat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A constructor invariant was violated (bad region, duplicate points, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two label maps do not cover the same point set.
class StructuralMismatch : public Error {
public:
    using Error::Error;
};

/// A generated slice contains no point inside the region.
class DegenerateSlice : public Error {
public:
    explicit DegenerateSlice(double hbar)
        : Error("degenerate slice: no lattice point maps into the region at hbar=" +
                std::to_string(hbar)),
          hbar_(hbar) {}
    double hbar() const noexcept { return hbar_; }

private:
    double hbar_;
};

class UnsupportedModel : public Error {
public:
    using Error::Error;
};

/// label_single was asked to work on fewer than four points in the working region.
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// No admissible witness links two consecutive slices of a sequence.
class SequenceBreak : public Error {
public:
    SequenceBreak(double hbar_prev, double hbar_next, const std::string& why)
        : Error("sequence break between hbar=" + std::to_string(hbar_prev) +
                " and hbar=" + std::to_string(hbar_next) + ": " + why),
          hbar_prev_(hbar_prev),
          hbar_next_(hbar_next) {}
    double hbar_prev() const noexcept { return hbar_prev_; }
    double hbar_next() const noexcept { return hbar_next_; }

private:
    double hbar_prev_;
    double hbar_next_;
};

/// Chart recovery could not produce a usable fit.
class FitFailure : public Error {
public:
    using Error::Error;
};

/// The least-squares system of a chart fit is rank deficient.
class UnderdeterminedFit : public FitFailure {
public:
    using FitFailure::FitFailure;
};

/// The rotation number diverges at the requested point.
class PoleError : public Error {
public:
    using Error::Error;
};

/// A JSON document does not follow the expected schema. `path` names the offending field.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace asylat
