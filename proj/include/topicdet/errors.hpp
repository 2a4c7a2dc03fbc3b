#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace topicdet {

// Malformed input file or record. Carries the 1-based line (or record) index
// when one is known, 0 otherwise.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Structural constraint violated by otherwise well-formed data (duplicate ids, etc).
class IntegrityError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration or rule set that fails its invariants.
class ValidationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class FormatError : public ParseError {
    using ParseError::ParseError;
};

class TrainingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SMO stopped at the iteration cap before reaching the KKT tolerance.
class ConvergenceError : public TrainingError {
public:
    ConvergenceError(double kkt_violation, std::size_t iterations)
        : TrainingError("SMO did not converge after " + std::to_string(iterations) +
                        " iterations (max KKT violation " + std::to_string(kkt_violation) + ")"),
          kkt_violation_(kkt_violation),
          iterations_(iterations) {}

    double kkt_violation() const noexcept { return kkt_violation_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double kkt_violation_;
    std::size_t iterations_;
};

// Wrong vector dimension handed to a model.
class InputError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class EvaluationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace topicdet
