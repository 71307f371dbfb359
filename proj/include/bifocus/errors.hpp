#ifndef BIFOCUS_ERRORS_HPP
#define BIFOCUS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bifocus {

// Violated precondition or broken invariant: the caller handed us something
// outside the documented contract. CLI maps these to exit code 2.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// A numerically valid request that failed at runtime (divergence, underflow,
// exhausted search). CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceError : NumericError {
    explicit ConvergenceError(const std::string& what) : NumericError(what) {}
};

struct DivergenceError : NumericError {
    explicit DivergenceError(const std::string& what) : NumericError(what) {}
};

struct SearchExhaustedError : NumericError {
    explicit SearchExhaustedError(const std::string& what) : NumericError(what) {}
};

struct DegenerateKError : NumericError {
    explicit DegenerateKError(const std::string& what) : NumericError(what) {}
};

struct IllPosedError : NumericError {
    explicit IllPosedError(const std::string& what) : NumericError(what) {}
};

// Not a failure: the even-root solve needs the opposite sign branch of the
// rotated lead pair. Callers retry with a k of the other parity class.
struct BranchFlipSignal : NumericError {
    explicit BranchFlipSignal(const std::string& what) : NumericError(what) {}
};

} // namespace bifocus

#endif
