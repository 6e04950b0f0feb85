#ifndef ZIBC_ERRORS_HPP
#define ZIBC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace zibc {

// Bad arguments, dimension mismatches, malformed input files. CLI exit code 2.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A parameter outside its mathematical domain (mu <= 0, pi >= 1, ...). CLI exit code 2.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Non-convergence, singular systems, overflow. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace zibc

#endif
