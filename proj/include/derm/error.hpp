#pragma once

#include <stdexcept>
#include <string>

namespace derm {

// Validation failures (bad inputs, broken invariants) throw Error.
// The CLI maps Error to exit code 2; anything else is a hard failure.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace derm
