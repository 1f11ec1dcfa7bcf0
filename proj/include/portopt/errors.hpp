#pragma once

#include <stdexcept>
#include <string>

namespace portopt {

// Bad or missing input data (files, manifests, malformed series). CLI exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage was requested before its prerequisite artifact exists. CLI exit code 3.
class PrereqError : public std::runtime_error {
public:
    explicit PrereqError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses or values during training. CLI exit code 4.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace portopt
