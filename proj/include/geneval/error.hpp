#pragma once

#include <stdexcept>
#include <string>

namespace geneval {

/// Raised on contract violations (bad shapes, invalid parameters, malformed files).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const char* message) {
    if (!condition) {
        throw Error(message);
    }
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw Error(message);
    }
}

}  // namespace geneval
