#pragma once

#include <stdexcept>
#include <string>

namespace recolat {

// Raised for invalid models, inputs that violate a documented precondition,
// and numerical failures the caller can act on. The CLI maps it to exit 1.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw ModelError(message);
    }
}

}  // namespace recolat
