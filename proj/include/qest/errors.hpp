#ifndef QEST_ERRORS_HPP
#define QEST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qest {

// Thrown when a posterior has collapsed to zero spread and a policy rule
// that divides by sigma_g can no longer produce a setting.
class DegeneratePosteriorError : public std::runtime_error {
public:
    explicit DegeneratePosteriorError(const std::string& what)
        : std::runtime_error(what) {}
};

}  // namespace qest

#endif
