#include "mlfas/error.hpp"

namespace mlfas {

Error::Error(std::string kind, const std::string& message)
    : std::runtime_error(message), kind_(std::move(kind)) {}

}  // namespace mlfas
