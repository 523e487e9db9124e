#include "dissent/errors.hpp"

namespace dissent {

const char* version() noexcept { return DISSENT_VERSION; }

}  // namespace dissent
