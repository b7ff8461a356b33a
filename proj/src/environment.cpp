#include "cgrl/environment.hpp"

#include "cgrl/errors.hpp"

namespace cgrl {

bool Environment::expert_available(int /*script*/) const { return false; }

EnvStep Environment::step_expert(int script) {
  throw OptionUnavailable(name() + " has no expert script " + std::to_string(script));
}

}  // namespace cgrl
