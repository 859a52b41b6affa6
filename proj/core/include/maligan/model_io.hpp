#pragma once

#include <memory>
#include <string>

#include "maligan/generator.hpp"

namespace maligan {

/// Writes <prefix>.json (architecture metadata) and <prefix>.ckpt (parameter
/// checkpoint). load_model reconstructs the generator from the pair.
void save_model(const std::string& prefix, const Generator& gen);
std::unique_ptr<Generator> load_model(const std::string& prefix);

}  // namespace maligan
