#pragma once

#include <filesystem>
#include <vector>

#include "tubeground/adam.hpp"
#include "tubeground/graph.hpp"

namespace tubeground {

/// One STVF tensor per named parameter under dir/, plus optimizer.json
/// (scalars + moment file names) when an optimizer is given.
void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<Parameter*>& params,
                     const nn::AdamOptimizer* optimizer = nullptr);

/// Restores values (and optimizer moments when present) in place. Parameter
/// shapes must match the checkpoint.
void load_checkpoint(const std::filesystem::path& dir,
                     const std::vector<Parameter*>& params,
                     nn::AdamOptimizer* optimizer = nullptr);

}  // namespace tubeground
