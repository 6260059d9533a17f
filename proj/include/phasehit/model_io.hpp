#pragma once

#include "phasehit/core.hpp"

#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace phasehit {

/// Lattice shorthand: a constrained random walk on a box of integer levels.
/// Coordinate k has levels 0..dims[k]-1; target k is the zero face {z_k = 0}
/// and is absorbing (once a coordinate reaches zero, increments touching it
/// are disabled); the top face {z_k = dims[k]-1} reflects (increments raising
/// that coordinate are disabled there).
struct LatticeSpec {
  std::vector<int> dims;
  std::vector<std::pair<std::vector<int>, double>> increments;  // (step vector, rate)
};

IntensityModel expand_lattice(const LatticeSpec& spec);

/// Label of a lattice point, e.g. "2_1_0".
std::string lattice_label(const std::vector<int>& z);

/// Parses the model text format. Sections (one directive per line, '#'
/// comments): `states`, `rate from to value`, `target k state...`,
/// `alpha state weight` or `alpha uniform-interior`, and the lattice
/// shorthand `lattice dims ...` / `lattice inc dz... rate`.
/// Errors carry the offending line number. The parsed model is validated.
IntensityModel parse_model(std::istream& in);
IntensityModel load_model(const std::string& path);

/// Explicit serialization (states, rates, targets, alpha) that reloads to a
/// bit-identical model; rates are printed with exact round-trip precision.
std::string serialize_model(const IntensityModel& model);

}  // namespace phasehit
