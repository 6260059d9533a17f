#pragma once

#include "phasehit/core.hpp"
#include "phasehit/partitions.hpp"
#include "phasehit/table.hpp"
#include "phasehit/tails.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phasehit {

/// One grid axis "lo:hi:cells"; cells are half-open boxes, values reported at
/// cell centers.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int cells = 0;
};

std::vector<GridAxis> parse_grid(const std::string& text);

/// "1=0.3,2=0.5" -> hitting-time coordinates per target key.
TimeVector parse_time_spec(const std::string& text);

/// Constraint grammar: `tau(k) > c` and `tau(j) == tau(k)` joined by `&&`.
/// Errors carry the character position.
TailConstraints parse_tail_expr(const std::string& text);

struct DensityCommand {
  std::optional<TimeVector> t;                  // point mode
  std::optional<Region> region;                 // required in grid mode
  std::optional<std::vector<GridAxis>> grid;    // one axis per region block
  bool absorbing_form = false;                  // use the full-generator variant
  int workers = 0;
};

/// Density table: point mode emits one row, grid mode one row per box center
/// that lies inside the region's wedge.
ResultTable cmd_density(const IntensityModel& model, const DensityCommand& cmd);

struct TailCommand {
  std::string expression;
  double tol = 1e-9;
  std::int64_t sim_paths = 0;  // > 0 adds a simulated cross-check column
  double horizon = 0.0;        // 0 = default
  std::uint64_t seed = 1;
};

/// Canonical decomposition of the raw event, one row per exact tie pattern,
/// plus the total.
ResultTable cmd_tail(const IntensityModel& model, const TailCommand& cmd);

enum class SimulateReport { regions, tails, histogram };

struct SimulateCommand {
  SimulateReport report = SimulateReport::regions;
  std::int64_t paths = 100000;
  double horizon = 0.0;  // 0 = default
  std::uint64_t seed = 1;
  std::string event;                          // tails report
  std::optional<Region> region;               // histogram report
  std::optional<std::vector<GridAxis>> grid;  // histogram report
  int workers = 0;
};

ResultTable cmd_simulate(const IntensityModel& model, const SimulateCommand& cmd);

enum class VerifySuite { special_cases, cross_oracles, simulation };

struct VerifyCommand {
  VerifySuite suite = VerifySuite::special_cases;
  std::int64_t budget = 100000;  // simulation paths
  std::uint64_t seed = 1;
  double tol = 1e-9;
  int workers = 0;
};

/// Machine-readable check table: check, status, measured, bound.
ResultTable cmd_verify(const IntensityModel& model, const VerifyCommand& cmd);

/// True when every row of a verify table reports "pass".
bool verify_passed(const ResultTable& table);

}  // namespace phasehit
