#pragma once

#include "phasehit/core.hpp"
#include "phasehit/partitions.hpp"
#include "phasehit/tails.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

namespace phasehit {

/// One simulated trajectory. Hitting times carry the jump ordinal that
/// produced them, so simultaneity detection is exact rather than
/// tolerance-based: two hitting times tie iff one jump entered both targets.
struct PathSample {
  std::vector<double> jump_times;   // strictly increasing, excludes time 0
  std::vector<Index> states;        // states[0] initial, states[j] after jump j
  std::map<int, double> tau;        // first hitting time per target key, +inf if unhit
  std::map<int, int> tau_jump;      // jump ordinal of the hit (0 = initial state), -1 if unhit
  double horizon = 0.0;
  bool trapped = false;             // reached a zero-rate state before hitting everything

  static constexpr double never() { return std::numeric_limits<double>::infinity(); }
};

struct EmpiricalEstimate {
  double value = 0.0;
  double stderror = 0.0;  // sqrt(p(1-p)/n) for frequencies
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  double censored_fraction = 0.0;  // paths with some target unhit at the horizon
};

/// 20 over the smallest positive total jump rate; a crude but serviceable
/// default cutoff for desk-scale models.
double default_horizon(const IntensityModel& model);

/// Exact CTMC simulation: exponential holding times, jump-chain transitions.
/// The stream is derived from (seed, path_index), so results do not depend on
/// how paths are distributed over threads.
PathSample sample_path(const IntensityModel& model, double horizon, std::uint64_t seed,
                       std::uint64_t path_index = 0);

/// Worker count for the path loops: `requested` if positive, otherwise the
/// PHASEHIT_THREADS environment cap, otherwise the hardware concurrency.
int resolve_workers(int requested = 0);

/// Frequency of {classify(tau) == s, all targets hit by the horizon}.
EmpiricalEstimate estimate_region_prob(const IntensityModel& model, const Region& s,
                                       std::int64_t n, double horizon, std::uint64_t seed,
                                       int workers = 0);

/// Per-path evaluation of a canonical tail event (see tail_event_holds).
EmpiricalEstimate estimate_tail(const IntensityModel& model, const TailQuery& q,
                                std::int64_t n, double horizon, std::uint64_t seed,
                                int workers = 0);

/// One pass over n paths, tallying every region at once.
struct RegionTally {
  std::map<Region, std::int64_t> counts;  // fully classified paths
  std::int64_t censored = 0;              // some target unhit at the horizon
  std::int64_t n = 0;
};
RegionTally count_regions(const IntensityModel& model, std::int64_t n, double horizon,
                          std::uint64_t seed, int workers = 0);

/// Whether the recorded hitting times of one path satisfy the canonical tail
/// event: every multi-index block jointly hit by a single jump, block hit
/// times pairwise distinct, and each timed block hit strictly after its bound.
bool tail_event_holds(const PathSample& path, const TailQuery& q);

/// Axis-aligned bins over the free coordinates of a region: edges[d] are the
/// sorted cell boundaries of coordinate d (the common hitting time of block d).
struct BoxGrid {
  std::vector<std::vector<double>> edges;
};

struct BoxEstimate {
  std::vector<double> center;
  double volume = 0.0;
  EmpiricalEstimate density;  // frequency / volume, a histogram estimate of f
};

/// Histogram estimate of the joint density over a box partition inside one
/// region's coordinate chart.
std::vector<BoxEstimate> binned_density(const IntensityModel& model, const Region& s,
                                        const BoxGrid& grid, std::int64_t n,
                                        std::uint64_t seed, int workers = 0);

/// Region classification from a path's recorded hits: exact ties come from
/// shared jump ordinals. Returns nothing when some target was never hit.
std::optional<Region> classify_path(const PathSample& path);

/// Discrete-time analogue of sample_path on the embedded jump chain; used to
/// verify equality probabilities path by path.
std::vector<Index> sample_embedded_path(const IntensityModel& model, int max_steps,
                                        std::uint64_t seed, std::uint64_t path_index);

}  // namespace phasehit
