#pragma once

#include "phasehit/core.hpp"
#include "phasehit/expm.hpp"
#include "phasehit/partitions.hpp"

#include <optional>

namespace phasehit {

struct DensityQuery {
  TimeVector t;                      // hitting-time coordinates, keys are target indices
  std::optional<Region> region;     // inferred from t when absent
  std::optional<RowVector> alpha;   // overrides the model's initial distribution
};

struct DensityValue {
  double value = 0.0;      // density w.r.t. the |s|-dimensional measure on the region
  Region region;
  int dimension = 0;       // number of blocks of the region
};

/// Distribution of the chain at time u over paths that avoid d throughout:
/// alpha e^{u L(d^c)}. Requires the initial distribution to vanish on d.
RowVector taboo_distribution(const IntensityModel& model, const StateSet& d, double u);
RowVector taboo_distribution(const IntensityModel& model, const RowVector& alpha,
                             const StateSet& d, double u);

struct SurvivalValue {
  double survival = 0.0;      // P(first entry into d happens after u)
  double mass_at_zero = 0.0;  // initial mass already sitting inside d
};

/// Survival function of the first entry time into d, valid for any initial
/// distribution: the mass starting inside d is reported separately.
SurvivalValue survival_single(const IntensityModel& model, const StateSet& d, double u);

/// Density at u of {first entry into a happens at u, b untouched before}:
/// alpha e^{u L(d^c)} L(d^c, a) 1 with d = a union b.
double density_single(const IntensityModel& model, const StateSet& a, const StateSet& b,
                      double u);

/// Law of the landing state given that the entry into a happened at u with b
/// untouched. Sums to one; supported inside a.
RowVector post_jump_distribution(const IntensityModel& model, const StateSet& a,
                                 const StateSet& b, double u);

/// Joint density of the hitting-time vector at t, with respect to the
/// region's reference measure. The region is inferred from ties in t unless
/// supplied (then checked for consistency).
DensityValue joint_density(const IntensityModel& model, const DensityQuery& q);
double joint_density(const IntensityModel& model, const RowVector& alpha, const TimeVector& t);

/// Same value computed with the full generator in every exponential; valid
/// only when each target set is absorbing.
DensityValue joint_density_absorbing(const IntensityModel& model, const DensityQuery& q);

/// Absorbing-case variant built on the nested waiting/target sets; agrees
/// with the other two on absorbing models.
DensityValue joint_density_absorbing_nested(const IntensityModel& model,
                                            const DensityQuery& q);

/// One term of the initial-mass decomposition: with probability `weight` the
/// hitting problem restarts from `alpha` with the `frozen` coordinates pinned
/// to zero.
struct InitialComponent {
  double weight = 0.0;
  RowVector alpha;
  std::vector<int> frozen;
};

/// Splits an initial distribution charging the targets into components the
/// density theorem applies to: a renormalized off-target part plus one point
/// mass per charged target state.
std::vector<InitialComponent> decompose_initial(const IntensityModel& model);

struct Observation {
  Index state = 0;                 // position of the chain at the observation time
  std::map<int, double> visited;   // hitting times already recorded by then
};

/// Conditional density of the still-unhit coordinates, shifted to start at
/// the observation time: the chain restarts from the observed state.
DensityValue conditional_density(const IntensityModel& model, double u0,
                                 const Observation& obs, const TimeVector& t_remaining);

}  // namespace phasehit
