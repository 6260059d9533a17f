#include "phasehit/hitting.hpp"

#include <cmath>

namespace phasehit {

namespace {

void check_alpha_off(const RowVector& alpha, const StateSet& d, const char* caller) {
  for (Index i : d.indices())
    if (alpha(i) != 0.0)
      throw ValueError(std::string(caller) +
                       ": initial distribution charges the avoided set; "
                       "split it with decompose_initial first");
}

RowVector model_alpha(const IntensityModel& model, const std::optional<RowVector>& alpha) {
  if (!alpha) return model.alpha;
  if (alpha->size() != model.num_states())
    throw ValueError("initial distribution does not match the state space");
  return *alpha;
}

}  // namespace

RowVector taboo_distribution(const IntensityModel& model, const RowVector& alpha,
                             const StateSet& d, double u) {
  if (u < 0.0) throw ValueError("taboo_distribution: negative time");
  if (d.universe() != model.num_states())
    throw ValueError("taboo_distribution: set does not match the model");
  check_alpha_off(alpha, d, "taboo_distribution");
  return expm_apply(alpha, mask(model, d.complement(), d.complement()), u);
}

RowVector taboo_distribution(const IntensityModel& model, const StateSet& d, double u) {
  return taboo_distribution(model, model.alpha, d, u);
}

SurvivalValue survival_single(const IntensityModel& model, const StateSet& d, double u) {
  if (u < 0.0) throw ValueError("survival_single: negative time");
  if (d.universe() != model.num_states())
    throw ValueError("survival_single: set does not match the model");
  const StateSet dc = d.complement();
  RowVector masked_alpha = model.alpha * projector(dc, model.num_states());
  SurvivalValue out;
  out.mass_at_zero = model.alpha.sum() - masked_alpha.sum();
  out.survival = expm_apply(masked_alpha, mask(model, dc, dc), u).sum();
  return out;
}

double density_single(const IntensityModel& model, const StateSet& a, const StateSet& b,
                      double u) {
  if (a.intersects(b)) throw ValueError("density_single: entry and taboo sets overlap");
  if (a.empty()) throw ValueError("density_single: empty entry set");
  if (!(u > 0.0)) throw ValueError("density_single: time must be positive");
  const StateSet d = a | b;
  check_alpha_off(model.alpha, d, "density_single");
  const StateSet dc = d.complement();
  RowVector v = expm_apply(model.alpha, mask(model, dc, dc), u);
  return (v * mask(model, dc, a)).sum();
}

RowVector post_jump_distribution(const IntensityModel& model, const StateSet& a,
                                 const StateSet& b, double u) {
  if (a.intersects(b)) throw ValueError("post_jump_distribution: sets overlap");
  if (a.empty()) throw ValueError("post_jump_distribution: empty entry set");
  const StateSet d = a | b;
  check_alpha_off(model.alpha, d, "post_jump_distribution");
  const StateSet dc = d.complement();
  RowVector a1 = expm_apply(model.alpha, mask(model, dc, dc), u) * mask(model, dc, a);
  const double total = a1.sum();
  if (!(total > 0.0))
    throw ValueError("post_jump_distribution: conditioning on a null event");
  return a1 / total;
}

namespace {

double product_density(const IntensityModel& model, RowVector v, const Region& region,
                       const std::vector<double>& tbar,
                       const std::vector<WaitTarget>& steps, bool full_generator) {
  // Left-to-right product: one row vector, alternating exponential action and
  // one masked-rate multiplication per recorded hit.
  double prev = 0.0;
  for (size_t n = 0; n < steps.size(); ++n) {
    const Matrix expo = full_generator ? model.lambda
                                       : mask(model, steps[n].waiting, steps[n].waiting);
    v = expm_apply(v, expo, tbar[n] - prev);
    v = v * mask(model, steps[n].waiting, steps[n].target);
    prev = tbar[n];
  }
  (void)region;
  double total = v.sum();
  // structurally zero products can round to a negative speck
  if (total < 0.0 && total > -1e-12) total = 0.0;
  return total;
}

struct PreparedQuery {
  RowVector alpha;
  Region region;
  std::vector<double> tbar;  // common block times, increasing
};

PreparedQuery prepare(const IntensityModel& model, const DensityQuery& q) {
  PreparedQuery out;
  out.alpha = model_alpha(model, q.alpha);
  if (q.t.empty()) throw ValueError("joint density: empty time vector");
  for (const auto& [k, v] : q.t) {
    model.target(k);  // validates the key
    if (!(v > 0.0))
      throw ValueError("joint density: time for target " + std::to_string(k) +
                       " must be strictly positive");
  }
  Region inferred = classify(q.t);
  if (q.region) {
    if (!(*q.region == inferred))
      throw ValueError("joint density: supplied region " + region_to_string(*q.region) +
                       " does not contain t (which lies in " + region_to_string(inferred) +
                       ")");
  }
  out.region = inferred;
  std::vector<int> keys;
  for (const auto& [k, v] : q.t) keys.push_back(k);
  check_alpha_off(out.alpha, model.target_union(keys), "joint density");
  for (size_t n = 0; n < out.region.blocks.block_count(); ++n)
    out.tbar.push_back(q.t.at(out.region.blocks.block(n).front()));
  return out;
}

}  // namespace

double joint_density(const IntensityModel& model, const RowVector& alpha, const TimeVector& t) {
  DensityQuery q;
  q.t = t;
  q.alpha = alpha;
  return joint_density(model, q).value;
}

DensityValue joint_density(const IntensityModel& model, const DensityQuery& q) {
  PreparedQuery p = prepare(model, q);
  const auto steps = waiting_target_sets(model, p.region);
  DensityValue out;
  out.region = p.region;
  out.dimension = static_cast<int>(p.region.dimension());
  out.value = product_density(model, p.alpha, p.region, p.tbar, steps, false);
  return out;
}

namespace {

void require_absorbing(const IntensityModel& model) {
  if (auto why = absorbing_violation(model)) throw ValueError(*why);
}

}  // namespace

DensityValue joint_density_absorbing(const IntensityModel& model, const DensityQuery& q) {
  require_absorbing(model);
  PreparedQuery p = prepare(model, q);
  const auto steps = waiting_target_sets(model, p.region);
  DensityValue out;
  out.region = p.region;
  out.dimension = static_cast<int>(p.region.dimension());
  out.value = product_density(model, p.alpha, p.region, p.tbar, steps, true);
  return out;
}

DensityValue joint_density_absorbing_nested(const IntensityModel& model,
                                            const DensityQuery& q) {
  require_absorbing(model);
  PreparedQuery p = prepare(model, q);
  const auto steps = waiting_target_sets_absorbing(model, p.region);
  DensityValue out;
  out.region = p.region;
  out.dimension = static_cast<int>(p.region.dimension());
  out.value = product_density(model, p.alpha, p.region, p.tbar, steps, false);
  return out;
}

std::vector<InitialComponent> decompose_initial(const IntensityModel& model) {
  const StateSet gamma = model.target_union();
  std::vector<InitialComponent> out;
  double off_mass = 0.0;
  RowVector off = RowVector::Zero(model.num_states());
  for (Index i = 0; i < model.num_states(); ++i) {
    if (!gamma.contains(i)) {
      off(i) = model.alpha(i);
      off_mass += model.alpha(i);
    }
  }
  if (off_mass > 0.0) out.push_back({off_mass, off / off_mass, {}});
  for (Index i : gamma.indices()) {
    if (model.alpha(i) == 0.0) continue;
    InitialComponent c;
    c.weight = model.alpha(i);
    c.alpha = RowVector::Zero(model.num_states());
    c.alpha(i) = 1.0;
    for (const auto& [k, g] : model.targets)
      if (g.contains(i)) c.frozen.push_back(k);
    out.push_back(std::move(c));
  }
  return out;
}

DensityValue conditional_density(const IntensityModel& model, double u0,
                                 const Observation& obs, const TimeVector& t_remaining) {
  if (u0 < 0.0) throw ValueError("conditional_density: negative observation time");
  if (obs.state < 0 || obs.state >= model.num_states())
    throw ValueError("conditional_density: observed state out of range");
  std::vector<int> remaining;
  for (int k : model.target_keys())
    if (!obs.visited.count(k)) remaining.push_back(k);
  for (const auto& [k, v] : t_remaining)
    if (obs.visited.count(k))
      throw ValueError("conditional_density: target " + std::to_string(k) +
                       " already visited at the observation time");
  for (const auto& [k, v] : obs.visited)
    if (v > u0)
      throw ValueError("conditional_density: recorded hit after the observation time");
  for (int k : remaining)
    if (model.target(k).contains(obs.state))
      throw ValueError("conditional_density: observed state sits inside unvisited target " +
                       std::to_string(k));
  if (remaining.empty()) {
    // Everything already hit: the conditional law of an empty coordinate
    // vector is the unit mass, reported as density one in dimension zero.
    DensityValue out;
    out.value = 1.0;
    out.dimension = 0;
    return out;
  }
  if (t_remaining.size() != remaining.size())
    throw ValueError("conditional_density: time vector must cover exactly the unvisited targets");
  DensityQuery q;
  q.t = t_remaining;
  RowVector delta = RowVector::Zero(model.num_states());
  delta(obs.state) = 1.0;
  q.alpha = delta;
  return joint_density(model, q);
}

}  // namespace phasehit
