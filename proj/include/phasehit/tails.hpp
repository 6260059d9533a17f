#pragma once

#include "phasehit/core.hpp"
#include "phasehit/expm.hpp"
#include "phasehit/partitions.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace phasehit {

/// Canonical tail event. Blocks of s1 carry a joint-hit constraint (for
/// multi-index blocks) plus a time bound: the block's common hitting time
/// exceeds t[n]. Blocks of s2 carry the joint-hit constraint only. A block
/// with several indices requires one jump to enter all of its targets
/// simultaneously, at a finite time; the common times of distinct multi-index
/// blocks never coincide. Single-index blocks impose their time bound only --
/// in particular single-index s2 blocks are no-ops and unhit coordinates
/// satisfy any bound.
struct TailQuery {
  SubPartition s1;
  SubPartition s2;
  std::vector<double> t;  // one bound per s1 block, nondecreasing, >= 0

  void validate() const;
  std::string to_string() const;
};

struct TailResult {
  Vector p;            // per-start-state probability of the event
  double value = 0.0;  // contraction against the model's initial distribution
};

struct TailOptions {
  QuadratureRule quad{QuadratureRule::Kind::adaptive, 4, 16384, 1e-9, 1e-9};
};

/// Tail probability by the recursive decomposition over the first resolved
/// joint-hit constraint inside [0, t1].
TailResult tail_p(const IntensityModel& model, const TailQuery& q,
                  const TailOptions& opts = {});

/// Closed product form for bound-only queries: every s1 block a singleton,
/// no s2. Requires strictly increasing bounds.
TailResult tail_p_simple(const IntensityModel& model, const SubPartition& s1,
                         const std::vector<double>& t, const TailOptions& opts = {});

/// Same value as tail_p via the subpermutation representation: the joint hits
/// landing inside [0, t1] are enumerated explicitly and integrated over the
/// ordered simplex instead of being pushed into the recursion.
TailResult tail_p_alt(const IntensityModel& model, const TailQuery& q,
                      const TailOptions& opts = {});

/// Valid when every target set is absorbing: full-generator exponentials with
/// projector corrections. Agrees with tail_p there.
TailResult tail_p_absorbing(const IntensityModel& model, const TailQuery& q,
                            const TailOptions& opts = {});

/// Embedded jump chain: one-step transition matrix and the diagonal of mean
/// holding times. Zero-rate states become unit self-loops with zero holding
/// entry. Where defined, transitions = I + D * lambda entrywise.
std::pair<Matrix, Matrix> embedded_chain(const IntensityModel& model);

/// q(i) = P_i(the first entries into the two targets coincide): one on the
/// intersection, zero on the symmetric difference and on states that cannot
/// reach the intersection, the hitting-system solution elsewhere.
Vector equality_prob(const IntensityModel& model, int k1, int k2);

/// Conjunction of lower bounds {tau_k > c} and ties {tau_j == tau_k}.
struct TailConstraints {
  std::map<int, double> lower_bounds;
  std::vector<std::pair<int, int>> equalities;
};

/// One exact tie-pattern piece of a raw event: the constrained indices tie
/// exactly along `pattern` (never-hit coordinates counting as distinct), each
/// block's common time exceeding its bound. Its probability is the signed
/// combination of plain tail queries recorded in `expansion`.
struct CanonicalEvent {
  SubPartition pattern;
  std::vector<double> thresholds;  // aligned with pattern blocks
  std::vector<std::pair<double, TailQuery>> expansion;
  std::string label;
};

struct CanonicalDecomposition {
  std::vector<CanonicalEvent> events;  // pairwise disjoint; probabilities sum to the raw event's
  std::vector<std::string> notes;
};

/// Splits a raw constraint conjunction into exact-pattern canonical events.
CanonicalDecomposition canonicalize(const TailConstraints& raw, int cap = 8);

double canonical_event_probability(const IntensityModel& model, const CanonicalEvent& ev,
                                   const TailOptions& opts = {});

}  // namespace phasehit
