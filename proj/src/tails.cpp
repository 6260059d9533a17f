#include "phasehit/tails.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace phasehit {

namespace {

SubPartition drop_single_index_blocks(const SubPartition& s) {
  // Single-index equality blocks impose nothing.
  std::vector<std::vector<int>> keep;
  for (const auto& b : s.blocks())
    if (b.size() > 1) keep.push_back(b);
  return SubPartition(std::move(keep));
}

std::vector<double> shifted(const std::vector<double>& t, double u, size_t drop_front = 0) {
  std::vector<double> out;
  out.reserve(t.size() - drop_front);
  for (size_t i = drop_front; i < t.size(); ++i) out.push_back(t[i] - u);
  return out;
}

struct Structure {
  StateSet constrained;               // union of every referenced target
  StateSet waiting;                   // its complement
  Matrix waiting_gen;                 // rates masked to waiting x waiting
  std::vector<StateSet> clean_entry;  // per s2 block: its joint entry set, others excluded
  StateSet entry_union;
  Matrix jump;                        // rates masked to waiting x entry_union
};

struct EvalContext {
  const IntensityModel& model;
  QuadratureRule quad;
  bool absorbing_form = false;  // full-generator exponentials with projections
  ExpmWorkspace expm_ws;
  std::map<std::string, Structure> structures;
  std::map<std::string, Vector> memo;
  int depth = 0;

  EvalContext(const IntensityModel& m, const QuadratureRule& q) : model(m), quad(q) {}
};

std::string structure_key(const SubPartition& s1, const SubPartition& s2) {
  return s1.to_string() + "|" + s2.to_string();
}

std::string value_key(const std::string& skey, const std::vector<double>& t) {
  std::string k = skey;
  k.push_back('#');
  k.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  return k;
}

const Structure& get_structure(EvalContext& ctx, const SubPartition& s1,
                               const SubPartition& s2) {
  const std::string key = structure_key(s1, s2);
  auto it = ctx.structures.find(key);
  if (it != ctx.structures.end()) return it->second;

  Structure st;
  const Index n = ctx.model.num_states();
  const SubPartition all = s1.concat(s2);
  st.constrained = union_targets(ctx.model, all);
  st.waiting = st.constrained.complement();
  st.waiting_gen = mask(ctx.model, st.waiting, st.waiting);
  st.entry_union = StateSet(n);
  for (size_t m = 0; m < s2.block_count(); ++m) {
    StateSet inter = StateSet::full(n);
    for (int k : s2.block(m)) inter = inter & ctx.model.target(k);
    const StateSet others = union_targets(ctx.model, s1.concat(s2.without_block(m)));
    StateSet clean = inter - others;
    st.entry_union = st.entry_union | clean;
    st.clean_entry.push_back(std::move(clean));
  }
  st.jump = mask(ctx.model, st.waiting, st.entry_union);
  return ctx.structures.emplace(key, std::move(st)).first->second;
}

QuadratureRule tightened(const QuadratureRule& base, int depth) {
  QuadratureRule r = base;
  for (int d = 0; d < depth; ++d) {
    r.abs_tol = std::max(r.abs_tol * 0.1, 1e-13);
    r.rel_tol = std::max(r.rel_tol * 0.1, 1e-13);
  }
  return r;
}

Vector pure_equality(EvalContext& ctx, const SubPartition& s2_in);
Vector p_eval(EvalContext& ctx, const SubPartition& s1, const SubPartition& s2_in,
              const std::vector<double>& t);

/// States of `waiting` from which `entries` can be reached without leaving
/// `waiting` before the final jump.
std::vector<Index> reachable_through(const IntensityModel& model, const StateSet& waiting,
                                     const StateSet& entries) {
  const Index n = model.num_states();
  std::deque<Index> frontier;
  for (Index j : entries.indices()) frontier.push_back(j);
  std::vector<char> in_result(static_cast<size_t>(n), 0);
  while (!frontier.empty()) {
    const Index j = frontier.front();
    frontier.pop_front();
    for (Index i : waiting.indices()) {
      if (in_result[static_cast<size_t>(i)]) continue;
      if (i != j && model.lambda(i, j) != 0.0) {
        in_result[static_cast<size_t>(i)] = 1;
        frontier.push_back(i);
      }
    }
  }
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (in_result[static_cast<size_t>(i)]) out.push_back(i);
  return out;
}

/// Entries of `values` over the referenced targets follow from the event
/// itself, not from the matrix formulas (whose rows there are vacuous): a
/// start state inside exactly one full s2 block's every target resolves that
/// block at time zero; any other overlap contradicts the event.
void apply_boundary_rules(EvalContext& ctx, const SubPartition& s1, const SubPartition& s2,
                          const std::vector<double>& t, const Structure& st, Vector& values,
                          const std::function<Vector(size_t)>& sub_eval) {
  const SubPartition all = s1.concat(s2);
  std::map<size_t, Vector> resolved;  // s2 block index -> sub-problem values
  for (Index i : st.constrained.indices()) {
    std::set<int> hit_keys;
    for (const auto& b : all.blocks())
      for (int k : b)
        if (ctx.model.target(k).contains(i)) hit_keys.insert(k);
    double v = 0.0;
    for (size_t m = 0; m < s2.block_count(); ++m) {
      const auto& b = s2.block(m);
      if (std::set<int>(b.begin(), b.end()) == hit_keys) {
        auto it = resolved.find(m);
        if (it == resolved.end()) it = resolved.emplace(m, sub_eval(m)).first;
        v = it->second(i);
        break;
      }
    }
    values(i) = v;
  }
  (void)t;
}

Vector pure_equality(EvalContext& ctx, const SubPartition& s2_in) {
  const SubPartition s2 = drop_single_index_blocks(s2_in);
  const Index n = ctx.model.num_states();
  if (s2.empty()) return Vector::Ones(n);

  const std::string key = value_key("EQ" + structure_key(SubPartition{}, s2), {});
  auto hit = ctx.memo.find(key);
  if (hit != ctx.memo.end()) return hit->second;

  const Structure& st = get_structure(ctx, SubPartition{}, s2);
  std::vector<Vector> sub(s2.block_count());
  for (size_t m = 0; m < s2.block_count(); ++m)
    sub[m] = pure_equality(ctx, s2.without_block(m));

  Vector out = Vector::Zero(n);
  apply_boundary_rules(ctx, SubPartition{}, s2, {}, st, out,
                       [&](size_t m) { return sub[m]; });

  // First-step analysis on the embedded chain: the first constrained contact
  // must be a clean joint entry into one block; everything else voids the
  // event. Solving on the states that can actually reach a clean entry keeps
  // the restricted generator invertible.
  const std::vector<Index> wprime =
      reachable_through(ctx.model, st.waiting, st.entry_union);
  if (!wprime.empty()) {
    const Index m = static_cast<Index>(wprime.size());
    Matrix a(m, m);
    Vector rhs = Vector::Zero(m);
    for (Index r = 0; r < m; ++r) {
      for (Index c = 0; c < m; ++c) a(r, c) = ctx.model.lambda(wprime[r], wprime[c]);
      double acc = 0.0;
      for (size_t blk = 0; blk < s2.block_count(); ++blk)
        for (Index j : st.clean_entry[blk].indices())
          acc += ctx.model.lambda(wprime[r], j) * sub[blk](j);
      rhs(r) = -acc;
    }
    Vector x = solve(a, rhs);
    for (Index r = 0; r < m; ++r) out(wprime[r]) = x(r);
  }

  ctx.memo.emplace(key, out);
  return out;
}

Vector p_eval(EvalContext& ctx, const SubPartition& s1, const SubPartition& s2_in,
              const std::vector<double>& t) {
  const SubPartition s2 = drop_single_index_blocks(s2_in);
  if (s1.empty()) return pure_equality(ctx, s2);

  const std::string skey = structure_key(s1, s2);
  const std::string vkey =
      value_key((ctx.absorbing_form ? "ABS" : "GEN") + skey, t);
  auto hit = ctx.memo.find(vkey);
  if (hit != ctx.memo.end()) return hit->second;

  const Structure& st = get_structure(ctx, s1, s2);
  const double t1 = t.front();

  // Nothing resolved before t1: the head block's bound is met and its
  // equality constraint, if any, remains pending.
  Vector cont = p_eval(ctx, s1.left_shift(1), s2.with_block(s1.block(0)), shifted(t, t1, 1));
  Vector total;
  if (ctx.absorbing_form) {
    Vector masked = Vector::Zero(cont.size());
    for (Index j : st.waiting.indices()) masked(j) = cont(j);
    total = expm_apply(ctx.model.lambda, t1, masked, &ctx.expm_ws);
  } else {
    total = expm_apply(st.waiting_gen, t1, cont, &ctx.expm_ws);
  }

  if (!s2.empty() && t1 > 0.0) {
    auto integrand = [&](double u) -> Vector {
      Vector g = Vector::Zero(ctx.model.num_states());
      for (size_t m = 0; m < s2.block_count(); ++m) {
        if (st.clean_entry[m].empty()) continue;
        Vector sub = p_eval(ctx, s1, s2.without_block(m), shifted(t, u));
        for (Index j : st.clean_entry[m].indices()) g(j) = sub(j);
      }
      Vector jg = st.jump * g;
      if (ctx.absorbing_form) return expm_apply(ctx.model.lambda, u, jg, &ctx.expm_ws);
      return expm_apply(st.waiting_gen, u, jg, &ctx.expm_ws);
    };
    ++ctx.depth;
    const QuadratureRule rule = tightened(ctx.quad, ctx.depth - 1);
    Vector integral = integrate(integrand, 0.0, t1, rule);
    --ctx.depth;
    total += integral;
  }

  apply_boundary_rules(ctx, s1, s2, t, st, total, [&](size_t m) {
    return p_eval(ctx, s1, s2.without_block(m), t);
  });

  ctx.memo.emplace(vkey, total);
  return total;
}

void check_query_against_model(const IntensityModel& model, const TailQuery& q) {
  q.validate();
  for (int k : q.s1.concat(q.s2).support()) model.target(k);
  const StateSet s = union_targets(model, q.s1.concat(q.s2));
  if (s.complement().empty())
    throw ValueError("tail query: every state lies in a referenced target");
  for (Index i : s.indices())
    if (model.alpha(i) != 0.0)
      throw ValueError(
          "tail query: initial distribution charges a referenced target; "
          "split it with decompose_initial first");
}

}  // namespace

void TailQuery::validate() const {
  if (!s1.disjoint_with(s2)) throw ValueError("tail query: s1 and s2 overlap");
  if (t.size() != s1.block_count())
    throw ValueError("tail query: one time bound per s1 block required");
  double prev = 0.0;
  for (double v : t) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValueError("tail query: time bounds must be finite and nonnegative");
    if (v < prev) throw ValueError("tail query: time bounds must be nondecreasing");
    prev = v;
  }
}

std::string TailQuery::to_string() const {
  std::ostringstream os;
  os << "T(" << s1.to_string() << ", " << s2.to_string() << ", (";
  for (size_t i = 0; i < t.size(); ++i) {
    if (i) os << ',';
    os << t[i];
  }
  os << "))";
  return os.str();
}

TailResult tail_p(const IntensityModel& model, const TailQuery& q, const TailOptions& opts) {
  check_query_against_model(model, q);
  EvalContext ctx(model, opts.quad);
  Vector p = p_eval(ctx, q.s1, q.s2, q.t);
  return {p, model.alpha.dot(p)};
}

TailResult tail_p_simple(const IntensityModel& model, const SubPartition& s1,
                         const std::vector<double>& t, const TailOptions& opts) {
  if (s1.empty() || t.size() != s1.block_count())
    throw ValueError("tail_p_simple: one bound per block required");
  for (const auto& b : s1.blocks())
    if (b.size() != 1)
      throw ValueError("tail_p_simple: blocks must be single indices (no ties)");
  for (size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || t[i] < 0.0)
      throw ValueError("tail_p_simple: bounds must be finite and nonnegative");
    if (i > 0 && t[i] <= t[i - 1])
      throw ValueError("tail_p_simple: bounds must be strictly increasing");
  }
  TailQuery probe{s1, SubPartition{}, t};
  check_query_against_model(model, probe);

  EvalContext ctx(model, opts.quad);
  Vector p = Vector::Ones(model.num_states());
  for (size_t n = s1.block_count(); n-- > 0;) {
    const StateSet waiting = union_targets(model, s1.left_shift(n)).complement();
    const double dt = t[n] - (n > 0 ? t[n - 1] : 0.0);
    p = expm_apply(mask(model, waiting, waiting), dt, p, &ctx.expm_ws);
  }
  // A start inside any referenced target violates its bound outright.
  for (Index i : union_targets(model, s1).indices()) p(i) = 0.0;
  return {p, model.alpha.dot(p)};
}

TailResult tail_p_alt(const IntensityModel& model, const TailQuery& q,
                      const TailOptions& opts) {
  check_query_against_model(model, q);
  EvalContext ctx(model, opts.quad);
  const SubPartition s2 = drop_single_index_blocks(q.s2);
  if (q.s1.empty()) {
    Vector p = pure_equality(ctx, s2);
    return {p, model.alpha.dot(p)};
  }

  const Index n = model.num_states();
  const double t1 = q.t.front();
  Vector total = Vector::Zero(n);
  const auto pis = subpermutations(static_cast<int>(s2.block_count()));
  for (const auto& pi : pis) {
    // Waiting sets as the enumerated joint hits resolve one block at a time.
    std::vector<StateSet> waits;  // waits[m]: before the (m+1)-th enumerated hit
    SubPartition cur = s2;
    waits.push_back(union_targets(model, q.s1.concat(cur)).complement());
    for (int bi : pi) {
      // Remove block pi[m] of the original s2 from the running remainder.
      const auto& blk = s2.block(static_cast<size_t>(bi));
      std::vector<std::vector<int>> keep;
      for (const auto& b : cur.blocks())
        if (b != blk) keep.push_back(b);
      cur = SubPartition(keep);
      waits.push_back(union_targets(model, q.s1.concat(cur)).complement());
    }
    Vector cont = p_eval(ctx, q.s1.left_shift(1), cur.with_block(q.s1.block(0)),
                         shifted(q.t, t1, 1));

    std::function<Vector(size_t, double)> nested = [&](size_t m, double vprev) -> Vector {
      if (m == pi.size()) {
        const Matrix gen = mask(model, waits[m], waits[m]);
        return expm_apply(gen, t1 - vprev, cont, &ctx.expm_ws);
      }
      const Matrix gen = mask(model, waits[m], waits[m]);
      StateSet inter = StateSet::full(n);
      for (int k : s2.block(static_cast<size_t>(pi[m]))) inter = inter & model.target(k);
      const StateSet entry = inter & waits[m + 1];
      const Matrix jump = mask(model, waits[m], entry);
      auto f = [&](double v) -> Vector {
        Vector inner = jump * nested(m + 1, v);
        return expm_apply(gen, v - vprev, inner, &ctx.expm_ws);
      };
      const QuadratureRule rule = tightened(ctx.quad, static_cast<int>(m));
      return integrate(f, vprev, t1, rule);
    };
    total += nested(0, 0.0);
  }

  const Structure& st = get_structure(ctx, q.s1, s2);
  apply_boundary_rules(ctx, q.s1, s2, q.t, st, total, [&](size_t m) {
    return p_eval(ctx, q.s1, s2.without_block(m), q.t);
  });
  return {total, model.alpha.dot(total)};
}

TailResult tail_p_absorbing(const IntensityModel& model, const TailQuery& q,
                            const TailOptions& opts) {
  if (auto why = absorbing_violation(model)) throw ValueError("tail_p_absorbing: " + *why);
  check_query_against_model(model, q);
  EvalContext ctx(model, opts.quad);
  ctx.absorbing_form = true;
  Vector p = p_eval(ctx, q.s1, q.s2, q.t);
  return {p, model.alpha.dot(p)};
}

std::pair<Matrix, Matrix> embedded_chain(const IntensityModel& model) {
  const Index n = model.num_states();
  Matrix trans = Matrix::Zero(n, n);
  Matrix hold = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double rate = -model.lambda(i, i);
    if (rate == 0.0) {
      trans(i, i) = 1.0;  // unit self-loop; the holding entry stays zero
      continue;
    }
    hold(i, i) = 1.0 / rate;
    for (Index j = 0; j < n; ++j)
      if (j != i) trans(i, j) = model.lambda(i, j) / rate;
  }
  return {trans, hold};
}

Vector equality_prob(const IntensityModel& model, int k1, int k2) {
  if (k1 == k2) throw ValueError("equality_prob: target indices must differ");
  model.target(k1);
  model.target(k2);
  EvalContext ctx(model, QuadratureRule{});
  return pure_equality(ctx, SubPartition({{k1, k2}}));
}

namespace {

using Pattern = std::vector<std::vector<int>>;  // sorted blocks, sorted by front

Pattern canonical_pattern(Pattern p) {
  for (auto& b : p) std::sort(b.begin(), b.end());
  std::sort(p.begin(), p.end());
  return p;
}

double block_threshold(const std::vector<int>& block, const std::map<int, double>& bounds) {
  double thr = 0.0;
  for (int k : block) {
    auto it = bounds.find(k);
    if (it != bounds.end()) thr = std::max(thr, it->second);
  }
  return thr;
}

TailQuery query_for_pattern(const Pattern& p, const std::map<int, double>& bounds) {
  struct Timed {
    double thr;
    std::vector<int> block;
  };
  std::vector<Timed> timed;
  std::vector<std::vector<int>> free_ties;
  for (const auto& b : p) {
    const double thr = block_threshold(b, bounds);
    if (thr > 0.0)
      timed.push_back({thr, b});
    else if (b.size() > 1)
      free_ties.push_back(b);
    // bound-free single indices impose nothing
  }
  std::sort(timed.begin(), timed.end(), [](const Timed& a, const Timed& b) {
    if (a.thr != b.thr) return a.thr < b.thr;
    return a.block < b.block;
  });
  TailQuery q;
  std::vector<std::vector<int>> s1blocks;
  for (auto& tb : timed) {
    s1blocks.push_back(tb.block);
    q.t.push_back(tb.thr);
  }
  q.s1 = SubPartition(std::move(s1blocks));
  q.s2 = SubPartition(std::move(free_ties));
  return q;
}

/// Exact-pattern coarsenings reachable inside a plain tail query: merge
/// groups may absorb any number of single-index blocks but at most one
/// multi-index block (joint hits of two distinct tie blocks never coincide).
std::vector<Pattern> admissible_coarsenings(const Pattern& p) {
  const size_t m = p.size();
  std::vector<Pattern> out;
  if (m < 2) return out;
  std::vector<int> assign(m, 0);
  std::function<void(size_t, int)> rec = [&](size_t i, int groups) {
    if (i == m) {
      Pattern merged(static_cast<size_t>(groups));
      std::vector<int> multis(static_cast<size_t>(groups), 0);
      for (size_t b = 0; b < m; ++b) {
        auto& g = merged[static_cast<size_t>(assign[b])];
        g.insert(g.end(), p[b].begin(), p[b].end());
        if (p[b].size() > 1) ++multis[static_cast<size_t>(assign[b])];
      }
      for (int c : multis)
        if (c > 1) return;
      if (groups == static_cast<int>(m)) return;  // identity
      out.push_back(canonical_pattern(merged));
      return;
    }
    for (int g = 0; g <= groups; ++g) {
      assign[i] = g;
      rec(i + 1, std::max(groups, g + 1));
    }
  };
  rec(0, 0);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void pattern_expansion(const Pattern& p, const std::map<int, double>& bounds,
                       std::map<Pattern, std::map<Pattern, double>>& memo) {
  if (memo.count(p)) return;
  std::map<Pattern, double> coeffs;
  coeffs[p] = 1.0;
  for (const Pattern& q : admissible_coarsenings(p)) {
    pattern_expansion(q, bounds, memo);
    for (const auto& [r, c] : memo.at(q)) coeffs[r] -= c;
  }
  memo.emplace(p, std::move(coeffs));
}

std::string pattern_label(const Pattern& p, const std::map<int, double>& bounds) {
  std::ostringstream os;
  bool first = true;
  for (const auto& b : p) {
    if (!first) os << " & ";
    first = false;
    os << '{';
    for (size_t i = 0; i < b.size(); ++i) {
      if (i) os << '=';
      os << "tau(" << b[i] << ')';
    }
    os << '}';
    os << '>' << block_threshold(b, bounds);
  }
  return os.str();
}

}  // namespace

CanonicalDecomposition canonicalize(const TailConstraints& raw, int cap) {
  CanonicalDecomposition out;
  std::set<int> constrained;
  std::map<int, double> bounds;
  for (const auto& [k, c] : raw.lower_bounds) {
    constrained.insert(k);
    if (c < 0.0) {
      out.notes.push_back("bound for target " + std::to_string(k) +
                          " is negative; treated as 0");
      bounds[k] = 0.0;
    } else if (!std::isfinite(c)) {
      throw ValueError("canonicalize: non-finite bound for target " + std::to_string(k));
    } else {
      bounds[k] = c;
    }
  }
  for (const auto& [a, b] : raw.equalities) {
    constrained.insert(a);
    constrained.insert(b);
  }
  if (constrained.empty()) {
    CanonicalEvent ev;
    ev.label = "(no constraints)";
    ev.expansion.push_back({1.0, TailQuery{}});
    out.events.push_back(std::move(ev));
    return out;
  }

  // Forced tie groups from the equality constraints.
  std::map<int, int> parent;
  for (int k : constrained) parent[k] = k;
  std::function<int(int)> find = [&](int k) {
    while (parent[k] != k) k = parent[k] = parent[parent[k]];
    return k;
  };
  for (const auto& [a, b] : raw.equalities) parent[find(a)] = find(b);
  std::map<int, std::vector<int>> groups;
  for (int k : constrained) groups[find(k)].push_back(k);
  std::vector<std::vector<int>> atoms;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    atoms.push_back(members);
  }
  std::sort(atoms.begin(), atoms.end());
  if (static_cast<int>(atoms.size()) > cap)
    throw ValueError("canonicalize: " + std::to_string(atoms.size()) +
                     " tie groups exceed the decomposition cap of " + std::to_string(cap));

  // All tie patterns: unordered set partitions of the forced groups.
  std::vector<Pattern> patterns;
  std::vector<int> assign(atoms.size(), 0);
  std::function<void(size_t, int)> rec = [&](size_t i, int ngroups) {
    if (i == atoms.size()) {
      Pattern pat(static_cast<size_t>(ngroups));
      for (size_t a = 0; a < atoms.size(); ++a) {
        auto& g = pat[static_cast<size_t>(assign[a])];
        g.insert(g.end(), atoms[a].begin(), atoms[a].end());
      }
      patterns.push_back(canonical_pattern(pat));
      return;
    }
    for (int g = 0; g <= ngroups; ++g) {
      assign[i] = g;
      rec(i + 1, std::max(ngroups, g + 1));
    }
  };
  rec(0, 0);
  std::sort(patterns.begin(), patterns.end());

  std::map<Pattern, std::map<Pattern, double>> memo;
  for (const Pattern& p : patterns) {
    pattern_expansion(p, bounds, memo);
    CanonicalEvent ev;
    std::vector<std::vector<int>> blocks = p;
    std::stable_sort(blocks.begin(), blocks.end(),
                     [&](const std::vector<int>& a, const std::vector<int>& b) {
                       return block_threshold(a, bounds) < block_threshold(b, bounds);
                     });
    ev.pattern = SubPartition(blocks);
    for (const auto& b : blocks) ev.thresholds.push_back(block_threshold(b, bounds));
    for (const auto& [r, c] : memo.at(p))
      if (c != 0.0) ev.expansion.push_back({c, query_for_pattern(r, bounds)});
    ev.label = pattern_label(p, bounds);
    out.events.push_back(std::move(ev));
  }
  return out;
}

double canonical_event_probability(const IntensityModel& model, const CanonicalEvent& ev,
                                   const TailOptions& opts) {
  double total = 0.0;
  for (const auto& [coeff, q] : ev.expansion) total += coeff * tail_p(model, q, opts).value;
  return total;
}

}  // namespace phasehit
