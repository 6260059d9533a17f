#include "phasehit/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace phasehit {

Index StateSet::count() const {
  Index c = 0;
  for (bool b : bits_)
    if (b) ++c;
  return c;
}

bool StateSet::subset_of(const StateSet& other) const {
  check_same_universe(*this, other);
  for (size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

bool StateSet::intersects(const StateSet& other) const {
  check_same_universe(*this, other);
  for (size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && other.bits_[i]) return true;
  return false;
}

std::vector<Index> StateSet::indices() const {
  std::vector<Index> out;
  for (size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out.push_back(static_cast<Index>(i));
  return out;
}

void StateSet::check_same_universe(const StateSet& a, const StateSet& b) {
  if (a.universe() != b.universe())
    throw ValueError("state sets live over different state spaces");
}

StateSet operator&(const StateSet& a, const StateSet& b) {
  StateSet::check_same_universe(a, b);
  StateSet r(a.universe());
  for (size_t i = 0; i < r.bits_.size(); ++i) r.bits_[i] = a.bits_[i] && b.bits_[i];
  return r;
}

StateSet operator|(const StateSet& a, const StateSet& b) {
  StateSet::check_same_universe(a, b);
  StateSet r(a.universe());
  for (size_t i = 0; i < r.bits_.size(); ++i) r.bits_[i] = a.bits_[i] || b.bits_[i];
  return r;
}

StateSet operator-(const StateSet& a, const StateSet& b) {
  StateSet::check_same_universe(a, b);
  StateSet r(a.universe());
  for (size_t i = 0; i < r.bits_.size(); ++i) r.bits_[i] = a.bits_[i] && !b.bits_[i];
  return r;
}

std::string StateSet::to_string() const {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (Index i : indices()) {
    if (!first) os << ',';
    os << i;
    first = false;
  }
  os << '}';
  return os.str();
}

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw ValueError("state space must have at least one state");
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw ValueError("empty state label");
    auto [it, inserted] = index_.emplace(labels_[i], static_cast<Index>(i));
    if (!inserted) throw ValueError("duplicate state label '" + labels_[i] + "'");
  }
}

const std::string& StateSpace::label(Index i) const {
  if (i < 0 || i >= size()) throw ValueError("state index out of range");
  return labels_[static_cast<size_t>(i)];
}

Index StateSpace::index(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw ValueError("unknown state label '" + std::string(label) + "'");
  return it->second;
}

std::optional<Index> StateSpace::find(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> IntensityModel::target_keys() const {
  std::vector<int> keys;
  keys.reserve(targets.size());
  for (const auto& [k, g] : targets) keys.push_back(k);
  return keys;
}

const StateSet& IntensityModel::target(int k) const {
  auto it = targets.find(k);
  if (it == targets.end())
    throw ValueError("unknown target index " + std::to_string(k));
  return it->second;
}

StateSet IntensityModel::target_union() const { return target_union(target_keys()); }

StateSet IntensityModel::target_union(const std::vector<int>& keys) const {
  StateSet u(num_states());
  for (int k : keys) u = u | target(k);
  return u;
}

namespace {

void add_issue(ValidationReport& rep, ValidationIssue::Code code, bool fatal,
               std::string message) {
  rep.issues.push_back({code, fatal, std::move(message)});
}

}  // namespace

ValidationReport validate(const IntensityModel& model, double tol) {
  ValidationReport rep;
  const Index n = model.space.size();
  if (n == 0) {
    add_issue(rep, ValidationIssue::Code::bad_labels, true, "empty state space");
    return rep;
  }
  if (model.lambda.rows() != n || model.lambda.cols() != n) {
    add_issue(rep, ValidationIssue::Code::dimension, true,
              "intensity matrix does not match the state space size");
    return rep;
  }
  if (model.alpha.size() != n) {
    add_issue(rep, ValidationIssue::Code::dimension, true,
              "initial distribution does not match the state space size");
    return rep;
  }

  for (Index i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double r = model.lambda(i, j);
      if (!std::isfinite(r))
        add_issue(rep, ValidationIssue::Code::negative_rate, true,
                  "non-finite rate at (" + model.space.label(i) + "," + model.space.label(j) + ")");
      if (i != j && r < 0.0)
        add_issue(rep, ValidationIssue::Code::negative_rate, true,
                  "negative rate " + std::to_string(r) + " at (" + model.space.label(i) + "," +
                      model.space.label(j) + ")");
      row_sum += r;
    }
    if (std::abs(row_sum) > tol)
      add_issue(rep, ValidationIssue::Code::row_sum, true,
                "row '" + model.space.label(i) + "' sums to " + std::to_string(row_sum) +
                    " instead of 0");
  }

  for (const auto& [k, g] : model.targets) {
    if (g.universe() != n)
      add_issue(rep, ValidationIssue::Code::target_out_of_range, true,
                "target " + std::to_string(k) + " indexed over a different state space");
    else if (g.empty())
      add_issue(rep, ValidationIssue::Code::empty_target, true,
                "target " + std::to_string(k) + " is empty");
  }

  double alpha_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (model.alpha(i) < 0.0)
      add_issue(rep, ValidationIssue::Code::alpha_negative, true,
                "negative initial weight on state '" + model.space.label(i) + "'");
    alpha_sum += model.alpha(i);
  }
  if (std::abs(alpha_sum - 1.0) > tol)
    add_issue(rep, ValidationIssue::Code::alpha_sum, true,
              "initial distribution sums to " + std::to_string(alpha_sum));

  if (!model.targets.empty()) {
    StateSet gamma(n);
    bool sets_ok = true;
    for (const auto& [k, g] : model.targets) {
      if (g.universe() != n) sets_ok = false;
    }
    if (sets_ok) {
      gamma = model.target_union();
      double charged = 0.0;
      for (Index i : gamma.indices()) charged += model.alpha(i);
      if (charged > tol)
        add_issue(rep, ValidationIssue::Code::alpha_on_target, false,
                  "initial distribution puts mass " + std::to_string(charged) +
                      " on the union of the targets; use the initial-mass decomposition");
    }
  }
  return rep;
}

std::optional<std::string> absorbing_violation(const IntensityModel& model) {
  for (const auto& [k, g] : model.targets) {
    for (Index i : g.indices())
      for (Index j : g.complement().indices())
        if (model.lambda(i, j) != 0.0)
          return "target " + std::to_string(k) + " is not absorbing: rate " +
                 std::to_string(model.lambda(i, j)) + " from '" + model.space.label(i) +
                 "' to '" + model.space.label(j) + "'";
  }
  return std::nullopt;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : issues) os << (v.fatal ? "error: " : "warning: ") << v.message << '\n';
  return os.str();
}

void require_valid(const IntensityModel& model, double tol) {
  ValidationReport rep = validate(model, tol);
  if (!rep.ok()) throw ValueError("invalid model:\n" + rep.summary());
}

IntensityModel with_repaired_diagonal(const IntensityModel& model) {
  IntensityModel out = model;
  const Index n = out.lambda.rows();
  for (Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Index j = 0; j < n; ++j)
      if (j != i) off += out.lambda(i, j);
    out.lambda(i, i) = -off;
  }
  return out;
}

Matrix projector(const StateSet& a, Index n) {
  if (a.universe() != n) throw ValueError("projector set does not match the dimension");
  Matrix p = Matrix::Zero(n, n);
  for (Index i : a.indices()) p(i, i) = 1.0;
  return p;
}

Matrix mask(const Matrix& m, const StateSet& a, const StateSet& b) {
  if (m.rows() != m.cols()) throw ValueError("mask expects a square matrix");
  if (a.universe() != m.rows() || b.universe() != m.rows())
    throw ValueError("mask sets do not match the matrix dimension");
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Index i : a.indices())
    for (Index j : b.indices()) out(i, j) = m(i, j);
  return out;
}

Matrix mask(const IntensityModel& model, const StateSet& a, const StateSet& b) {
  if (a.universe() != model.num_states() || b.universe() != model.num_states())
    throw ValueError("mask sets do not match the model state space");
  return mask(model.lambda, a, b);
}

namespace {

std::vector<Index> nonempty_indices(const StateSet& a, Index dim, const char* what) {
  if (a.universe() != dim) throw ValueError("restriction set does not match the object dimension");
  std::vector<Index> idx = a.indices();
  if (idx.empty()) throw ValueError(std::string("restriction of a ") + what + " to the empty set");
  return idx;
}

}  // namespace

RowVector restrict(const RowVector& y, const StateSet& a) {
  std::vector<Index> idx = nonempty_indices(a, y.size(), "vector");
  RowVector out(static_cast<Index>(idx.size()));
  for (size_t p = 0; p < idx.size(); ++p) out(static_cast<Index>(p)) = y(idx[p]);
  return out;
}

Vector restrict(const Vector& y, const StateSet& a) {
  std::vector<Index> idx = nonempty_indices(a, y.size(), "vector");
  Vector out(static_cast<Index>(idx.size()));
  for (size_t p = 0; p < idx.size(); ++p) out(static_cast<Index>(p)) = y(idx[p]);
  return out;
}

Matrix restrict(const Matrix& m, const StateSet& rows, const StateSet& cols) {
  std::vector<Index> ri = nonempty_indices(rows, m.rows(), "matrix");
  if (cols.universe() != m.cols())
    throw ValueError("restriction set does not match the object dimension");
  std::vector<Index> ci = cols.indices();
  if (ci.empty()) throw ValueError("restriction of a matrix to the empty set");
  Matrix out(static_cast<Index>(ri.size()), static_cast<Index>(ci.size()));
  for (size_t p = 0; p < ri.size(); ++p)
    for (size_t q = 0; q < ci.size(); ++q)
      out(static_cast<Index>(p), static_cast<Index>(q)) = m(ri[p], ci[q]);
  return out;
}

namespace {

template <typename Vec>
Vec extend_impl(const Vec& x, const StateSet& a, const StateSet& b) {
  if (!a.subset_of(b)) throw ValueError("extension requires the source set inside the target set");
  std::vector<Index> ai = a.indices();
  if (x.size() != static_cast<Index>(ai.size()))
    throw ValueError("vector length does not match the source set");
  std::vector<Index> bi = b.indices();
  Vec out = Vec::Zero(static_cast<Index>(bi.size()));
  size_t pa = 0;
  for (size_t pb = 0; pb < bi.size() && pa < ai.size(); ++pb)
    if (bi[pb] == ai[pa]) out(static_cast<Index>(pb)) = x(static_cast<Index>(pa++));
  return out;
}

}  // namespace

RowVector extend(const RowVector& x, const StateSet& a, const StateSet& b) {
  return extend_impl(x, a, b);
}

Vector extend(const Vector& x, const StateSet& a, const StateSet& b) {
  return extend_impl(x, a, b);
}

}  // namespace phasehit
