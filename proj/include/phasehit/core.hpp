#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phasehit {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values: dimension mismatches, precondition and
/// consistency violations.
class ValueError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Solve failed; carries a reciprocal-condition estimate of the offending matrix.
class SingularMatrixError : public NumericError {
 public:
  SingularMatrixError(const std::string& msg, double rcond)
      : NumericError(msg), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

/// Requested tolerance not reached; carries the best estimate achieved.
class AccuracyError : public NumericError {
 public:
  AccuracyError(const std::string& msg, double achieved)
      : NumericError(msg), achieved_(achieved) {}
  double achieved_tolerance() const { return achieved_; }

 private:
  double achieved_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Subset of state indices {0,...,n-1}, with the Boolean algebra the
/// projector calculus is written in.
class StateSet {
 public:
  StateSet() = default;
  explicit StateSet(Index universe) : bits_(static_cast<size_t>(universe), false) {}
  StateSet(Index universe, std::initializer_list<Index> members) : StateSet(universe) {
    for (Index i : members) insert(i);
  }
  StateSet(Index universe, const std::vector<Index>& members) : StateSet(universe) {
    for (Index i : members) insert(i);
  }

  static StateSet full(Index universe) {
    StateSet s(universe);
    s.bits_.assign(s.bits_.size(), true);
    return s;
  }

  Index universe() const { return static_cast<Index>(bits_.size()); }
  Index count() const;
  bool empty() const { return count() == 0; }
  bool contains(Index i) const { return i >= 0 && i < universe() && bits_[static_cast<size_t>(i)]; }

  StateSet& insert(Index i) {
    check_range(i);
    bits_[static_cast<size_t>(i)] = true;
    return *this;
  }
  StateSet& erase(Index i) {
    check_range(i);
    bits_[static_cast<size_t>(i)] = false;
    return *this;
  }

  StateSet complement() const {
    StateSet r(*this);
    r.bits_.flip();
    return r;
  }

  bool subset_of(const StateSet& other) const;
  bool intersects(const StateSet& other) const;
  std::vector<Index> indices() const;

  friend StateSet operator&(const StateSet& a, const StateSet& b);
  friend StateSet operator|(const StateSet& a, const StateSet& b);
  friend StateSet operator-(const StateSet& a, const StateSet& b);
  friend bool operator==(const StateSet& a, const StateSet& b) { return a.bits_ == b.bits_; }

  std::string to_string() const;

 private:
  void check_range(Index i) const {
    if (i < 0 || i >= universe()) throw ValueError("state index out of range");
  }
  static void check_same_universe(const StateSet& a, const StateSet& b);

  std::vector<bool> bits_;
};

/// Ordered set of state labels with the label <-> dense-index bijection.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> labels);

  Index size() const { return static_cast<Index>(labels_.size()); }
  const std::string& label(Index i) const;
  Index index(std::string_view label) const;
  std::optional<Index> find(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const StateSpace& a, const StateSpace& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, Index, std::less<>> index_;
};

/// Finite-state CTMC with target sets and an initial distribution.
/// Immutable after construction; all analytic operations take it by const ref.
struct IntensityModel {
  StateSpace space;
  Matrix lambda;              // generator: nonnegative off-diagonals, zero row sums
  std::map<int, StateSet> targets;  // k -> target set, keys form the index set K
  RowVector alpha;            // initial distribution, row vector over the states

  Index num_states() const { return static_cast<Index>(space.size()); }
  std::vector<int> target_keys() const;
  const StateSet& target(int k) const;
  /// Union of the target sets for the given keys (all keys if omitted).
  StateSet target_union() const;
  StateSet target_union(const std::vector<int>& keys) const;
};

struct ValidationIssue {
  enum class Code {
    row_sum,
    negative_rate,
    empty_target,
    target_out_of_range,
    alpha_negative,
    alpha_sum,
    alpha_on_target,  // warning: handled by the initial-mass decomposition
    bad_labels,
    dimension,
  };
  Code code;
  bool fatal;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const {
    for (const auto& v : issues)
      if (v.fatal) return false;
    return true;
  }
  bool clean() const { return issues.empty(); }
  std::string summary() const;
};

/// Checks every model invariant and reports all violations (never throws).
ValidationReport validate(const IntensityModel& model, double tol = 1e-12);

/// Describes the first positive rate leaving a target set, or nothing when
/// every target is absorbing.
std::optional<std::string> absorbing_violation(const IntensityModel& model);

/// Throws ValueError with the report summary if the model fails validation.
void require_valid(const IntensityModel& model, double tol = 1e-12);

/// Copy of the model with each diagonal entry recomputed as the negative
/// off-diagonal row sum. Explicit opt-in repair for hand-entered rates.
IntensityModel with_repaired_diagonal(const IntensityModel& model);

/// I_a: identity with the rows outside `a` zeroed. Left multiplication zeroes
/// rows, right multiplication zeroes columns.
Matrix projector(const StateSet& a, Index n);

/// Masked matrix: entry (i,j) kept iff i in `a` and j in `b`, zero elsewhere.
Matrix mask(const Matrix& m, const StateSet& a, const StateSet& b);
Matrix mask(const IntensityModel& model, const StateSet& a, const StateSet& b);
/// Square mask onto a single set.
inline Matrix mask(const Matrix& m, const StateSet& a) { return mask(m, a, a); }

/// Restriction y|_a: the sub-vector of entries indexed by `a` (nonempty).
RowVector restrict(const RowVector& y, const StateSet& a);
Vector restrict(const Vector& y, const StateSet& a);
/// Submatrix M|_{rows x cols}.
Matrix restrict(const Matrix& m, const StateSet& rows, const StateSet& cols);
inline Matrix restrict(const Matrix& m, const StateSet& b) { return restrict(m, b, b); }

/// Extension x|^b of a vector over `a` to the superset `b`: agrees with x on
/// `a`, zero elsewhere.
RowVector extend(const RowVector& x, const StateSet& a, const StateSet& b);
Vector extend(const Vector& x, const StateSet& a, const StateSet& b);

}  // namespace phasehit
