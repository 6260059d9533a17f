#pragma once

#include "phasehit/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace phasehit {

/// Ordered sequence of disjoint nonempty blocks of target indices.
/// Block order is significant; indices inside a block are kept sorted.
class SubPartition {
 public:
  SubPartition() = default;
  explicit SubPartition(std::vector<std::vector<int>> blocks);

  size_t block_count() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const std::vector<int>& block(size_t n) const;
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }

  /// All indices covered by the blocks, sorted.
  std::vector<int> support() const;

  /// Drops the first m blocks.
  SubPartition left_shift(size_t m = 1) const;
  /// The same subpartition without block n (0-based).
  SubPartition without_block(size_t n) const;
  /// Appends a block; it must be nonempty and disjoint from the support.
  SubPartition with_block(std::vector<int> a) const;
  /// Concatenation; supports must be disjoint.
  SubPartition concat(const SubPartition& other) const;

  bool disjoint_with(const SubPartition& other) const;
  bool is_partition_of(const std::vector<int>& universe) const;

  friend bool operator==(const SubPartition& a, const SubPartition& b) {
    return a.blocks_ == b.blocks_;
  }
  friend bool operator<(const SubPartition& a, const SubPartition& b) {
    return a.blocks_ < b.blocks_;
  }

  /// e.g. "({1,2},{3})"
  std::string to_string() const;

 private:
  std::vector<std::vector<int>> blocks_;
};

/// A full partition of the target-index set; block n groups the indices whose
/// hitting times tie at the n-th smallest recorded value.
struct Region {
  SubPartition blocks;

  size_t dimension() const { return blocks.block_count(); }
  friend bool operator==(const Region& a, const Region& b) { return a.blocks == b.blocks; }
  friend bool operator<(const Region& a, const Region& b) { return a.blocks < b.blocks; }
};

/// Hitting-time coordinates indexed by target key.
using TimeVector = std::map<int, double>;

/// The unique region containing t: exactly-equal times share a block, blocks
/// ordered by increasing common value. With tie_tol > 0, times within tie_tol
/// of their sorted neighbor are merged first.
Region classify(const TimeVector& t, double tie_tol = 0.0);

/// All ordered set partitions of the index set, deterministic order; the count
/// is the Fubini number of |keys|. Throws ValueError beyond the enumeration cap.
std::vector<Region> enumerate_partitions(const std::vector<int>& keys, int cap = 8);

/// S(s): union of the target sets named by the subpartition's blocks.
StateSet union_targets(const IntensityModel& model, const SubPartition& s);

struct WaitTarget {
  StateSet waiting;  // the set the chain must stay in before the n-th recorded hit
  StateSet target;   // the set it must jump into exactly then
};

/// Waiting/target pairs (W_n, T_n) for a region: W_n is the complement of the
/// still-unhit targets, T_n the clean entry set for block n.
std::vector<WaitTarget> waiting_target_sets(const IntensityModel& model, const Region& s);

/// Variant valid when every target set is absorbing: the waiting set shrinks
/// to the previous target set instead of the full complement.
std::vector<WaitTarget> waiting_target_sets_absorbing(const IntensityModel& model,
                                                      const Region& s);

/// Subpermutations of {0,...,n-1}: ordered arrangements of every subset,
/// including the empty one. Deterministic order, shortest first.
std::vector<std::vector<int>> subpermutations(int n);

/// Region rendering, e.g. "{2,3} < {1}". parse_region accepts the same grammar
/// (whitespace-insensitive) and reports the offending position on error.
std::string region_to_string(const Region& s);
Region parse_region(const std::string& text);

}  // namespace phasehit
