#include "phasehit/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace phasehit {

SubPartition::SubPartition(std::vector<std::vector<int>> blocks) : blocks_(std::move(blocks)) {
  std::set<int> seen;
  for (auto& b : blocks_) {
    if (b.empty()) throw ValueError("subpartition block must be nonempty");
    std::sort(b.begin(), b.end());
    if (std::adjacent_find(b.begin(), b.end()) != b.end())
      throw ValueError("subpartition block has a repeated index");
    for (int k : b)
      if (!seen.insert(k).second)
        throw ValueError("subpartition blocks overlap at index " + std::to_string(k));
  }
}

const std::vector<int>& SubPartition::block(size_t n) const {
  if (n >= blocks_.size()) throw ValueError("subpartition block index out of range");
  return blocks_[n];
}

std::vector<int> SubPartition::support() const {
  std::vector<int> out;
  for (const auto& b : blocks_) out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

SubPartition SubPartition::left_shift(size_t m) const {
  if (m > blocks_.size()) throw ValueError("left shift beyond the subpartition length");
  SubPartition out;
  out.blocks_.assign(blocks_.begin() + static_cast<std::ptrdiff_t>(m), blocks_.end());
  return out;
}

SubPartition SubPartition::without_block(size_t n) const {
  if (n >= blocks_.size()) throw ValueError("subpartition block index out of range");
  SubPartition out(*this);
  out.blocks_.erase(out.blocks_.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

SubPartition SubPartition::with_block(std::vector<int> a) const {
  SubPartition out(*this);
  out.blocks_.push_back(std::move(a));
  return SubPartition(std::move(out.blocks_));  // revalidates disjointness
}

SubPartition SubPartition::concat(const SubPartition& other) const {
  std::vector<std::vector<int>> all = blocks_;
  all.insert(all.end(), other.blocks_.begin(), other.blocks_.end());
  return SubPartition(std::move(all));
}

bool SubPartition::disjoint_with(const SubPartition& other) const {
  std::vector<int> a = support(), b = other.support();
  std::vector<int> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  return inter.empty();
}

bool SubPartition::is_partition_of(const std::vector<int>& universe) const {
  std::vector<int> u = universe;
  std::sort(u.begin(), u.end());
  return support() == u;
}

std::string SubPartition::to_string() const {
  std::ostringstream os;
  os << '(';
  for (size_t n = 0; n < blocks_.size(); ++n) {
    if (n) os << ',';
    os << '{';
    for (size_t i = 0; i < blocks_[n].size(); ++i) {
      if (i) os << ',';
      os << blocks_[n][i];
    }
    os << '}';
  }
  os << ')';
  return os.str();
}

Region classify(const TimeVector& t, double tie_tol) {
  if (t.empty()) return Region{SubPartition{}};
  std::vector<std::pair<double, int>> order;
  order.reserve(t.size());
  for (const auto& [k, v] : t) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValueError("hitting-time coordinate for target " + std::to_string(k) +
                       " must be finite and nonnegative");
    order.emplace_back(v, k);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::vector<int>> blocks;
  double block_value = 0.0;
  for (size_t i = 0; i < order.size(); ++i) {
    const bool tie = !blocks.empty() && (tie_tol > 0.0
                                             ? order[i].first - order[i - 1].first <= tie_tol
                                             : order[i].first == block_value);
    if (tie) {
      blocks.back().push_back(order[i].second);
    } else {
      blocks.push_back({order[i].second});
      block_value = order[i].first;
    }
  }
  return Region{SubPartition(std::move(blocks))};
}

namespace {

void enumerate_rec(const std::vector<int>& keys, size_t next,
                   std::vector<std::vector<int>>& current, std::vector<Region>& out) {
  if (next == keys.size()) {
    out.push_back(Region{SubPartition(current)});
    return;
  }
  const int k = keys[next];
  // Place the next element into each existing block, then as a new singleton
  // block in every gap. Keeps the output order deterministic. Index access:
  // deeper recursion levels reallocate `current`.
  for (size_t bi = 0; bi < current.size(); ++bi) {
    current[bi].push_back(k);
    enumerate_rec(keys, next + 1, current, out);
    current[bi].pop_back();
  }
  for (size_t gap = 0; gap + 1 <= current.size() + 1; ++gap) {
    current.insert(current.begin() + static_cast<std::ptrdiff_t>(gap), {k});
    enumerate_rec(keys, next + 1, current, out);
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(gap));
  }
}

}  // namespace

std::vector<Region> enumerate_partitions(const std::vector<int>& keys, int cap) {
  if (keys.empty()) throw ValueError("cannot enumerate partitions of an empty index set");
  std::vector<int> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValueError("repeated index in the partition universe");
  if (static_cast<int>(sorted.size()) > cap)
    throw ValueError("partition enumeration over " + std::to_string(sorted.size()) +
                     " indices exceeds the cap of " + std::to_string(cap));
  std::vector<Region> out;
  std::vector<std::vector<int>> current;
  enumerate_rec(sorted, 0, current, out);
  return out;
}

StateSet union_targets(const IntensityModel& model, const SubPartition& s) {
  StateSet u(model.num_states());
  for (const auto& b : s.blocks())
    for (int k : b) u = u | model.target(k);
  return u;
}

std::vector<WaitTarget> waiting_target_sets(const IntensityModel& model, const Region& s) {
  const size_t m = s.blocks.block_count();
  const Index n = model.num_states();
  std::vector<WaitTarget> out;
  out.reserve(m);
  // W_{m+1} is the whole state space: nothing remains to be avoided.
  for (size_t step = 0; step < m; ++step) {
    StateSet waiting = union_targets(model, s.blocks.left_shift(step)).complement();
    StateSet next_waiting = union_targets(model, s.blocks.left_shift(step + 1)).complement();
    StateSet inter = StateSet::full(n);
    for (int k : s.blocks.block(step)) inter = inter & model.target(k);
    out.push_back({waiting, inter & next_waiting});
  }
  return out;
}

std::vector<WaitTarget> waiting_target_sets_absorbing(const IntensityModel& model,
                                                      const Region& s) {
  const size_t m = s.blocks.block_count();
  const Index n = model.num_states();
  std::vector<WaitTarget> out;
  out.reserve(m);
  StateSet prev_target = union_targets(model, s.blocks).complement();  // \hat{T}_0
  StateSet running_inter = StateSet::full(n);
  for (size_t step = 0; step < m; ++step) {
    for (int k : s.blocks.block(step)) running_inter = running_inter & model.target(k);
    StateSet remaining = union_targets(model, s.blocks.left_shift(step + 1));
    StateSet target = running_inter - remaining;
    out.push_back({prev_target, target});
    prev_target = target;
  }
  return out;
}

namespace {

void subperm_rec(int n, std::vector<int>& current, std::vector<bool>& used,
                 std::vector<std::vector<int>>& out, size_t length) {
  if (current.size() == length) {
    out.push_back(current);
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<size_t>(i)]) continue;
    used[static_cast<size_t>(i)] = true;
    current.push_back(i);
    subperm_rec(n, current, used, out, length);
    current.pop_back();
    used[static_cast<size_t>(i)] = false;
  }
}

}  // namespace

std::vector<std::vector<int>> subpermutations(int n) {
  if (n < 0) throw ValueError("subpermutations of a negative count");
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  std::vector<bool> used(static_cast<size_t>(n), false);
  for (size_t length = 0; length <= static_cast<size_t>(n); ++length)
    subperm_rec(n, current, used, out, length);
  return out;
}

std::string region_to_string(const Region& s) {
  std::ostringstream os;
  for (size_t n = 0; n < s.blocks.block_count(); ++n) {
    if (n) os << " < ";
    const auto& b = s.blocks.block(n);
    os << '{';
    for (size_t i = 0; i < b.size(); ++i) {
      if (i) os << ',';
      os << b[i];
    }
    os << '}';
  }
  return os.str();
}

Region parse_region(const std::string& text) {
  std::vector<std::vector<int>> blocks;
  size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("region syntax: " + what, static_cast<int>(pos + 1));
  };
  while (true) {
    skip_ws();
    if (pos >= text.size() || text[pos] != '{') throw fail("expected '{'");
    ++pos;
    std::vector<int> block;
    while (true) {
      skip_ws();
      size_t start = pos;
      while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) ||
                                   (pos == start && text[pos] == '-')))
        ++pos;
      if (pos == start) throw fail("expected a target index");
      block.push_back(std::stoi(text.substr(start, pos - start)));
      skip_ws();
      if (pos < text.size() && text[pos] == ',') {
        ++pos;
        continue;
      }
      if (pos < text.size() && text[pos] == '}') {
        ++pos;
        break;
      }
      throw fail("expected ',' or '}'");
    }
    blocks.push_back(std::move(block));
    skip_ws();
    if (pos >= text.size()) break;
    if (text[pos] != '<') throw fail("expected '<' between blocks");
    ++pos;
  }
  try {
    return Region{SubPartition(std::move(blocks))};
  } catch (const ValueError& e) {
    throw ParseError(std::string("region syntax: ") + e.what(), 1);
  }
}

}  // namespace phasehit
