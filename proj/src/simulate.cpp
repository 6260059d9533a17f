#include "phasehit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace phasehit {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PHASEHIT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

namespace {

// Runs per_chunk over a partition of [0, n); chunk results land in a vector
// indexed by chunk, so the reduction order never depends on scheduling.
template <typename ChunkResult, typename PerChunk>
std::vector<ChunkResult> run_chunked(std::int64_t n, int workers, PerChunk per_chunk) {
  const int chunks = std::max(1, std::min<int>(workers, static_cast<int>(std::min<std::int64_t>(n, 1024))));
  std::vector<ChunkResult> results(static_cast<size_t>(chunks));
  std::vector<std::thread> pool;
  const std::int64_t step = (n + chunks - 1) / chunks;
  for (int c = 0; c < chunks; ++c) {
    const std::int64_t lo = c * step;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + step);
    if (lo >= hi) continue;
    pool.emplace_back([&, c, lo, hi] { results[static_cast<size_t>(c)] = per_chunk(lo, hi); });
  }
  for (auto& th : pool) th.join();
  return results;
}

// splitmix64; mixes (seed, path index) into independent stream seeds so the
// sampled paths do not depend on how work is scheduled.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t path_index)
      : state_(mix64(mix64(seed) ^ mix64(path_index + 0x51u))) {}

  double uniform() {  // in [0, 1)
    state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
    std::uint64_t x = state_;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // index into a nonnegative weight vector proportional to the weights
  Index pick(const std::vector<double>& weights, double total) {
    const double r = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (r < acc) return static_cast<Index>(i);
    }
    return static_cast<Index>(weights.size() - 1);
  }

 private:
  std::uint64_t state_;
};

Index draw_initial(const IntensityModel& model, Stream& rng) {
  const double r = rng.uniform();
  double acc = 0.0;
  for (Index i = 0; i < model.num_states(); ++i) {
    acc += model.alpha(i);
    if (r < acc) return i;
  }
  return model.num_states() - 1;
}

}  // namespace

double default_horizon(const IntensityModel& model) {
  double min_rate = 0.0;
  for (Index i = 0; i < model.num_states(); ++i) {
    const double rate = -model.lambda(i, i);
    if (rate > 0.0 && (min_rate == 0.0 || rate < min_rate)) min_rate = rate;
  }
  if (min_rate == 0.0) throw ValueError("default_horizon: every state is absorbing");
  return 20.0 / min_rate;
}

PathSample sample_path(const IntensityModel& model, double horizon, std::uint64_t seed,
                       std::uint64_t path_index) {
  if (!(horizon > 0.0)) throw ValueError("sample_path: horizon must be positive");
  Stream rng(seed, path_index);
  const Index n = model.num_states();

  PathSample out;
  out.horizon = horizon;
  Index state = draw_initial(model, rng);
  out.states.push_back(state);
  for (int k : model.target_keys()) {
    const bool at_start = model.target(k).contains(state);
    out.tau[k] = at_start ? 0.0 : PathSample::never();
    out.tau_jump[k] = at_start ? 0 : -1;
  }
  auto all_hit = [&] {
    for (const auto& [k, v] : out.tau_jump)
      if (v < 0) return false;
    return true;
  };

  double now = 0.0;
  std::vector<double> weights(static_cast<size_t>(n));
  int jump = 0;
  while (!all_hit()) {
    const double rate = -model.lambda(state, state);
    if (rate <= 0.0) {
      out.trapped = true;
      break;
    }
    now += rng.exponential(rate);
    if (now > horizon) break;
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double w = j == state ? 0.0 : model.lambda(state, j);
      weights[static_cast<size_t>(j)] = w;
      total += w;
    }
    state = rng.pick(weights, total);
    ++jump;
    out.jump_times.push_back(now);
    out.states.push_back(state);
    for (const auto& [k, g] : model.targets) {
      if (out.tau_jump[k] < 0 && g.contains(state)) {
        out.tau[k] = now;
        out.tau_jump[k] = jump;
      }
    }
  }
  return out;
}

std::optional<Region> classify_path(const PathSample& path) {
  // Exact ties: two coordinates tie iff the same jump recorded both.
  std::map<int, std::vector<int>> by_jump;  // jump ordinal -> target keys
  for (const auto& [k, j] : path.tau_jump) {
    if (j < 0) return std::nullopt;
    by_jump[j].push_back(k);
  }
  std::vector<std::vector<int>> blocks;
  for (auto& [j, keys] : by_jump) blocks.push_back(std::move(keys));  // ordinal = time order
  return Region{SubPartition(std::move(blocks))};
}

namespace {

EmpiricalEstimate frequency_estimate(std::int64_t hits, std::int64_t censored,
                                     std::int64_t n, std::uint64_t seed) {
  EmpiricalEstimate est;
  est.n = n;
  est.seed = seed;
  est.value = static_cast<double>(hits) / static_cast<double>(n);
  est.stderror = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(n));
  est.censored_fraction = static_cast<double>(censored) / static_cast<double>(n);
  return est;
}

}  // namespace

EmpiricalEstimate estimate_region_prob(const IntensityModel& model, const Region& s,
                                       std::int64_t n, double horizon, std::uint64_t seed,
                                       int workers) {
  if (n < 1) throw ValueError("estimate_region_prob: need at least one path");
  struct Counts {
    std::int64_t hits = 0, censored = 0;
  };
  auto chunks = run_chunked<Counts>(
      n, resolve_workers(workers), [&](std::int64_t lo, std::int64_t hi) {
        Counts c;
        for (std::int64_t i = lo; i < hi; ++i) {
          PathSample path = sample_path(model, horizon, seed, static_cast<std::uint64_t>(i));
          auto region = classify_path(path);
          if (!region)
            ++c.censored;
          else if (*region == s)
            ++c.hits;
        }
        return c;
      });
  std::int64_t hits = 0, censored = 0;
  for (const auto& c : chunks) {
    hits += c.hits;
    censored += c.censored;
  }
  return frequency_estimate(hits, censored, n, seed);
}

RegionTally count_regions(const IntensityModel& model, std::int64_t n, double horizon,
                          std::uint64_t seed, int workers) {
  if (n < 1) throw ValueError("count_regions: need at least one path");
  auto chunks = run_chunked<RegionTally>(
      n, resolve_workers(workers), [&](std::int64_t lo, std::int64_t hi) {
        RegionTally tally;
        for (std::int64_t i = lo; i < hi; ++i) {
          PathSample path = sample_path(model, horizon, seed, static_cast<std::uint64_t>(i));
          auto region = classify_path(path);
          if (!region)
            ++tally.censored;
          else
            ++tally.counts[*region];
        }
        return tally;
      });
  RegionTally total;
  total.n = n;
  for (const auto& t : chunks) {
    total.censored += t.censored;
    for (const auto& [r, c] : t.counts) total.counts[r] += c;
  }
  return total;
}

bool tail_event_holds(const PathSample& path, const TailQuery& q) {
  std::vector<int> tie_jumps;  // joint-hit ordinals of the multi-index blocks
  auto block_ok = [&](const std::vector<int>& block, double bound,
                      bool has_bound) -> bool {
    if (block.size() > 1) {
      const int j0 = path.tau_jump.at(block.front());
      if (j0 < 0) return false;  // a tie requires an actual joint hit
      for (int k : block)
        if (path.tau_jump.at(k) != j0) return false;
      tie_jumps.push_back(j0);
      if (has_bound && !(path.tau.at(block.front()) > bound)) return false;
      return true;
    }
    if (has_bound && !(path.tau.at(block.front()) > bound)) return false;
    return true;
  };
  for (size_t m = 0; m < q.s1.block_count(); ++m)
    if (!block_ok(q.s1.block(m), q.t[m], true)) return false;
  for (size_t m = 0; m < q.s2.block_count(); ++m)
    if (!block_ok(q.s2.block(m), 0.0, false)) return false;
  std::sort(tie_jumps.begin(), tie_jumps.end());
  return std::adjacent_find(tie_jumps.begin(), tie_jumps.end()) == tie_jumps.end();
}

EmpiricalEstimate estimate_tail(const IntensityModel& model, const TailQuery& q,
                                std::int64_t n, double horizon, std::uint64_t seed,
                                int workers) {
  if (n < 1) throw ValueError("estimate_tail: need at least one path");
  q.validate();
  struct Counts {
    std::int64_t hits = 0, censored = 0;
  };
  auto chunks = run_chunked<Counts>(
      n, resolve_workers(workers), [&](std::int64_t lo, std::int64_t hi) {
        Counts c;
        for (std::int64_t i = lo; i < hi; ++i) {
          PathSample path = sample_path(model, horizon, seed, static_cast<std::uint64_t>(i));
          bool any_unhit = false;
          for (const auto& [k, j] : path.tau_jump)
            if (j < 0) any_unhit = true;
          if (any_unhit && !path.trapped) ++c.censored;
          if (tail_event_holds(path, q)) ++c.hits;
        }
        return c;
      });
  std::int64_t hits = 0, censored = 0;
  for (const auto& c : chunks) {
    hits += c.hits;
    censored += c.censored;
  }
  return frequency_estimate(hits, censored, n, seed);
}

std::vector<BoxEstimate> binned_density(const IntensityModel& model, const Region& s,
                                        const BoxGrid& grid, std::int64_t n,
                                        std::uint64_t seed, int workers) {
  if (n < 1) throw ValueError("binned_density: need at least one path");
  const size_t dim = s.blocks.block_count();
  if (grid.edges.size() != dim)
    throw ValueError("binned_density: grid dimension does not match the region");
  std::vector<size_t> cells(dim);
  size_t total_cells = 1;
  for (size_t d = 0; d < dim; ++d) {
    const auto& e = grid.edges[d];
    if (e.size() < 2 || !std::is_sorted(e.begin(), e.end()))
      throw ValueError("binned_density: each coordinate needs sorted cell edges");
    for (size_t i = 0; i + 1 < e.size(); ++i)
      if (!(e[i + 1] > e[i]))
        throw ValueError("binned_density: degenerate (zero-volume) box");
    cells[d] = e.size() - 1;
    total_cells *= cells[d];
  }

  const double horizon = [&] {
    double h = default_horizon(model);
    for (const auto& e : grid.edges) h = std::max(h, e.back() * 2.0);
    return h;
  }();

  using CellCounts = std::vector<std::int64_t>;
  auto chunks = run_chunked<CellCounts>(
      n, resolve_workers(workers), [&](std::int64_t lo, std::int64_t hi) {
        CellCounts local(total_cells, 0);
        for (std::int64_t i = lo; i < hi; ++i) {
          PathSample path = sample_path(model, horizon, seed, static_cast<std::uint64_t>(i));
          auto region = classify_path(path);
          if (!region || !(*region == s)) continue;
          // Free coordinates: the common hitting time of each block, in block order.
          size_t flat = 0;
          bool inside = true;
          for (size_t d = 0; d < dim && inside; ++d) {
            const double coord = path.tau.at(s.blocks.block(d).front());
            const auto& e = grid.edges[d];
            auto it = std::upper_bound(e.begin(), e.end(), coord);
            if (it == e.begin() || it == e.end()) {
              inside = false;
              break;
            }
            const size_t cell = static_cast<size_t>(it - e.begin()) - 1;
            flat = flat * cells[d] + cell;
          }
          if (inside) ++local[flat];
        }
        return local;
      });
  std::vector<std::int64_t> counts(total_cells, 0);
  for (const auto& local : chunks)
    if (!local.empty())
      for (size_t c = 0; c < total_cells; ++c) counts[c] += local[c];

  std::vector<BoxEstimate> out;
  out.reserve(total_cells);
  for (size_t flat = 0; flat < total_cells; ++flat) {
    BoxEstimate box;
    size_t rem = flat;
    box.volume = 1.0;
    box.center.resize(dim);
    for (size_t d = dim; d-- > 0;) {
      const size_t cell = rem % cells[d];
      rem /= cells[d];
      const auto& e = grid.edges[d];
      box.center[d] = 0.5 * (e[cell] + e[cell + 1]);
      box.volume *= e[cell + 1] - e[cell];
    }
    const double freq = static_cast<double>(counts[flat]) / static_cast<double>(n);
    box.density.n = n;
    box.density.seed = seed;
    box.density.value = freq / box.volume;
    box.density.stderror = std::sqrt(freq * (1.0 - freq) / static_cast<double>(n)) / box.volume;
    out.push_back(std::move(box));
  }
  return out;
}

std::vector<Index> sample_embedded_path(const IntensityModel& model, int max_steps,
                                        std::uint64_t seed, std::uint64_t path_index) {
  Stream rng(seed, path_index);
  const Index n = model.num_states();
  std::vector<Index> out;
  Index state = draw_initial(model, rng);
  out.push_back(state);
  std::vector<double> weights(static_cast<size_t>(n));
  for (int step = 0; step < max_steps; ++step) {
    const double rate = -model.lambda(state, state);
    if (rate <= 0.0) break;  // unit self-loop row of the jump chain
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double w = j == state ? 0.0 : model.lambda(state, j);
      weights[static_cast<size_t>(j)] = w;
      total += w;
    }
    state = rng.pick(weights, total);
    out.push_back(state);
  }
  return out;
}

}  // namespace phasehit
