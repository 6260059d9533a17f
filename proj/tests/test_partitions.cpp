#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phasehit/model_io.hpp"
#include "phasehit/partitions.hpp"
#include "testutil.hpp"

using namespace phasehit;
using phtest::Rng;

namespace {

SubPartition sp(std::vector<std::vector<int>> blocks) { return SubPartition(std::move(blocks)); }

}  // namespace

TEST_CASE("subpartition shape rules") {
  CHECK_THROWS_AS(sp({{1}, {}}), ValueError);
  CHECK_THROWS_AS(sp({{1, 2}, {2}}), ValueError);
  CHECK(sp({{2, 1}}).block(0) == std::vector<int>{1, 2});  // blocks kept sorted
  CHECK(sp({{1, 2}, {3}}) == sp({{2, 1}, {3}}));
  CHECK(!(sp({{1, 2}, {3}}) == sp({{3}, {1, 2}})));  // order significant
}

TEST_CASE("left shift drops leading blocks") {
  SubPartition s = sp({{1, 2}, {3}});
  CHECK(s.left_shift(1) == sp({{3}}));
  CHECK(s.left_shift(0) == s);
  CHECK(sp({{1}, {2}, {3}}).left_shift(2) == sp({{3}}));
  CHECK(s.left_shift(2).empty());
  CHECK_THROWS_AS(s.left_shift(3), ValueError);
}

TEST_CASE("block removal and addition match the worked forms") {
  SubPartition s = sp({{1, 2}, {3}, {4, 7}});
  CHECK(s.without_block(1) == sp({{1, 2}, {4, 7}}));
  CHECK(sp({{1, 2}, {3}}).with_block({4, 7}) == s);
  CHECK_THROWS_AS(sp({{1, 2}}).with_block({2}), ValueError);
  CHECK_THROWS_AS(sp({{1, 2}}).with_block({}), ValueError);
  // removing the final block then re-adding it restores the subpartition
  CHECK(s.without_block(2).with_block({4, 7}) == s);
}

TEST_CASE("union of named targets deduplicates") {
  IntensityModel m;
  m.space = StateSpace(phtest::default_labels(5));
  m.lambda = Matrix::Zero(5, 5);
  m.alpha = RowVector::Zero(5);
  m.alpha(0) = 1.0;
  m.targets.emplace(1, StateSet(5, {1, 2}));
  m.targets.emplace(2, StateSet(5, {2, 3}));
  CHECK(union_targets(m, SubPartition{}).empty());
  CHECK(union_targets(m, sp({{1}})) == StateSet(5, {1, 2}));
  CHECK(union_targets(m, sp({{1}, {2}})) == StateSet(5, {1, 2, 3}));
  CHECK_THROWS_AS(union_targets(m, sp({{9}})), ValueError);
}

TEST_CASE("classification groups equal times in increasing order") {
  TimeVector t{{1, 0.4}, {2, 0.9}, {3, 1.7}, {4, 0.4}, {5, 1.7}, {6, 1.7}};
  Region s = classify(t);
  CHECK(s.blocks == sp({{1, 4}, {2}, {3, 5, 6}}));
  CHECK(region_to_string(s) == "{1,4} < {2} < {3,5,6}");

  Region singletons = classify(TimeVector{{1, 0.3}, {2, 0.1}, {3, 0.8}});
  CHECK(singletons.blocks == sp({{2}, {1}, {3}}));

  Region one = classify(TimeVector{{1, 0.5}, {2, 0.5}, {3, 0.5}});
  CHECK(one.blocks == sp({{1, 2, 3}}));

  // exact equality only, unless a tie tolerance is requested
  Region close = classify(TimeVector{{1, 0.5}, {2, 0.5 + 1e-13}});
  CHECK(close.dimension() == 2);
  Region merged = classify(TimeVector{{1, 0.5}, {2, 0.5 + 1e-13}}, 1e-9);
  CHECK(merged.dimension() == 1);
}

TEST_CASE("enumeration counts are the Fubini numbers and match brute force") {
  const std::vector<size_t> fubini{1, 3, 13, 75};
  for (int k = 1; k <= 4; ++k) {
    std::vector<int> keys;
    for (int i = 1; i <= k; ++i) keys.push_back(i);
    auto regions = enumerate_partitions(keys);
    CHECK(regions.size() == fubini[static_cast<size_t>(k - 1)]);

    auto oracle = phtest::brute_force_ordered_partitions(keys);
    CHECK(oracle.size() == regions.size());
    std::set<std::vector<std::vector<int>>> got;
    for (const auto& r : regions) got.insert(r.blocks.blocks());
    CHECK(got == oracle);
  }
  std::vector<int> big;
  for (int i = 0; i < 9; ++i) big.push_back(i);
  CHECK_THROWS_AS(enumerate_partitions(big), ValueError);
}

TEST_CASE("every classified vector appears exactly once in the enumeration") {
  Rng rng(71);
  std::vector<int> keys{1, 2, 3};
  auto regions = enumerate_partitions(keys);
  for (int rep = 0; rep < 200; ++rep) {
    TimeVector t;
    for (int k : keys) t[k] = rng.coin(0.3) ? 0.5 : rng.uniform(0.0, 2.0);
    Region s = classify(t);
    int matches = 0;
    for (const auto& r : regions)
      if (r == s) ++matches;
    CHECK(matches == 1);
  }
}

TEST_CASE("waiting and target sets on a single block reduce to the basics") {
  IntensityModel m = phtest::two_state_chain(1.0);
  auto steps = waiting_target_sets(m, Region{sp({{1}})});
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].waiting == m.target(1).complement());
  CHECK(steps[0].target == m.target(1));
}

TEST_CASE("waiting and target sets on the lattice example") {
  LatticeSpec spec;
  spec.dims = {3, 3, 3};
  spec.increments = {{{1, 0, 0}, 2},   {{-1, 0, 0}, 1},   {{0, 1, 0}, 2},
                     {{0, -1, 0}, 1},  {{0, 0, 1}, 3},    {{0, 0, -1}, 1},
                     {{1, 1, 0}, 0.5}, {{-1, -1, 0}, 0.5}, {{1, 1, 1}, 0.2},
                     {{-1, -1, -1}, 0.2}};
  IntensityModel m = expand_lattice(spec);

  Region s{sp({{2, 3}, {1}})};
  auto steps = waiting_target_sets(m, s);
  REQUIRE(steps.size() == 2);
  // direct set algebra
  const StateSet g1 = m.target(1), g2 = m.target(2), g3 = m.target(3);
  CHECK(steps[0].waiting == (g1 | g2 | g3).complement());
  CHECK(steps[0].target == ((g2 & g3) - g1));
  CHECK(steps[1].waiting == g1.complement());
  CHECK(steps[1].target == g1);

  // nesting: each target set feeds the next waiting set
  Rng rng(73);
  auto regions = enumerate_partitions({1, 2, 3});
  for (const auto& r : regions) {
    auto ws = waiting_target_sets(m, r);
    for (size_t n = 0; n + 1 < ws.size(); ++n)
      CHECK(ws[n].target.subset_of(ws[n + 1].waiting));
    for (size_t n = 0; n < ws.size(); ++n) CHECK(ws[n].target.subset_of(ws[n].waiting.complement()));
  }
}

TEST_CASE("absorbing-variant sets shrink the waiting room") {
  Rng rng(79);
  IntensityModel m = phtest::random_absorbing_model(7, 3, rng);
  for (const auto& r : enumerate_partitions({1, 2, 3})) {
    auto plain = waiting_target_sets(m, r);
    auto hat = waiting_target_sets_absorbing(m, r);
    REQUIRE(plain.size() == hat.size());
    CHECK(hat[0].waiting == plain[0].waiting);
    CHECK(hat[0].target == plain[0].target);
    for (size_t n = 0; n < hat.size(); ++n) {
      CHECK(hat[n].target.subset_of(plain[n].target));
      CHECK(hat[n].waiting.subset_of(plain[n].waiting));
      if (n > 0) CHECK(hat[n].waiting == hat[n - 1].target);
    }
  }
}

TEST_CASE("subpermutation sets have the stated sizes") {
  CHECK(subpermutations(0).size() == 1);  // just the empty arrangement
  CHECK(subpermutations(1).size() == 2);
  auto p2 = subpermutations(2);
  CHECK(p2.size() == 5);
  std::set<std::vector<int>> got(p2.begin(), p2.end());
  std::set<std::vector<int>> want{{}, {0}, {1}, {0, 1}, {1, 0}};
  CHECK(got == want);
  CHECK(subpermutations(3).size() == 16);  // 1 + 3 + 6 + 6
}

TEST_CASE("region grammar round-trips") {
  Region s{sp({{2, 3}, {1}})};
  CHECK(region_to_string(s) == "{2,3} < {1}");
  CHECK(parse_region("{2,3}<{1}") == s);
  CHECK(parse_region(" { 2 , 3 } < { 1 } ") == s);
  CHECK_THROWS_AS(parse_region("{2,3<{1}"), ParseError);
  CHECK_THROWS_AS(parse_region("{}"), ParseError);
  CHECK_THROWS_AS(parse_region("{1}<{1}"), ParseError);
}
