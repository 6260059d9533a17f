#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phasehit/hitting.hpp"
#include "phasehit/simulate.hpp"
#include "testutil.hpp"

#include <cmath>

using namespace phasehit;
using phtest::Rng;

TEST_CASE("taboo distribution: closed forms and support") {
  const double rate = 1.3, u = 0.9;
  IntensityModel m = phtest::two_state_chain(rate);
  RowVector p0 = taboo_distribution(m, m.target(1), 0.0);
  CHECK(p0 == m.alpha);
  RowVector p = taboo_distribution(m, m.target(1), u);
  CHECK(p(0) == doctest::Approx(std::exp(-rate * u)).epsilon(1e-12));
  CHECK(p(1) == 0.0);

  IntensityModel charged = m;
  charged.alpha << 0.5, 0.5;
  CHECK_THROWS_AS(taboo_distribution(charged, charged.target(1), u), ValueError);
}

TEST_CASE("taboo distribution tracks simulated taboo frequencies") {
  Rng rng(211);
  IntensityModel m = phtest::random_model(5, 1, rng);
  const StateSet d = m.target(1);
  const double u = 0.6;
  RowVector p = taboo_distribution(m, d, u);

  const std::int64_t n = 1000000;
  std::vector<std::int64_t> counts(5, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    PathSample path = sample_path(m, 2.0 * u, 77, static_cast<std::uint64_t>(i));
    // state at time u over paths that avoided d throughout [0, u]
    if (path.tau.at(1) <= u) continue;
    Index at = path.states[0];
    for (size_t j = 0; j < path.jump_times.size() && path.jump_times[j] <= u; ++j)
      at = path.states[j + 1];
    ++counts[static_cast<size_t>(at)];
  }
  for (Index j = 0; j < 5; ++j) {
    const double freq = static_cast<double>(counts[static_cast<size_t>(j)]) / n;
    const double sigma = std::sqrt(std::max(freq * (1 - freq), 1e-9) / n);
    CHECK(std::abs(p(j) - freq) <= 3.5 * sigma);
  }
}

TEST_CASE("survival of a single entry time") {
  const double rate = 0.7;
  IntensityModel m = phtest::two_state_chain(rate);
  CHECK(survival_single(m, m.target(1), 0.0).survival == doctest::Approx(1.0));
  for (double u : {0.1, 1.0, 5.0})
    CHECK(survival_single(m, m.target(1), u).survival ==
          doctest::Approx(std::exp(-rate * u)).epsilon(1e-12));

  // initial mass sitting inside the avoided set is reported separately
  Rng rng(223);
  IntensityModel g = phtest::random_model(3, 1, rng);
  StateSet d(3, {1});
  g.alpha << 0.2, 0.3, 0.5;
  SurvivalValue sv = survival_single(g, d, 0.8);
  CHECK(sv.mass_at_zero == doctest::Approx(0.3).epsilon(1e-14));
  // independent evaluation with the series oracle on the masked generator
  RowVector masked = g.alpha;
  masked(1) = 0.0;
  const Matrix gen = mask(g, d.complement(), d.complement());
  const double want = (masked * phtest::series_expm(0.8 * gen)).sum();
  CHECK(sv.survival == doctest::Approx(want).epsilon(1e-11));
}

TEST_CASE("single-hit density generalizes the exponential density") {
  const double rate = 2.0;
  IntensityModel m = phtest::two_state_chain(rate);
  for (double u : {0.1, 1.0, 5.0})
    CHECK(density_single(m, m.target(1), StateSet(2), u) ==
          doctest::Approx(rate * std::exp(-rate * u)).epsilon(1e-12));
  CHECK_THROWS_AS(density_single(m, m.target(1), m.target(1), 1.0), ValueError);
  CHECK_THROWS_AS(density_single(m, m.target(1), StateSet(2), 0.0), ValueError);
}

TEST_CASE("single-hit density is unreachable-zero and accounts for full mass") {
  Rng rng(227);
  // a reachable only through b: the avoiding density vanishes identically
  IntensityModel line;
  line.space = StateSpace({"s", "mid", "end"});
  line.lambda = Matrix::Zero(3, 3);
  line.lambda(0, 1) = 1.0;
  line.lambda(0, 0) = -1.0;
  line.lambda(1, 2) = 1.0;
  line.lambda(1, 1) = -1.0;
  line.targets.emplace(1, StateSet(3, {2}));
  line.alpha = RowVector::Zero(3);
  line.alpha(0) = 1.0;
  for (double u : {0.2, 1.0, 3.0})
    CHECK(density_single(line, StateSet(3, {2}), StateSet(3, {1}), u) == 0.0);

  // quadrature of the density + P(hit b first) + P(avoid both forever) = 1
  IntensityModel m = phtest::random_model(6, 2, rng);
  const StateSet a = m.target(1) - m.target(2);
  const StateSet b = m.target(2);
  if (!a.empty()) {
    auto f = [&](double u) { return Vector::Constant(1, density_single(m, a, b, u)); };
    const double horizon = 200.0;
    const double hit_a_avoiding_b = integrate(f, 1e-9, horizon)(0);
    // complementary mass: first entry into a∪b lands in b
    const StateSet d = a | b;
    const Matrix gen = mask(m, d.complement(), d.complement());
    auto g = [&](double u) {
      return Vector::Constant(
          1, (expm_apply(m.alpha, gen, u) * mask(m, d.complement(), b)).sum());
    };
    const double hit_b_first = integrate(g, 1e-9, horizon)(0);
    const double never = survival_single(m, d, horizon).survival;
    CHECK(hit_a_avoiding_b + hit_b_first + never == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("post-jump law is a distribution concentrated on the entry set") {
  Rng rng(229);
  IntensityModel m = phtest::random_model(6, 2, rng);
  const StateSet a = m.target(1), b = m.target(2) - m.target(1);
  const double u = 0.5;
  RowVector law = post_jump_distribution(m, a, b, u);
  CHECK(law.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Index i = 0; i < 6; ++i) {
    CHECK(law(i) >= 0.0);
    if (!a.contains(i)) CHECK(law(i) == 0.0);
  }
  // single-state entry set: unit mass
  IntensityModel two = phtest::two_state_chain(1.0);
  RowVector unit = post_jump_distribution(two, two.target(1), StateSet(2), 0.3);
  CHECK(unit(1) == doctest::Approx(1.0));

  // two target states reachable symmetrically: the landing law is fifty-fifty
  IntensityModel fork;
  fork.space = StateSpace({"s", "left", "right"});
  fork.lambda = Matrix::Zero(3, 3);
  fork.lambda(0, 1) = 1.0;
  fork.lambda(0, 2) = 1.0;
  fork.lambda(0, 0) = -2.0;
  fork.targets.emplace(1, StateSet(3, {1, 2}));
  fork.alpha = RowVector::Zero(3);
  fork.alpha(0) = 1.0;
  RowVector half = post_jump_distribution(fork, fork.target(1), StateSet(3), 0.8);
  CHECK(half(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(half(2) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("post-jump law matches conditional simulation frequencies") {
  Rng rng(233);
  IntensityModel m = phtest::random_model(5, 1, rng);
  const StateSet a = m.target(1);
  const double u = 0.5, h = 0.05;
  RowVector law = post_jump_distribution(m, a, StateSet(5), u + 0.5 * h);

  std::vector<std::int64_t> counts(5, 0);
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < 400000; ++i) {
    PathSample path = sample_path(m, 2.0, 311, static_cast<std::uint64_t>(i));
    const double tau = path.tau.at(1);
    if (!(tau >= u && tau < u + h)) continue;
    const Index landing = path.states[static_cast<size_t>(path.tau_jump.at(1))];
    ++counts[static_cast<size_t>(landing)];
    ++total;
  }
  REQUIRE(total > 1000);
  for (Index j : a.indices()) {
    const double freq = static_cast<double>(counts[static_cast<size_t>(j)]) / total;
    const double sigma = std::sqrt(std::max(freq * (1 - freq), 1e-9) / total);
    CHECK(std::abs(law(j) - freq) <= 3.5 * sigma + 0.01);  // h-binning bias allowance
  }
}

TEST_CASE("joint density with one target reduces to the single-hit density") {
  Rng rng(239);
  IntensityModel m = phtest::random_model(6, 1, rng);
  for (double u : {0.2, 0.8, 2.0}) {
    DensityQuery q;
    q.t = TimeVector{{1, u}};
    CHECK(joint_density(m, q).value ==
          doctest::Approx(density_single(m, m.target(1), StateSet(6), u)).epsilon(1e-12));
  }
}

TEST_CASE("joint density reproduces the Poisson jump-time product") {
  const double rate = 1.4;
  IntensityModel m = phtest::pure_birth_chain(rate, 3);
  Rng rng(241);
  for (int rep = 0; rep < 5; ++rep) {
    double t1 = rng.uniform(0.1, 0.5), t2 = t1 + rng.uniform(0.05, 0.5),
           t3 = t2 + rng.uniform(0.05, 0.5);
    DensityQuery q;
    q.t = TimeVector{{1, t1}, {2, t2}, {3, t3}};
    const double want = rate * rate * rate * std::exp(-rate * t3);
    CHECK(joint_density(m, q).value == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("joint density rejects inconsistent queries") {
  Rng rng(251);
  IntensityModel m = phtest::random_model(5, 2, rng);
  DensityQuery q;
  q.t = TimeVector{{1, 0.5}, {2, 0.0}};
  CHECK_THROWS_AS(joint_density(m, q), ValueError);  // zero entry
  q.t = TimeVector{{1, 0.5}, {2, 0.9}};
  q.region = Region{SubPartition({{1, 2}})};
  CHECK_THROWS_AS(joint_density(m, q), ValueError);  // region mismatch
  q.region.reset();
  IntensityModel charged = m;
  charged.alpha = RowVector::Zero(5);
  charged.alpha(m.target(1).indices()[0]) = 1.0;
  DensityQuery q2;
  q2.t = q.t;
  CHECK_THROWS_AS(joint_density(charged, q2), ValueError);  // mass on the targets
}

TEST_CASE("zero target factor forces an exactly zero density") {
  // two targets with no way to enter both at once: the tied region is null
  IntensityModel m;
  m.space = StateSpace({"i", "g1", "g2"});
  m.lambda = Matrix::Zero(3, 3);
  m.lambda(0, 1) = 1.0;
  m.lambda(0, 2) = 1.0;
  m.lambda(0, 0) = -2.0;
  m.targets.emplace(1, StateSet(3, {1}));
  m.targets.emplace(2, StateSet(3, {2}));
  m.alpha = RowVector::Zero(3);
  m.alpha(0) = 1.0;
  DensityQuery q;
  q.t = TimeVector{{1, 0.7}, {2, 0.7}};
  CHECK(joint_density(m, q).value == 0.0);
}

TEST_CASE("joint density is linear in the initial distribution") {
  Rng rng(257);
  for (int rep = 0; rep < 20; ++rep) {
    IntensityModel m = phtest::random_model(6, 2, rng);
    const StateSet interior = m.target_union().complement();
    auto ids = interior.indices();
    if (ids.size() < 2) continue;
    RowVector a1 = RowVector::Zero(6), a2 = RowVector::Zero(6);
    a1(ids[0]) = 1.0;
    a2(ids[1]) = 1.0;
    const double c1 = rng.uniform(0.1, 0.9), c2 = 1.0 - c1;
    TimeVector t{{1, rng.uniform(0.1, 1.0)}, {2, rng.uniform(1.1, 2.0)}};
    const double mixed = joint_density(m, RowVector(c1 * a1 + c2 * a2), t);
    const double split = c1 * joint_density(m, a1, t) + c2 * joint_density(m, a2, t);
    CHECK(mixed == doctest::Approx(split).epsilon(1e-12));
  }
}

TEST_CASE("joint density is nonnegative over random queries") {
  Rng rng(263);
  for (int rep = 0; rep < 10000; ++rep) {
    IntensityModel m = phtest::random_model(4 + rep % 3, 1 + rep % 3, rng);
    TimeVector t;
    for (int k : m.target_keys())
      t[k] = rng.coin(0.25) ? 0.75 : rng.uniform(0.05, 2.5);
    CHECK(joint_density(m, m.alpha, t) >= 0.0);
  }
}

TEST_CASE("region mass from the density matches simulated frequency") {
  Rng rng(269);
  IntensityModel m = phtest::random_model(5, 2, rng);
  // box inside the region t1 < t2
  const double a_lo = 0.2, a_hi = 0.5, b_lo = 0.6, b_hi = 1.0;
  auto outer = [&](double t1) {
    auto inner = [&](double t2) {
      return Vector::Constant(1, joint_density(m, m.alpha, TimeVector{{1, t1}, {2, t2}}));
    };
    return integrate(inner, b_lo, b_hi);
  };
  const double mass = integrate(outer, a_lo, a_hi)(0);

  const std::int64_t n = 1000000;
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    PathSample path = sample_path(m, 100.0, 41, static_cast<std::uint64_t>(i));
    const double t1 = path.tau.at(1), t2 = path.tau.at(2);
    if (t1 >= a_lo && t1 < a_hi && t2 >= b_lo && t2 < b_hi && t1 != t2) ++hits;
  }
  const double freq = static_cast<double>(hits) / n;
  const double sigma = std::sqrt(freq * (1 - freq) / n);
  CHECK(std::abs(mass - freq) <= 3.0 * sigma);
}

TEST_CASE("mass partition: region integrals and defective mass sum to one") {
  Rng rng(271);
  IntensityModel m = phtest::random_model(5, 2, rng);  // irreducible: no defect
  const double horizon = 220.0;
  double total = 0.0;
  // distinct-order regions: iterated quadrature over the wedges
  for (auto [first, second] : {std::pair{1, 2}, std::pair{2, 1}}) {
    auto outer = [&, first = first, second = second](double t1) {
      auto inner = [&](double t2) {
        return Vector::Constant(
            1, joint_density(m, m.alpha, TimeVector{{first, t1}, {second, t2}}));
      };
      QuadratureRule inner_rule;
      inner_rule.abs_tol = 1e-10;
      return integrate(inner, t1, horizon, inner_rule);
    };
    total += integrate(outer, 1e-8, horizon)(0);
  }
  // tied diagonal region, one-dimensional reference measure
  auto diag = [&](double v) {
    return Vector::Constant(1, joint_density(m, m.alpha, TimeVector{{1, v}, {2, v}}));
  };
  total += integrate(diag, 1e-8, horizon)(0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("initial-mass decomposition splits along the charged states") {
  Rng rng(277);
  IntensityModel m = phtest::random_model(6, 2, rng);
  SUBCASE("interior distribution stays whole") {
    auto parts = decompose_initial(m);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].weight == doctest::Approx(1.0));
    CHECK(parts[0].frozen.empty());
    CHECK((parts[0].alpha - m.alpha).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("point mass on an overlap freezes both coordinates") {
    IntensityModel pm = m;
    StateSet overlap = pm.target(1) & pm.target(2);
    if (overlap.empty()) {
      StateSet g2 = pm.target(2);
      g2.insert(pm.target(1).indices()[0]);
      pm.targets.at(2) = g2;
      overlap = pm.target(1) & pm.target(2);
    }
    pm.alpha = RowVector::Zero(6);
    pm.alpha(overlap.indices()[0]) = 1.0;
    auto parts = decompose_initial(pm);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].weight == doctest::Approx(1.0));
    CHECK(parts[0].frozen == std::vector<int>{1, 2});
  }
  SUBCASE("mixture weights recover total probabilities by simulation") {
    IntensityModel mix = m;
    const Index charged_state = mix.target(1).indices()[0];
    mix.alpha *= 0.6;
    mix.alpha(charged_state) += 0.4;
    auto parts = decompose_initial(mix);
    double weight_sum = 0.0;
    for (const auto& part : parts) weight_sum += part.weight;
    CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-12));

    // P(tau_2 > u) assembled from the pieces equals the direct simulation
    const double u = 0.4;
    double assembled = 0.0;
    for (const auto& part : parts) {
      if (std::find(part.frozen.begin(), part.frozen.end(), 2) != part.frozen.end())
        continue;  // tau_2 frozen at zero fails tau_2 > u
      IntensityModel sub = mix;
      sub.alpha = part.alpha;
      assembled += part.weight * survival_single(sub, sub.target(2), u).survival;
    }
    const std::int64_t n = 200000;
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      PathSample path = sample_path(mix, 50.0, 59, static_cast<std::uint64_t>(i));
      if (path.tau.at(2) > u) ++hits;
    }
    const double freq = static_cast<double>(hits) / n;
    CHECK(phtest::within_sigma(assembled, freq, std::sqrt(freq * (1 - freq) / n), n));
  }
}

TEST_CASE("absorbing variants agree with the general formula") {
  Rng rng(281);
  for (int rep = 0; rep < 10; ++rep) {
    IntensityModel m = phtest::random_absorbing_model(7, 2, rng);
    for (int draw = 0; draw < 5; ++draw) {
      TimeVector t;
      t[1] = rng.uniform(0.05, 1.5);
      t[2] = rng.coin(0.3) ? t[1] : rng.uniform(0.05, 1.5);
      DensityQuery q;
      q.t = t;
      const double base = joint_density(m, q).value;
      const double full = joint_density_absorbing(m, q).value;
      const double nested = joint_density_absorbing_nested(m, q).value;
      const double scale = std::max(1.0, std::abs(base));
      CHECK(std::abs(full - base) <= 1e-10 * scale);
      CHECK(std::abs(nested - base) <= 1e-10 * scale);
    }
  }
  IntensityModel open = phtest::two_state_chain(1.0);
  open.lambda(1, 0) = 0.4;
  open.lambda(1, 1) = -0.4;
  DensityQuery q;
  q.t = TimeVector{{1, 0.5}};
  CHECK_THROWS_AS(joint_density_absorbing(open, q), ValueError);
}

TEST_CASE("conditional density restarts from the observed state") {
  Rng rng(283);
  IntensityModel m = phtest::random_model(6, 2, rng);
  const Index start = m.target_union().complement().indices()[0];

  SUBCASE("zero observation time reduces to the unconditional density") {
    Observation obs;
    obs.state = start;
    TimeVector t{{1, 0.4}, {2, 1.1}};
    RowVector delta = RowVector::Zero(6);
    delta(start) = 1.0;
    CHECK(conditional_density(m, 0.0, obs, t).value ==
          doctest::Approx(joint_density(m, delta, t)).epsilon(1e-12));
  }
  SUBCASE("all targets visited yields the empty-product convention") {
    Observation obs;
    obs.state = start;
    obs.visited = {{1, 0.1}, {2, 0.2}};
    DensityValue v = conditional_density(m, 0.5, obs, TimeVector{});
    CHECK(v.value == 1.0);
    CHECK(v.dimension == 0);
  }
  SUBCASE("observed state inside an unvisited target is rejected") {
    Observation obs;
    obs.state = m.target(2).indices()[0];
    obs.visited = {{1, 0.1}};
    CHECK_THROWS_AS(conditional_density(m, 0.5, obs, TimeVector{{2, 0.3}}), ValueError);
  }
  SUBCASE("memorylessness of the exponential chain") {
    IntensityModel two = phtest::two_state_chain(1.1);
    Observation obs;
    obs.state = 0;
    for (double rest : {0.3, 1.0}) {
      const double cond = conditional_density(two, 2.0, obs, TimeVector{{1, rest}}).value;
      const double fresh = density_single(two, two.target(1), StateSet(2), rest);
      CHECK(cond == doctest::Approx(fresh).epsilon(1e-12));
    }
  }
}
