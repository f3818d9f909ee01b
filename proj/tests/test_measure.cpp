#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "machest/measure.hpp"

using namespace machest;

namespace {

bool in_region(Position p, double region) {
  return std::abs(p.x) <= region / 2 + 1e-12 &&
         std::abs(p.y) <= region / 2 + 1e-12;
}

VectorXcd random_cvec(std::int64_t n, Rng& rng) {
  VectorXcd v(n);
  for (std::int64_t i = 0; i < n; ++i) v(i) = rng.complex_normal(1.0);
  return v;
}

// closed-form |(1/M) sum_m exp(j*2pi*x_m*delta)| for uniform positions
double dirichlet_mag(int m, double spacing, double delta) {
  const double num = std::sin(m * kTwoPi / 2 * spacing * delta);
  const double den = m * std::sin(kTwoPi / 2 * spacing * delta);
  if (std::abs(den) < 1e-300) return 1.0;
  return std::abs(num / den);
}

}  // namespace

TEST_CASE("upa setup") {
  MeasurementPlan p = gen_upa(2.0, 0.4);
  CHECK(p.pairs.size() == 1296);  // 36 positions per region
  MeasurementPlan p2 = gen_upa(2.0, 1.0);
  CHECK(p2.pairs.size() == 81);
  for (const auto& [t, r] : p.pairs) {
    CHECK(in_region(t, 2.0));
    CHECK(in_region(r, 2.0));
  }
  CHECK_THROWS_AS(gen_upa(2.0, 0.3), std::invalid_argument);
}

TEST_CASE("edge setup") {
  MeasurementPlan p = gen_edge(2.0, 0.4);
  CHECK(p.pairs.size() == 400);  // 20 positions per region
  for (const auto& [t, r] : p.pairs) {
    CHECK((std::abs(std::abs(t.x) - 1.0) < 1e-12 ||
           std::abs(std::abs(t.y) - 1.0) < 1e-12));
    CHECK((std::abs(std::abs(r.x) - 1.0) < 1e-12 ||
           std::abs(std::abs(r.y) - 1.0) < 1e-12));
  }
  // spacing = 2 leaves only the four corners
  MeasurementPlan corners = gen_edge(2.0, 2.0);
  CHECK(corners.pairs.size() == 16);
  CHECK_THROWS_AS(gen_edge(2.0, 0.3), std::invalid_argument);
}

TEST_CASE("cross setup") {
  MeasurementPlan p = gen_cross(2.0, 0.4);
  CHECK(p.pairs.size() == 144);  // 12 positions per region
  for (const auto& [t, r] : p.pairs) {
    CHECK((std::abs(t.x) < 1e-12 || std::abs(t.y) < 1e-12));
    CHECK((std::abs(r.x) < 1e-12 || std::abs(r.y) < 1e-12));
  }
  // degenerate lattice: spacing = R
  MeasurementPlan deg = gen_cross(2.0, 2.0);
  for (const auto& [t, r] : deg.pairs) {
    CHECK((std::abs(std::abs(t.x) - 1.0) < 1e-12 ||
           std::abs(std::abs(t.y) - 1.0) < 1e-12 ||
           (std::abs(t.x) < 1e-12 && std::abs(t.y) < 1e-12)));
  }
  CHECK_THROWS_AS(gen_cross(2.0, 0.3), std::invalid_argument);
}

TEST_CASE("random distribution setup") {
  Rng rng(1);
  MeasurementPlan p = gen_random(2.0, 144, rng);
  CHECK(p.pairs.size() == 144);
  for (const auto& [t, r] : p.pairs) {
    CHECK(in_region(t, 2.0));
    CHECK(in_region(r, 2.0));
  }
  Rng a(9), b(9);
  MeasurementPlan pa = gen_random(2.0, 50, a), pb = gen_random(2.0, 50, b);
  for (std::size_t i = 0; i < pa.pairs.size(); ++i) {
    CHECK(pa.pairs[i].first.x == pb.pairs[i].first.x);
    CHECK(pa.pairs[i].second.y == pb.pairs[i].second.y);
  }
  CHECK_THROWS_AS(gen_random(2.0, 0, rng), std::invalid_argument);

  Rng big(3);
  double mean_x = 0.0;
  const int draws = 100000;
  MeasurementPlan large = gen_random(2.0, draws, big);
  for (const auto& [t, r] : large.pairs) mean_x += t.x;
  CHECK(std::abs(mean_x / draws) < 0.02);

  MeasurementPlan one = gen_random(2.0, 1, rng);
  CHECK(one.pairs.size() == 1);
}

TEST_CASE("random walk setup") {
  Rng rng(2);
  MeasurementPlan one = gen_random_walk(2.0, 1, 0.5, rng);
  REQUIRE(one.pairs.size() == 1);
  CHECK(one.pairs[0].first.x == 0.0);
  CHECK(one.pairs[0].second.y == 0.0);

  // steps have the exact nominal norm except where a bounce occurred
  MeasurementPlan walk = gen_random_walk(2.0, 500, 0.5, rng);
  int exact = 0;
  for (std::size_t m = 1; m < walk.pairs.size(); ++m) {
    const double dx = walk.pairs[m].first.x - walk.pairs[m - 1].first.x;
    const double dy = walk.pairs[m].first.y - walk.pairs[m - 1].first.y;
    const double norm = std::hypot(dx, dy);
    if (std::abs(norm - 0.5) < 1e-12) ++exact;
    CHECK(in_region(walk.pairs[m].first, 2.0));
    CHECK(in_region(walk.pairs[m].second, 2.0));
  }
  CHECK(exact > 250);  // bounces are the minority for step << R

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r(seed);
    MeasurementPlan w = gen_random_walk(2.0, 10000, 0.5, r);
    for (const auto& [t, rx] : w.pairs) {
      REQUIRE(in_region(t, 2.0));
      REQUIRE(in_region(rx, 2.0));
    }
  }

  CHECK_THROWS_AS(gen_random_walk(2.0, 10, 2.5, rng), std::invalid_argument);
  CHECK_THROWS_AS(gen_random_walk(2.0, 0, 0.5, rng), std::invalid_argument);
}

TEST_CASE("operator apply on degenerate all-origin plan") {
  MeasurementPlan plan;
  plan.params.region = 2.0;
  for (int i = 0; i < 3; ++i) plan.pairs.push_back({{0, 0}, {0, 0}});
  AngleGrid grid(2);
  MeasurementOperator op(plan, grid);
  Rng rng(4);
  VectorXcd u = random_cvec(op.cols(), rng);
  VectorXcd v = op.apply(u);
  const Complex expected = u.sum();
  for (int m = 0; m < 3; ++m) CHECK(std::abs(v(m) - expected) < 1e-10);

  // adjoint of the all-ones measurement vector has every entry equal to M
  VectorXcd y = VectorXcd::Ones(3);
  VectorXcd a = op.adjoint_apply(y);
  for (std::int64_t n = 0; n < a.size(); ++n)
    CHECK(std::abs(a(n) - Complex{3, 0}) < 1e-10);

  // degenerate plan: all coherence entries are 1
  VectorXcd c = op.mutual_coherence_column(1);
  for (std::int64_t n = 0; n < c.size(); ++n)
    CHECK(std::abs(c(n) - Complex{1, 0}) < 1e-10);
}

TEST_CASE("explicit and matrix-free modes agree") {
  Rng rng(5);
  MeasurementPlan plan = gen_random(2.0, 16, rng);
  AngleGrid grid(4);
  MeasurementOperator free_op(plan, grid, OperatorMode::MatrixFree);
  MeasurementOperator exp_op(plan, grid, OperatorMode::Explicit);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXcd u = random_cvec(free_op.cols(), rng);
    VectorXcd va = free_op.apply(u);
    VectorXcd vb = exp_op.apply(u);
    CHECK((va - vb).norm() / vb.norm() < 1e-10);
  }
}

TEST_CASE("basis probes extract unit-modulus entries") {
  Rng rng(6);
  MeasurementPlan plan = gen_random(2.0, 8, rng);
  AngleGrid grid(3);
  MeasurementOperator op(plan, grid, OperatorMode::Explicit);
  for (std::int64_t n = 1; n <= op.cols(); n += 7) {
    VectorXcd e = VectorXcd::Zero(op.cols());
    e(n - 1) = 1.0;
    VectorXcd col = op.apply(e);
    CHECK((col - op.column(n)).norm() < 1e-12);
    CHECK((col - op.matrix().col(n - 1)).norm() < 1e-12);
    for (std::int64_t m = 0; m < col.size(); ++m)
      CHECK(std::abs(std::abs(col(m)) - 1.0) < 1e-12);
  }
  // row probe through the adjoint
  VectorXcd e0 = VectorXcd::Zero(op.rows());
  e0(2) = 1.0;
  VectorXcd row = op.adjoint_apply(e0);
  CHECK((row - op.matrix().row(2).adjoint()).norm() < 1e-10);
}

TEST_CASE("adjoint identity") {
  Rng rng(7);
  struct { int n, m; } cases[] = {{2, 4}, {4, 16}, {4, 64}};
  for (auto [n, m] : cases) {
    MeasurementPlan plan = gen_random(2.0, m, rng);
    AngleGrid grid(n);
    MeasurementOperator op(plan, grid);
    for (int trial = 0; trial < 100; ++trial) {
      VectorXcd u = random_cvec(op.cols(), rng);
      VectorXcd y = random_cvec(op.rows(), rng);
      const Complex lhs = y.dot(op.apply(u));   // <apply(u), y>
      const Complex rhs = op.adjoint_apply(y).dot(u);
      CHECK(std::abs(lhs - rhs) / std::abs(rhs) < 1e-10);
    }
  }
}

TEST_CASE("mutual coherence column against dense Gram oracle") {
  Rng rng(8);
  MeasurementPlan plan = gen_random(2.0, 16, rng);
  AngleGrid grid(4);
  MeasurementOperator op(plan, grid, OperatorMode::Explicit);
  const MatrixXcd gram =
      op.matrix().adjoint() * op.matrix() / double(op.rows());
  for (std::int64_t n_ref : {std::int64_t(1), std::int64_t(37),
                             op.cols()}) {
    VectorXcd c = op.mutual_coherence_column(n_ref);
    CHECK((c - gram.col(n_ref - 1)).norm() < 1e-10);
    CHECK(std::abs(c(n_ref - 1) - Complex{1, 0}) < 1e-12);
  }
  CHECK_THROWS_AS(op.mutual_coherence_column(0), std::invalid_argument);
}

TEST_CASE("mutual coherence is invariant to row permutation") {
  Rng rng(18);
  MeasurementPlan plan = gen_random(2.0, 24, rng);
  MeasurementPlan shuffled = plan;
  std::reverse(shuffled.pairs.begin(), shuffled.pairs.end());
  AngleGrid grid(3);
  MeasurementOperator a(plan, grid), b(shuffled, grid);
  CHECK((a.mutual_coherence_column(5) - b.mutual_coherence_column(5))
            .norm() < 1e-10);
}

TEST_CASE("effective 1-D coherence") {
  AngleGrid grid(24);
  std::vector<double> xs;
  for (int i = 0; i <= 5; ++i) xs.push_back(-1.0 + 0.4 * i);

  MatrixXcd c = effective_coherence_1d(xs, grid);
  for (int k = 0; k < 24; ++k)
    CHECK(std::abs(c(k, k) - Complex{1, 0}) < 1e-12);

  // off-diagonal magnitudes follow the Dirichlet kernel
  for (int k = 1; k <= 24; ++k) {
    for (int kp = 1; kp <= 24; ++kp) {
      const double delta = 2.0 * (kp - k) / 24;
      CHECK(std::abs(std::abs(c(k - 1, kp - 1)) -
                     dirichlet_mag(6, 0.4, delta)) < 1e-10);
    }
  }

  CHECK_THROWS_AS(effective_coherence_1d({}, grid), std::invalid_argument);
}

TEST_CASE("aliasing at full-wavelength spacing") {
  AngleGrid grid(24);
  std::vector<double> xs = {-1.0, 0.0, 1.0};  // spacing 1.0 lambda
  MatrixXcd c = effective_coherence_1d(xs, grid);
  // angular offset 1.0 = 12 grid steps; grating lobe reaches magnitude 1
  CHECK(std::abs(c(0, 12)) >= 0.99);
}

TEST_CASE("sampling-spacing criterion") {
  AngleGrid grid(24);
  // aliasing candidate: angular separation 2 (opposite ends of the grid)
  auto coherence_at_two = [&](double spacing, double region) {
    std::vector<double> xs;
    const int m = static_cast<int>(std::llround(region / spacing));
    for (int i = 0; i <= m; ++i) xs.push_back(-region / 2 + i * spacing);
    // closest representable separation to 2 on the grid is
    // grid(N) - grid(1) = 2 - 2/N; use the closed form directly at 2
    double worst = 0.0;
    MatrixXcd c = effective_coherence_1d(xs, grid);
    worst = std::abs(c(0, 23));
    return worst;
  };
  CHECK(coherence_at_two(0.4, 2.0) < 0.5);
  CHECK(coherence_at_two(0.25, 2.0) < 0.5);
  // exact integer-wavelength spacing brings the grating lobe near 1 at
  // angular offset 1.0 (half the grid)
  std::vector<double> xs = {-1.0, 0.0, 1.0};
  MatrixXcd c = effective_coherence_1d(xs, grid);
  CHECK(std::abs(c(0, 12)) > 0.99);
}

TEST_CASE("region-coverage criterion narrows the main lobe") {
  AngleGrid grid(24);
  auto half_power_width = [&](double span, double spacing) {
    std::vector<double> xs;
    const int m = static_cast<int>(std::llround(span / spacing));
    for (int i = 0; i <= m; ++i) xs.push_back(-span / 2 + i * spacing);
    MatrixXcd c = effective_coherence_1d(xs, grid);
    int k = 1;
    while (k < 24 && std::abs(c(0, k)) >= std::sqrt(0.5)) ++k;
    return k;
  };
  CHECK(half_power_width(2.0, 0.25) < half_power_width(1.0, 0.25));
}

TEST_CASE("kronecker consistency with the 1-D effective coherence") {
  // Tx moves along x only; Rx fixed at the reference point
  AngleGrid grid(4);
  std::vector<double> xs = {-1.0, -0.4, 0.1, 0.5, 0.9};
  MeasurementPlan plan;
  plan.params.region = 2.0;
  for (double x : xs) plan.pairs.push_back({{x, 0.0}, {0.0, 0.0}});
  MeasurementOperator op(plan, grid, OperatorMode::Explicit);

  const int n = grid.size();
  const std::int64_t n2 = std::int64_t(n) * n;
  // columns depend only on ntx: flat index N^2*(ntx-1)+1 carries ntx
  for (int ntx = 1; ntx <= n; ++ntx) {
    const std::int64_t base = n2 * (ntx - 1);
    VectorXcd ref = op.column(base + 1);
    for (std::int64_t off = 2; off <= 5; ++off)
      CHECK((op.column(base + off) - ref).norm() < 1e-12);
  }

  MatrixXcd eff = effective_coherence_1d(xs, grid);
  const MatrixXcd gram =
      op.matrix().adjoint() * op.matrix() / double(op.rows());
  for (int k = 1; k <= n; ++k) {
    for (int kp = 1; kp <= n; ++kp) {
      const Complex full = gram(n2 * (k - 1), n2 * (kp - 1));
      CHECK(std::abs(full - eff(k - 1, kp - 1)) < 1e-10);
    }
  }
}

TEST_CASE("ideal sinc coherence") {
  AngleGrid grid(24);
  CHECK(ideal_sinc_coherence(2.0, grid, 1) ==
        doctest::Approx(0.954929658551372).epsilon(1e-9));
  CHECK(ideal_sinc_coherence(2.0, grid, 6) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(ideal_sinc_coherence(2.0, grid, 0), std::invalid_argument);
  CHECK_THROWS_AS(ideal_sinc_coherence(2.0, grid, 24), std::invalid_argument);
}

TEST_CASE("plan CSV and JSON round trip") {
  Rng rng(77);
  MeasurementPlan plan = gen_random(2.0, 5, rng, 77);
  std::ostringstream oss;
  write_plan_csv(oss, plan);
  CHECK(oss.str().rfind("m,tx_x,tx_y,rx_x,rx_y\n", 0) == 0);

  nlohmann::json j = plan;
  auto back = j.get<MeasurementPlan>();
  CHECK(back.setup == plan.setup);
  REQUIRE(back.pairs.size() == plan.pairs.size());
  for (std::size_t i = 0; i < plan.pairs.size(); ++i) {
    CHECK(back.pairs[i].first.x == plan.pairs[i].first.x);
    CHECK(back.pairs[i].second.y == plan.pairs[i].second.y);
  }
}
