#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "machest/channel.hpp"
#include "machest/grid.hpp"
#include "machest/rng.hpp"

namespace machest {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

enum class Setup {
  UpaShape,
  EdgeOfRegion,
  CrossShape,
  RandomDistribution,
  RandomWalk,
  Custom,
};

inline const char* setup_name(Setup s) {
  switch (s) {
    case Setup::UpaShape: return "upa";
    case Setup::EdgeOfRegion: return "edge";
    case Setup::CrossShape: return "cross";
    case Setup::RandomDistribution: return "random";
    case Setup::RandomWalk: return "walk";
    case Setup::Custom: return "custom";
  }
  return "custom";
}

struct PlanParams {
  double region = 0.0;   // R, region is R x R lambda
  double spacing = 0.0;  // deterministic setups
  double step = 0.0;     // random walk
  std::uint64_t seed = 0;
};

/// Ordered list of (Tx position, Rx position) measurement pairs plus setup
/// provenance. All positions are in [-R/2, R/2]^2 in lambda units.
struct MeasurementPlan {
  std::vector<std::pair<Position, Position>> pairs;
  Setup setup = Setup::Custom;
  PlanParams params;

  std::size_t size() const { return pairs.size(); }
};

namespace detail {

inline std::int64_t require_integral_ratio(double num, double den,
                                           const char* what) {
  if (!(den > 0.0)) throw std::invalid_argument(std::string(what) +
                                                ": spacing must be > 0");
  const double q = num / den;
  const auto k = static_cast<std::int64_t>(std::llround(q));
  if (k < 1 || std::abs(q - static_cast<double>(k)) > 1e-9 * std::max(1.0, q))
    throw std::invalid_argument(std::string(what) +
                                ": spacing does not divide the region");
  return k;
}

inline MeasurementPlan cartesian_plan(std::vector<Position> region_set,
                                      Setup setup, PlanParams params) {
  MeasurementPlan plan;
  plan.setup = setup;
  plan.params = params;
  plan.pairs.reserve(region_set.size() * region_set.size());
  for (const Position& t : region_set)
    for (const Position& r : region_set) plan.pairs.emplace_back(t, r);
  return plan;
}

}  // namespace detail

/// UPA-shape setup: (R/spacing + 1)^2 lattice over the full region per
/// antenna; the plan is the Tx x Rx Cartesian product.
inline MeasurementPlan gen_upa(double region, double spacing) {
  const std::int64_t k =
      detail::require_integral_ratio(region, spacing, "gen_upa");
  std::vector<Position> pts;
  pts.reserve((k + 1) * (k + 1));
  for (std::int64_t ix = 0; ix <= k; ++ix)
    for (std::int64_t iy = 0; iy <= k; ++iy)
      pts.push_back({-region / 2 + ix * spacing, -region / 2 + iy * spacing});
  return detail::cartesian_plan(std::move(pts), Setup::UpaShape,
                                {region, spacing, 0.0, 0});
}

/// Edge-of-region setup: 4R/spacing points uniformly spaced along the square
/// boundary, corners counted once.
inline MeasurementPlan gen_edge(double region, double spacing) {
  const std::int64_t count =
      detail::require_integral_ratio(4.0 * region, spacing, "gen_edge");
  const double half = region / 2;
  std::vector<Position> pts;
  pts.reserve(count);
  for (std::int64_t i = 0; i < count; ++i) {
    const double s = i * spacing;
    Position p;
    if (s < region) {
      p = {-half + s, -half};
    } else if (s < 2 * region) {
      p = {half, -half + (s - region)};
    } else if (s < 3 * region) {
      p = {half - (s - 2 * region), half};
    } else {
      p = {-half, half - (s - 3 * region)};
    }
    pts.push_back(p);
  }
  return detail::cartesian_plan(std::move(pts), Setup::EdgeOfRegion,
                                {region, spacing, 0.0, 0});
}

/// Cross-shape setup: the uniform lattice w_i = -R/2 + i*spacing on each
/// coordinate axis, origin counted once when it falls on the lattice.
inline MeasurementPlan gen_cross(double region, double spacing) {
  const std::int64_t k =
      detail::require_integral_ratio(region, spacing, "gen_cross");
  std::vector<Position> pts;
  for (std::int64_t i = 0; i <= k; ++i)
    pts.push_back({-region / 2 + i * spacing, 0.0});
  for (std::int64_t i = 0; i <= k; ++i) {
    const double w = -region / 2 + i * spacing;
    if (std::abs(w) < 1e-12 * region) continue;  // origin counted once

    pts.push_back({0.0, w});
  }
  return detail::cartesian_plan(std::move(pts), Setup::CrossShape,
                                {region, spacing, 0.0, 0});
}

/// Random distribution setup: all four coordinates of each pair i.i.d.
/// uniform on [-R/2, R/2].
inline MeasurementPlan gen_random(double region, int measurements, Rng& rng,
                                  std::uint64_t provenance_seed = 0) {
  if (measurements < 1)
    throw std::invalid_argument("gen_random: M must be >= 1");
  MeasurementPlan plan;
  plan.setup = Setup::RandomDistribution;
  plan.params = {region, 0.0, 0.0, provenance_seed};
  const double half = region / 2;
  plan.pairs.reserve(measurements);
  for (int m = 0; m < measurements; ++m) {
    Position t{rng.uniform(-half, half), rng.uniform(-half, half)};
    Position r{rng.uniform(-half, half), rng.uniform(-half, half)};
    plan.pairs.emplace_back(t, r);
  }
  return plan;
}

namespace detail {

/// Per-coordinate boundary reflection, re-applied until in-region.
inline double bounce_back(double x, double half) {
  while (x > half || x < -half) {
    if (x > half) x = 2 * half - x;
    else x = -2 * half - x;
  }
  return x;
}

}  // namespace detail

/// Random walk setup: both antennas start at the origin and advance by a
/// fixed step in an independently uniform direction; out-of-region
/// coordinates bounce back off the boundary.
inline MeasurementPlan gen_random_walk(double region, int measurements,
                                       double step, Rng& rng,
                                       std::uint64_t provenance_seed = 0) {
  if (measurements < 1)
    throw std::invalid_argument("gen_random_walk: M must be >= 1");
  if (!(step > 0.0) || step > region)
    throw std::invalid_argument("gen_random_walk: step must be in (0, R]");
  MeasurementPlan plan;
  plan.setup = Setup::RandomWalk;
  plan.params = {region, 0.0, step, provenance_seed};
  const double half = region / 2;
  Position t{0.0, 0.0}, r{0.0, 0.0};
  plan.pairs.emplace_back(t, r);
  for (int m = 1; m < measurements; ++m) {
    const double at = rng.uniform(0.0, kTwoPi);
    t.x = detail::bounce_back(t.x + step * std::cos(at), half);
    t.y = detail::bounce_back(t.y + step * std::sin(at), half);
    const double ar = rng.uniform(0.0, kTwoPi);
    r.x = detail::bounce_back(r.x + step * std::cos(ar), half);
    r.y = detail::bounce_back(r.y + step * std::sin(ar), half);
    plan.pairs.emplace_back(t, r);
  }
  return plan;
}

enum class OperatorMode { Explicit, MatrixFree };

/// The measurement operator Psi in C^{M x N^4} whose (m, n) entry is
///   exp(j*2pi*(xt*phi_ntx + yt*theta_nty)) * exp(-j*2pi*(xr*phi_nrx + yr*theta_nry))
/// with (ntx, nty, nrx, nry) the unflattened grid coordinate of column n.
///
/// Every row factors into a Kronecker product of two length-N^2 vectors
/// (Tx side and Rx side), so apply/adjoint_apply are evaluated as dense
/// products against the M x N^2 factor matrices without materializing Psi.
/// Explicit mode additionally stores Psi for small problems.
class MeasurementOperator {
 public:
  MeasurementOperator(MeasurementPlan plan, AngleGrid grid,
                      OperatorMode mode = OperatorMode::MatrixFree)
      : plan_(std::move(plan)), grid_(grid), mode_(mode) {
    if (plan_.pairs.empty())
      throw std::invalid_argument("MeasurementOperator: empty plan");
    const int n = grid_.size();
    const std::int64_t m = static_cast<std::int64_t>(plan_.pairs.size());
    const std::int64_t n2 = static_cast<std::int64_t>(n) * n;
    gmat_.resize(m, n2);
    fmat_.resize(m, n2);
    for (std::int64_t row = 0; row < m; ++row) {
      const auto& [t, r] = plan_.pairs[row];
      for (int nty = 1; nty <= n; ++nty) {
        for (int ntx = 1; ntx <= n; ++ntx) {
          const std::int64_t a = static_cast<std::int64_t>(n) * (nty - 1) +
                                 (ntx - 1);
          gmat_(row, a) = field_response_phase(
              t, {grid_.value(ntx), grid_.value(nty)});
        }
      }
      for (int nry = 1; nry <= n; ++nry) {
        for (int nrx = 1; nrx <= n; ++nrx) {
          const std::int64_t b = static_cast<std::int64_t>(n) * (nry - 1) +
                                 (nrx - 1);
          fmat_(row, b) = field_response_phase(
              r, {grid_.value(nrx), grid_.value(nry)});
        }
      }
    }
    if (mode_ == OperatorMode::Explicit) {
      if (m * n2 * n2 > (std::int64_t{1} << 26))
        throw std::invalid_argument(
            "MeasurementOperator: problem too large for Explicit mode "
            "(M*N^4 > 2^26)");
      psi_.resize(m, n2 * n2);
      for (std::int64_t a = 0; a < n2; ++a)
        for (std::int64_t b = 0; b < n2; ++b)
          psi_.col(a * n2 + b) =
              gmat_.col(a).cwiseProduct(fmat_.col(b).conjugate());
    }
  }

  const MeasurementPlan& plan() const { return plan_; }
  const AngleGrid& grid() const { return grid_; }
  OperatorMode mode() const { return mode_; }
  std::int64_t rows() const { return gmat_.rows(); }
  std::int64_t cols() const { return gmat_.cols() * fmat_.cols(); }

  /// Psi * u.
  VectorXcd apply(const VectorXcd& u) const {
    if (u.size() != cols())
      throw std::invalid_argument("apply: dimension mismatch");
    if (mode_ == OperatorMode::Explicit) return psi_ * u;
    const std::int64_t n2 = gmat_.cols();
    Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        umat(u.data(), n2, n2);
    MatrixXcd partial = gmat_ * umat;  // M x N^2
    return partial.cwiseProduct(fmat_.conjugate()).rowwise().sum();
  }

  /// Psi^H * y.
  VectorXcd adjoint_apply(const VectorXcd& y) const {
    if (y.size() != rows())
      throw std::invalid_argument("adjoint_apply: dimension mismatch");
    if (mode_ == OperatorMode::Explicit) return psi_.adjoint() * y;
    const std::int64_t n2 = gmat_.cols();
    MatrixXcd omat = gmat_.adjoint() * (y.asDiagonal() * fmat_);  // N^2 x N^2
    VectorXcd out(n2 * n2);
    Eigen::Map<Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>(out.data(), n2, n2) = omat;
    return out;
  }

  /// Column n (1-based flat index) of Psi.
  VectorXcd column(std::int64_t n) const {
    if (n < 1 || n > cols())
      throw std::invalid_argument("column: index out of [1, N^4]");
    const std::int64_t n2 = gmat_.cols();
    const std::int64_t a = (n - 1) / n2;
    const std::int64_t b = (n - 1) % n2;
    return gmat_.col(a).cwiseProduct(fmat_.col(b).conjugate());
  }

  /// Column n_ref of the mutual coherence C = (1/M) Psi^H Psi,
  /// computed matrix-free.
  VectorXcd mutual_coherence_column(std::int64_t n_ref) const {
    return adjoint_apply(column(n_ref)) / static_cast<double>(rows());
  }

  /// Materialized Psi (Explicit mode only).
  const MatrixXcd& matrix() const {
    if (mode_ != OperatorMode::Explicit)
      throw std::logic_error("matrix(): operator is matrix-free");
    return psi_;
  }

 private:
  MeasurementPlan plan_;
  AngleGrid grid_;
  OperatorMode mode_;
  MatrixXcd gmat_;  // M x N^2 Tx factors
  MatrixXcd fmat_;  // M x N^2 Rx factors (unconjugated)
  MatrixXcd psi_;   // Explicit mode only
};

/// Effective N x N coherence over a set of 1-D Tx x-coordinates:
///   [C]_{k,k'} = (1/M) sum_m exp(j*2pi*x_m*(grid(k') - grid(k))).
inline MatrixXcd effective_coherence_1d(const std::vector<double>& positions,
                                        const AngleGrid& grid) {
  if (positions.empty())
    throw std::invalid_argument("effective_coherence_1d: empty positions");
  const int n = grid.size();
  MatrixXcd c = MatrixXcd::Zero(n, n);
  for (double x : positions) {
    for (int k = 1; k <= n; ++k) {
      for (int kp = 1; kp <= n; ++kp) {
        const double phase = kTwoPi * x * (grid.value(kp) - grid.value(k));
        c(k - 1, kp - 1) += Complex{std::cos(phase), std::sin(phase)};
      }
    }
  }
  return c / static_cast<double>(positions.size());
}

/// Ideal coherence under continuous sampling of the full region:
/// sinc(2*pi*R*p/N) with the unnormalized sinc(x) = sin(x)/x.
inline double ideal_sinc_coherence(double region, const AngleGrid& grid,
                                   int p) {
  if (p < 1 || p > grid.size() - 1)
    throw std::invalid_argument("ideal_sinc_coherence: p out of [1, N-1]");
  const double x = kTwoPi * region * p / grid.size();
  if (x == 0.0) return 1.0;
  return std::sin(x) / x;
}

inline void write_plan_csv(std::ostream& os, const MeasurementPlan& plan) {
  os << "m,tx_x,tx_y,rx_x,rx_y\n";
  char buf[160];
  for (std::size_t m = 0; m < plan.pairs.size(); ++m) {
    const auto& [t, r] = plan.pairs[m];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", m + 1,
                  t.x, t.y, r.x, r.y);
    os << buf;
  }
}

inline void to_json(nlohmann::json& j, const MeasurementPlan& plan) {
  j = nlohmann::json{{"setup", setup_name(plan.setup)},
                     {"region", plan.params.region},
                     {"spacing", plan.params.spacing},
                     {"step", plan.params.step},
                     {"seed", plan.params.seed},
                     {"pairs", nlohmann::json::array()}};
  for (const auto& [t, r] : plan.pairs)
    j["pairs"].push_back({t.x, t.y, r.x, r.y});
}

inline void from_json(const nlohmann::json& j, MeasurementPlan& plan) {
  const std::string name = j.at("setup").get<std::string>();
  plan.setup = Setup::Custom;
  for (Setup s : {Setup::UpaShape, Setup::EdgeOfRegion, Setup::CrossShape,
                  Setup::RandomDistribution, Setup::RandomWalk})
    if (name == setup_name(s)) plan.setup = s;
  plan.params.region = j.at("region").get<double>();
  plan.params.spacing = j.value("spacing", 0.0);
  plan.params.step = j.value("step", 0.0);
  plan.params.seed = j.value("seed", std::uint64_t{0});
  plan.pairs.clear();
  for (const auto& jp : j.at("pairs")) {
    plan.pairs.emplace_back(
        Position{jp[0].get<double>(), jp[1].get<double>()},
        Position{jp[2].get<double>(), jp[3].get<double>()});
  }
}

}  // namespace machest
