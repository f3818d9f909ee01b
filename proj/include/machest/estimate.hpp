#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "machest/channel.hpp"
#include "machest/grid.hpp"
#include "machest/measure.hpp"

namespace machest {

struct OmpConfig {
  double epsilon0 = 0.1;  // residual stop threshold, relative to ||v||
  int k_max = 32;         // iteration cap
  double ridge = 0.0;     // Gram regularization
};

/// Thrown when the Gram system of selected columns is rank deficient and no
/// ridge regularization was requested.
class singular_system_error : public std::runtime_error {
 public:
  explicit singular_system_error(const std::string& what)
      : std::runtime_error(what) {}
};

struct SparseEstimate {
  std::vector<std::int64_t> support;  // 1-based flat grid indices, distinct
  std::vector<Complex> coeffs;
  std::vector<double> residual_history;  // relative residual per iteration
  int grid_n = 0;
};

/// Channel estimate assembled from a sparse recovery: quantized angles from
/// the unflattened support with their least-squares coefficients.
struct EstimatedChannel {
  std::vector<PathComponent> paths;
};

/// Orthogonal matching pursuit with least-squares refit.
///
/// Per iteration: pick the unselected column most correlated with the
/// residual (ties toward the smallest flat index), refit all selected
/// coefficients by solving the Gram system, and update the residual. Stops
/// when ||r||/||v|| < epsilon0 or after k_max iterations. The Gram matrix
/// and Psi_A^H v are grown incrementally, one row/column per iteration.
inline SparseEstimate omp(const MeasurementOperator& op, const VectorXcd& v,
                          double p_t, const OmpConfig& cfg) {
  if (!(p_t > 0.0)) throw std::invalid_argument("omp: p_t must be > 0");
  if (!(cfg.epsilon0 > 0.0))
    throw std::invalid_argument("omp: epsilon0 must be > 0");
  if (cfg.k_max < 1) throw std::invalid_argument("omp: k_max must be >= 1");
  if (cfg.ridge < 0.0) throw std::invalid_argument("omp: ridge must be >= 0");
  if (v.size() != op.rows())
    throw std::invalid_argument("omp: measurement length mismatch");

  SparseEstimate est;
  est.grid_n = op.grid().size();
  const double vnorm = v.norm();
  if (vnorm == 0.0) return est;

  const std::int64_t ncols = op.cols();
  VectorXcd residual = v;
  MatrixXcd selected(op.rows(), 0);  // Psi_A
  MatrixXcd gram(0, 0);              // Psi_A^H Psi_A
  VectorXcd rhs(0);                  // Psi_A^H v
  VectorXcd solution;

  std::vector<bool> in_support(ncols, false);
  for (int k = 1; k <= cfg.k_max; ++k) {
    const VectorXcd corr = op.adjoint_apply(residual);
    std::int64_t best = -1;
    double best_mag = -1.0;
    for (std::int64_t n = 0; n < ncols; ++n) {
      if (in_support[n]) continue;
      const double mag = std::abs(corr(n));
      if (mag > best_mag) {
        best_mag = mag;
        best = n;
      }
    }
    if (best < 0) break;  // support exhausted
    in_support[best] = true;
    est.support.push_back(best + 1);

    const VectorXcd col = op.column(best + 1);
    selected.conservativeResize(Eigen::NoChange, k);
    selected.col(k - 1) = col;
    gram.conservativeResize(k, k);
    if (k > 1) {
      const VectorXcd cross = selected.leftCols(k - 1).adjoint() * col;
      gram.topRightCorner(k - 1, 1) = cross;
      gram.bottomLeftCorner(1, k - 1) = cross.adjoint();
    }
    gram(k - 1, k - 1) = Complex{col.squaredNorm(), 0.0};
    rhs.conservativeResize(k);
    rhs(k - 1) = col.dot(v);

    MatrixXcd system = gram;
    if (cfg.ridge > 0.0)
      system.diagonal().array() += Complex{cfg.ridge, 0.0};
    Eigen::ColPivHouseholderQR<MatrixXcd> qr(system);
    if (qr.rank() < k) {
      if (cfg.ridge == 0.0)
        throw singular_system_error(
            "omp: selected columns are rank deficient; set ridge > 0");
    }
    solution = qr.solve(rhs);
    residual = v - selected * solution;
    const double eps = residual.norm() / vnorm;
    est.residual_history.push_back(eps);
    if (eps < cfg.epsilon0) break;
  }

  est.coeffs.resize(est.support.size());
  const double scale = 1.0 / std::sqrt(p_t);
  for (std::size_t i = 0; i < est.support.size(); ++i)
    est.coeffs[i] = scale * solution(static_cast<std::int64_t>(i));
  return est;
}

/// Unflattens each support index into its grid coordinate and pairs the
/// quantized angles with the recovered coefficient.
inline EstimatedChannel extract_paths(const SparseEstimate& est,
                                      const AngleGrid& grid) {
  EstimatedChannel ec;
  ec.paths.reserve(est.support.size());
  for (std::size_t i = 0; i < est.support.size(); ++i) {
    const GridIndex4 gi = unflatten(est.support[i], grid.size());
    PathComponent p;
    p.aod = {grid.value(gi.ntx), grid.value(gi.nty)};
    p.aoa = {grid.value(gi.nrx), grid.value(gi.nry)};
    p.coeff = est.coeffs[i];
    ec.paths.push_back(p);
  }
  return ec;
}

/// Discrete-form channel response of the estimate; same evaluator as
/// channel_response, over grid-locked angles.
inline Complex reconstruct(const EstimatedChannel& ec, Position t,
                           Position r) {
  return channel_response(std::span<const PathComponent>(ec.paths), t, r);
}

/// Cross-checks the flat-index convention: evaluates a random sparse vector
/// once through the explicit measurement matrix and once by direct
/// discrete-channel summation over the unflattened support. Test plumbing,
/// not a production path.
inline bool vectorization_consistency_check(int n, Rng& rng, int trials = 10) {
  if (n < 2 || n > 4)
    throw std::invalid_argument(
        "vectorization_consistency_check: n must be in [2, 4]");
  const AngleGrid grid(n);
  const std::int64_t n4 =
      static_cast<std::int64_t>(n) * n * n * n;
  for (int trial = 0; trial < trials; ++trial) {
    MeasurementPlan plan = gen_random(2.0, 2 * n * n, rng);
    MeasurementOperator op(plan, grid, OperatorMode::Explicit);

    const int nnz = 1 + static_cast<int>(rng.uniform() * 3);
    VectorXcd u = VectorXcd::Zero(n4);
    std::vector<std::int64_t> support;
    for (int i = 0; i < nnz; ++i) {
      const auto idx =
          static_cast<std::int64_t>(rng.uniform() * static_cast<double>(n4));
      u(std::min(idx, n4 - 1)) += rng.complex_normal(1.0);
    }
    const VectorXcd via_matrix = op.matrix() * u;

    VectorXcd via_paths(op.rows());
    for (std::int64_t m = 0; m < op.rows(); ++m) {
      const auto& [t, r] = plan.pairs[m];
      Complex acc{0.0, 0.0};
      for (std::int64_t idx = 0; idx < n4; ++idx) {
        if (u(idx) == Complex{0.0, 0.0}) continue;
        const GridIndex4 gi = unflatten(idx + 1, n);
        const VirtualAngles aod{grid.value(gi.ntx), grid.value(gi.nty)};
        const VirtualAngles aoa{grid.value(gi.nrx), grid.value(gi.nry)};
        acc += field_response_phase(t, aod) * u(idx) *
               std::conj(field_response_phase(r, aoa));
      }
      via_paths(m) = acc;
    }

    const double ref = std::max(via_matrix.norm(), 1e-300);
    if ((via_matrix - via_paths).norm() / ref > 1e-10) return false;
  }
  return true;
}

inline void to_json(nlohmann::json& j, const SparseEstimate& est) {
  j = nlohmann::json{{"support", est.support},
                     {"coeffs", nlohmann::json::array()},
                     {"residuals", est.residual_history},
                     {"grid_n", est.grid_n}};
  for (const Complex& c : est.coeffs)
    j["coeffs"].push_back({c.real(), c.imag()});
}

inline void from_json(const nlohmann::json& j, SparseEstimate& est) {
  est.support = j.at("support").get<std::vector<std::int64_t>>();
  est.residual_history = j.at("residuals").get<std::vector<double>>();
  est.grid_n = j.at("grid_n").get<int>();
  est.coeffs.clear();
  for (const auto& jc : j.at("coeffs"))
    est.coeffs.emplace_back(jc[0].get<double>(), jc[1].get<double>());
}

}  // namespace machest
