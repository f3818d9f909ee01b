#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "machest/channel.hpp"
#include "machest/estimate.hpp"

namespace machest {

/// Uniform D x D evaluation lattice over [-R/2, R/2]^2; endpoints included.
struct SampleGrid {
  int d = 51;
  double region = 2.0;

  Position position(int ix, int iy) const {
    const double step = region / (d - 1);
    return {-region / 2 + ix * step, -region / 2 + iy * step};
  }
  int points() const { return d * d; }
  Position flat_position(int idx) const { return position(idx / d, idx % d); }
};

struct ErrorReport {
  double nmse = 0.0;
  double angle_error = 0.0;
  double coeff_error = 0.0;
  std::vector<std::pair<int, int>> matched_pairs;  // (true idx, est idx)
};

namespace detail {

/// Per-path phase factors over the whole lattice:
/// tx(t_idx, l) = coeff_l * exp(j*2pi*(t . aod_l)),
/// rx(r_idx, l) = exp(-j*2pi*(r . aoa_l)); the response matrix is tx * rx^T.
inline std::pair<MatrixXcd, MatrixXcd> lattice_factors(
    std::span<const PathComponent> paths, const SampleGrid& sg) {
  const int pts = sg.points();
  const auto num = static_cast<std::int64_t>(paths.size());
  MatrixXcd tx(pts, num), rx(pts, num);
  for (std::int64_t l = 0; l < num; ++l) {
    const PathComponent& p = paths[l];
    for (int i = 0; i < pts; ++i) {
      const Position pos = sg.flat_position(i);
      tx(i, l) = p.coeff * field_response_phase(pos, p.aod);
      rx(i, l) = std::conj(field_response_phase(pos, p.aoa));
    }
  }
  return {std::move(tx), std::move(rx)};
}

/// Rectangular assignment (rows <= cols) minimizing total cost; returns the
/// column assigned to each row.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw std::logic_error("hungarian: rows must be <= cols");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) assign[p[j] - 1] = j - 1;
  return assign;
}

inline double angle_distance_sq(const PathComponent& a,
                                const PathComponent& b) {
  const double d1 = a.aod.phi - b.aod.phi;
  const double d2 = a.aod.theta - b.aod.theta;
  const double d3 = a.aoa.phi - b.aoa.phi;
  const double d4 = a.aoa.theta - b.aoa.theta;
  return d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4;
}

// Squared-error charge for a true path left unmatched: 1 per angle slot.
inline constexpr double kUnmatchedAngleCost = 4.0;

/// Optimal injective matching of true paths to estimated atoms by total
/// squared 4-angle distance. Dummy columns at the unmatched penalty let a
/// true path stay unmatched when every atom is farther than the penalty.
inline std::vector<int> match_paths(std::span<const PathComponent> truth,
                                    std::span<const PathComponent> est) {
  const int lt = static_cast<int>(truth.size());
  const int le = static_cast<int>(est.size());
  Eigen::MatrixXd cost(lt, le + lt);
  for (int i = 0; i < lt; ++i) {
    for (int j = 0; j < le; ++j)
      cost(i, j) = angle_distance_sq(truth[i], est[j]);
    for (int j = le; j < le + lt; ++j) cost(i, j) = kUnmatchedAngleCost;
  }
  std::vector<int> assign = hungarian(cost);
  for (int& a : assign)
    if (a >= le) a = -1;  // dummy column: unmatched
  return assign;
}

}  // namespace detail

/// Normalized Frobenius error ||H - Hhat||_F^2 / ||H||_F^2 between the true
/// and reconstructed region-to-region response matrices over the sample
/// lattice. Accumulated block-streamingly; the D^2 x D^2 matrices are never
/// materialized.
inline double nmse(const ChannelRealization& truth, const EstimatedChannel& est,
                   const SampleGrid& sg) {
  if (sg.d < 2) throw std::invalid_argument("nmse: D must be >= 2");
  const auto [ttx, trx] = detail::lattice_factors(truth.paths, sg);
  const auto [etx, erx] = detail::lattice_factors(est.paths, sg);
  const int pts = sg.points();
  const int block = std::min(pts, 256);
  double num = 0.0, den = 0.0;
  for (int start = 0; start < pts; start += block) {
    const int rows = std::min(block, pts - start);
    const MatrixXcd h = ttx.middleRows(start, rows) * trx.transpose();
    den += h.squaredNorm();
    if (est.paths.empty()) {
      num += h.squaredNorm();
    } else {
      const MatrixXcd hhat = etx.middleRows(start, rows) * erx.transpose();
      num += (h - hhat).squaredNorm();
    }
  }
  if (den == 0.0)
    throw std::domain_error("nmse: true channel has zero energy on the grid");
  return num / den;
}

/// Mean squared virtual-angle error over the L true paths under the optimal
/// injective matching; an unmatched true path is charged squared error 1 per
/// angle slot.
inline double angle_error(const ChannelRealization& truth,
                          const EstimatedChannel& est) {
  if (truth.paths.empty())
    throw std::invalid_argument("angle_error: truth must have L >= 1 paths");
  const std::vector<int> assign = detail::match_paths(truth.paths, est.paths);
  double total = 0.0;
  for (std::size_t i = 0; i < truth.paths.size(); ++i) {
    total += assign[i] < 0 ? detail::kUnmatchedAngleCost
                           : detail::angle_distance_sq(truth.paths[i],
                                                       est.paths[assign[i]]);
  }
  return total / (4.0 * static_cast<double>(truth.paths.size()));
}

/// NMSE of the path coefficients under the same matching as angle_error.
/// Unmatched true paths count against sigma_hat = 0; energy of surplus
/// estimated atoms is added to the numerator.
inline double coeff_error(const ChannelRealization& truth,
                          const EstimatedChannel& est) {
  if (truth.paths.empty())
    throw std::invalid_argument("coeff_error: truth must have L >= 1 paths");
  double den = 0.0;
  for (const PathComponent& p : truth.paths) den += std::norm(p.coeff);
  if (den == 0.0)
    throw std::domain_error("coeff_error: zero-energy true coefficients");
  const std::vector<int> assign = detail::match_paths(truth.paths, est.paths);
  std::vector<bool> est_used(est.paths.size(), false);
  double num = 0.0;
  for (std::size_t i = 0; i < truth.paths.size(); ++i) {
    if (assign[i] < 0) {
      num += std::norm(truth.paths[i].coeff);
    } else {
      num += std::norm(truth.paths[i].coeff - est.paths[assign[i]].coeff);
      est_used[assign[i]] = true;
    }
  }
  for (std::size_t j = 0; j < est.paths.size(); ++j)
    if (!est_used[j]) num += std::norm(est.paths[j].coeff);
  return num / den;
}

/// Full per-trial error report under one shared matching.
inline ErrorReport compute_errors(const ChannelRealization& truth,
                                  const EstimatedChannel& est,
                                  const SampleGrid& sg) {
  ErrorReport rep;
  rep.nmse = nmse(truth, est, sg);
  rep.angle_error = angle_error(truth, est);
  rep.coeff_error = coeff_error(truth, est);
  const std::vector<int> assign = detail::match_paths(truth.paths, est.paths);
  for (std::size_t i = 0; i < assign.size(); ++i)
    if (assign[i] >= 0) rep.matched_pairs.emplace_back(static_cast<int>(i),
                                                       assign[i]);
  return rep;
}

struct SnrResult {
  double snr = 0.0;
  Position t, r;
  int t_index = 0;  // flat lattice indices of the maximizer
  int r_index = 0;
};

/// Exhaustive SNR maximization |h(t,r)|^2 * p_t / delta^2 over the sample
/// lattice; ties resolve to the lexicographically smallest index pair.
inline SnrResult max_snr(std::span<const PathComponent> paths,
                         const SampleGrid& sg, const NoiseModel& noise) {
  if (sg.d < 2) throw std::invalid_argument("max_snr: D must be >= 2");
  if (!(noise.noise_power > 0.0))
    throw std::invalid_argument("max_snr: noise_power must be > 0");
  const auto [tx, rx] = detail::lattice_factors(paths, sg);
  const int pts = sg.points();
  SnrResult best;
  double best_mag = -1.0;
  const int block = std::min(pts, 256);
  for (int start = 0; start < pts; start += block) {
    const int rows = std::min(block, pts - start);
    const MatrixXcd h = tx.middleRows(start, rows) * rx.transpose();
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < pts; ++j) {
        const double mag = std::norm(h(i, j));
        if (mag > best_mag) {
          best_mag = mag;
          best.t_index = start + i;
          best.r_index = j;
        }
      }
    }
  }
  best.t = sg.flat_position(best.t_index);
  best.r = sg.flat_position(best.r_index);
  best.snr = best_mag * noise.transmit_power / noise.noise_power;
  return best;
}

inline SnrResult max_snr(const ChannelRealization& ch, const SampleGrid& sg,
                         const NoiseModel& noise) {
  return max_snr(std::span<const PathComponent>(ch.paths), sg, noise);
}

/// SNR achieved under estimated CSI: the lattice argmax of the estimated
/// channel, scored under the true channel.
inline double achieved_snr(const EstimatedChannel& est,
                           const ChannelRealization& truth,
                           const SampleGrid& sg, const NoiseModel& noise) {
  if (est.paths.empty()) {
    // no estimate: the antennas stay at the reference points
    const Complex h = channel_response(truth, {0, 0}, {0, 0});
    return std::norm(h) * noise.transmit_power / noise.noise_power;
  }
  const SnrResult pick =
      max_snr(std::span<const PathComponent>(est.paths), sg, noise);
  const Complex h = channel_response(truth, pick.t, pick.r);
  return std::norm(h) * noise.transmit_power / noise.noise_power;
}

/// Fixed-position-antenna baseline: both antennas at the reference points.
inline double fpa_snr(const ChannelRealization& truth,
                      const NoiseModel& noise) {
  if (!(noise.noise_power > 0.0))
    throw std::invalid_argument("fpa_snr: noise_power must be > 0");
  const Complex h = channel_response(truth, {0, 0}, {0, 0});
  return std::norm(h) * noise.transmit_power / noise.noise_power;
}

}  // namespace machest
