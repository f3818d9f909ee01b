#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "machest/channel.hpp"
#include "machest/estimate.hpp"
#include "machest/grid.hpp"
#include "machest/measure.hpp"
#include "machest/metrics.hpp"
#include "machest/rng.hpp"

namespace machest {

struct ExperimentConfig {
  double region = 2.0;
  int grid_n = 24;
  int paths = 3;
  double snr_db = 20.0;
  double epsilon0 = 0.1;
  int trials = 100;
  std::uint64_t master_seed = 1;
  Setup setup = Setup::RandomDistribution;
  double spacing = 0.0;  // 0: derive from measurements for deterministic setups
  double step = 0.5;
  int measurements = 144;
  int metric_d = 51;
  int k_max = 32;
  double ridge = 0.0;
  int workers = 1;

  void validate() const {
    if (!(region > 0)) throw std::invalid_argument("config: region <= 0");
    if (grid_n < 2) throw std::invalid_argument("config: grid_n < 2");
    if (paths < 1) throw std::invalid_argument("config: paths < 1");
    if (!(epsilon0 > 0)) throw std::invalid_argument("config: epsilon0 <= 0");
    if (trials < 1) throw std::invalid_argument("config: trials < 1");
    if (measurements < 1)
      throw std::invalid_argument("config: measurements < 1");
    if (metric_d < 2) throw std::invalid_argument("config: metric_d < 2");
    if (k_max < 1) throw std::invalid_argument("config: k_max < 1");
    if (workers < 1) throw std::invalid_argument("config: workers < 1");
  }

  NoiseModel noise() const {
    return {1.0, std::pow(10.0, -snr_db / 10.0)};
  }
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  int measurements = 0;
  int grid_n = 0;
  double snr_db = 0.0;
  Setup setup = Setup::Custom;
  double nmse = 0.0;
  double angle_error = 0.0;
  double coeff_error = 0.0;
  double achieved_snr = 0.0;
  double max_snr = 0.0;
  double fpa_snr = 0.0;
  int omp_iterations = 0;
  bool empty_estimate = false;
  double wall_ms = 0.0;
  bool failed = false;
  std::string error;
};

/// Spacing implied by a measurement budget M for the deterministic setups.
inline double spacing_for(Setup setup, double region, int measurements) {
  const double m = measurements;
  switch (setup) {
    case Setup::UpaShape:
      return region / (std::sqrt(std::sqrt(m)) - 1.0);
    case Setup::EdgeOfRegion:
      return 4.0 * region / std::sqrt(m);
    case Setup::CrossShape:
      return 2.0 * region / (std::sqrt(m) - 2.0);
    default:
      throw std::invalid_argument("spacing_for: setup is not deterministic");
  }
}

/// Builds the plan for a config. Deterministic setups ignore rng and produce
/// the same plan for every trial; random setups consume it.
inline MeasurementPlan make_plan(const ExperimentConfig& cfg, Rng& rng,
                                 std::uint64_t provenance_seed) {
  switch (cfg.setup) {
    case Setup::UpaShape:
      return gen_upa(cfg.region, cfg.spacing > 0
                                     ? cfg.spacing
                                     : spacing_for(cfg.setup, cfg.region,
                                                   cfg.measurements));
    case Setup::EdgeOfRegion:
      return gen_edge(cfg.region, cfg.spacing > 0
                                      ? cfg.spacing
                                      : spacing_for(cfg.setup, cfg.region,
                                                    cfg.measurements));
    case Setup::CrossShape:
      return gen_cross(cfg.region, cfg.spacing > 0
                                       ? cfg.spacing
                                       : spacing_for(cfg.setup, cfg.region,
                                                     cfg.measurements));
    case Setup::RandomDistribution:
      return gen_random(cfg.region, cfg.measurements, rng, provenance_seed);
    case Setup::RandomWalk:
      return gen_random_walk(cfg.region, cfg.measurements, cfg.step, rng,
                             provenance_seed);
    default:
      throw std::invalid_argument("make_plan: unsupported setup");
  }
}

/// One seeded Monte Carlo trial: channel, plan, measurements, OMP, metrics.
/// Module errors are captured into a failed record instead of propagating.
inline TrialRecord run_trial(const ExperimentConfig& cfg, int axis_index,
                             int trial_idx) {
  TrialRecord rec;
  rec.trial = trial_idx;
  rec.grid_n = cfg.grid_n;
  rec.snr_db = cfg.snr_db;
  rec.setup = cfg.setup;
  rec.seed = mix_seed(cfg.master_seed, static_cast<std::uint64_t>(axis_index),
                      static_cast<std::uint64_t>(trial_idx));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Rng chan_rng(mix_seed(rec.seed, 1));
    Rng plan_rng(mix_seed(rec.seed, 2));
    Rng noise_rng(mix_seed(rec.seed, 3));

    const ChannelRealization truth =
        random_channel(cfg.paths, chan_rng, rec.seed);
    const MeasurementPlan plan = make_plan(cfg, plan_rng, rec.seed);
    rec.measurements = static_cast<int>(plan.size());

    const NoiseModel noise = cfg.noise();
    VectorXcd v(plan.size());
    for (std::size_t m = 0; m < plan.size(); ++m)
      v(static_cast<std::int64_t>(m)) = measure(
          truth, plan.pairs[m].first, plan.pairs[m].second, noise, noise_rng);

    const AngleGrid grid(cfg.grid_n);
    const MeasurementOperator op(plan, grid, OperatorMode::MatrixFree);
    const OmpConfig omp_cfg{cfg.epsilon0, cfg.k_max, cfg.ridge};
    const SparseEstimate est = omp(op, v, noise.transmit_power, omp_cfg);
    rec.omp_iterations = static_cast<int>(est.support.size());
    rec.empty_estimate = est.support.empty();
    const EstimatedChannel ec = extract_paths(est, grid);

    const SampleGrid sg{cfg.metric_d, cfg.region};
    rec.nmse = nmse(truth, ec, sg);
    rec.angle_error = angle_error(truth, ec);
    rec.coeff_error = coeff_error(truth, ec);
    rec.max_snr = max_snr(truth, sg, noise).snr;
    rec.achieved_snr = achieved_snr(ec, truth, sg, noise);
    rec.fpa_snr = fpa_snr(truth, noise);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

enum class SweepAxis { M, N, Snr };

inline const char* axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::M: return "M";
    case SweepAxis::N: return "N";
    case SweepAxis::Snr: return "SNR";
  }
  return "?";
}

inline ExperimentConfig apply_axis(ExperimentConfig cfg, SweepAxis axis,
                                   double value) {
  switch (axis) {
    case SweepAxis::M:
      cfg.measurements = static_cast<int>(std::llround(value));
      cfg.spacing = 0.0;  // deterministic setups re-derive from M
      break;
    case SweepAxis::N:
      cfg.grid_n = static_cast<int>(std::llround(value));
      break;
    case SweepAxis::Snr:
      cfg.snr_db = value;
      break;
  }
  return cfg;
}

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Runs f(i) for i in [0, count) on cfg-many workers; results land in a
/// preallocated slot per index so ordering is deterministic.
template <typename F>
void parallel_for(int count, int workers, F&& f) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  const int w = std::min(workers, count);
  pool.reserve(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += w) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct SweepResult {
  std::vector<TrialRecord> records;  // (value-major, trial-minor) order
  int failed = 0;
};

inline constexpr const char* kSweepCsvHeader =
    "axis,value,trial,seed,nmse,angle_error,coeff_error,achieved_snr,"
    "max_snr,fpa_snr,omp_iters,wall_ms";

/// Runs trials for every (value, trial) cell of a one-axis sweep, emits one
/// CSV row per trial plus a per-value aggregate file. wall_ms is written
/// only when timing is requested so identical runs produce identical bytes.
inline SweepResult sweep(const ExperimentConfig& cfg, SweepAxis axis,
                         const std::vector<double>& values,
                         std::ostream& rows_csv, std::ostream& agg_csv,
                         bool timing = false) {
  cfg.validate();
  if (values.empty()) throw std::invalid_argument("sweep: empty values");

  SweepResult result;
  const int per_value = cfg.trials;
  const int total = static_cast<int>(values.size()) * per_value;
  result.records.resize(total);
  detail::parallel_for(total, cfg.workers, [&](int i) {
    const int vi = i / per_value;
    const int trial = i % per_value;
    const ExperimentConfig c = apply_axis(cfg, axis, values[vi]);
    result.records[i] = run_trial(c, vi, trial);
  });

  rows_csv << kSweepCsvHeader << '\n';
  agg_csv << "axis,value,trials,failed,empty_estimates,mean_nmse,"
             "mean_nmse_nonempty,mean_angle_error,mean_coeff_error,"
             "mean_achieved_snr,mean_max_snr,mean_fpa_snr\n";
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    double s_nmse = 0, s_nmse_ne = 0, s_ang = 0, s_coe = 0;
    double s_ach = 0, s_max = 0, s_fpa = 0;
    int ok = 0, failed = 0, nonempty = 0;
    for (int trial = 0; trial < per_value; ++trial) {
      const TrialRecord& r =
          result.records[vi * static_cast<std::size_t>(per_value) + trial];
      rows_csv << axis_name(axis) << ',' << detail::fmt17(values[vi]) << ','
               << r.trial << ',' << r.seed << ',' << detail::fmt17(r.nmse)
               << ',' << detail::fmt17(r.angle_error) << ','
               << detail::fmt17(r.coeff_error) << ','
               << detail::fmt17(r.achieved_snr) << ','
               << detail::fmt17(r.max_snr) << ',' << detail::fmt17(r.fpa_snr)
               << ',' << r.omp_iterations << ','
               << (timing ? detail::fmt17(r.wall_ms) : "0") << '\n';
      if (r.failed) {
        ++failed;
        continue;
      }
      ++ok;
      s_nmse += r.nmse;
      s_ang += r.angle_error;
      s_coe += r.coeff_error;
      s_ach += r.achieved_snr;
      s_max += r.max_snr;
      s_fpa += r.fpa_snr;
      if (!r.empty_estimate) {
        ++nonempty;
        s_nmse_ne += r.nmse;
      }
    }
    result.failed += failed;
    const double n_ok = std::max(ok, 1);
    agg_csv << axis_name(axis) << ',' << detail::fmt17(values[vi]) << ','
            << ok << ',' << failed << ',' << (ok - nonempty) << ','
            << detail::fmt17(s_nmse / n_ok) << ','
            << detail::fmt17(nonempty ? s_nmse_ne / nonempty : 0.0) << ','
            << detail::fmt17(s_ang / n_ok) << ','
            << detail::fmt17(s_coe / n_ok) << ','
            << detail::fmt17(s_ach / n_ok) << ','
            << detail::fmt17(s_max / n_ok) << ','
            << detail::fmt17(s_fpa / n_ok) << '\n';
  }
  return result;
}

/// Coherence profile report: |[C]_{n, n_ref}| for every n under the configured
/// setup, averaged over coherence_trials plans for the random setups, plus
/// the ideal sinc reference rows.
inline void coherence_report(const ExperimentConfig& cfg, std::int64_t n_ref,
                             std::ostream& os, int coherence_trials = 1) {
  cfg.validate();
  if (coherence_trials < 1)
    throw std::invalid_argument("coherence_report: trials < 1");
  const AngleGrid grid(cfg.grid_n);
  const bool random_setup = cfg.setup == Setup::RandomDistribution ||
                            cfg.setup == Setup::RandomWalk;
  const int plans = random_setup ? coherence_trials : 1;
  Eigen::VectorXd acc;
  for (int i = 0; i < plans; ++i) {
    Rng rng(mix_seed(cfg.master_seed, 17, static_cast<std::uint64_t>(i)));
    const MeasurementPlan plan = make_plan(cfg, rng, cfg.master_seed);
    const MeasurementOperator op(plan, grid, OperatorMode::MatrixFree);
    const Eigen::VectorXd mags =
        op.mutual_coherence_column(n_ref).cwiseAbs();
    if (acc.size() == 0) acc = mags;
    else acc += mags;
  }
  acc /= static_cast<double>(plans);
  os << "n,abs_coherence,series\n";
  for (std::int64_t n = 0; n < acc.size(); ++n)
    os << (n + 1) << ',' << detail::fmt17(acc(n)) << ",measured\n";
  const std::int64_t n3 = static_cast<std::int64_t>(cfg.grid_n) * cfg.grid_n *
                          cfg.grid_n;
  for (int p = 1; p <= cfg.grid_n - 1; ++p) {
    const double s = std::abs(ideal_sinc_coherence(cfg.region, grid, p));
    os << (p * n3 + 1) << ',' << detail::fmt17(s) << ",ideal_sinc\n";
  }
}

}  // namespace machest
