// Command-line front end: coherence reports, single-trial estimation,
// Monte Carlo sweeps, and SNR comparison runs, with CSV/JSON output.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "machest/harness.hpp"

namespace {

using machest::ExperimentConfig;
using machest::Setup;
using machest::SweepAxis;

constexpr int kExitOk = 0;
constexpr int kExitInvalidConfig = 2;
constexpr int kExitPartialFailure = 3;

struct CommonOpts {
  ExperimentConfig cfg;
  std::string out;
  std::string format = "csv";
};

void add_common_flags(CLI::App* app, CommonOpts& o) {
  app->add_option("--region", o.cfg.region, "Region size R (lambda units)");
  app->add_option("--grid-n", o.cfg.grid_n, "Angular grid points per axis");
  app->add_option("--paths", o.cfg.paths, "Number of channel paths L");
  app->add_option("--snr-db", o.cfg.snr_db, "SNR p_t/delta^2 in dB");
  app->add_option("--epsilon0", o.cfg.epsilon0, "OMP residual threshold");
  const std::map<std::string, Setup> setups{
      {"upa", Setup::UpaShape},       {"edge", Setup::EdgeOfRegion},
      {"cross", Setup::CrossShape},   {"random", Setup::RandomDistribution},
      {"walk", Setup::RandomWalk}};
  app->add_option("--setup", o.cfg.setup, "Measurement position setup")
      ->transform(CLI::CheckedTransformer(setups, CLI::ignore_case));
  app->add_option("--spacing", o.cfg.spacing,
                  "Spacing for deterministic setups (0: derive from M)");
  app->add_option("--step", o.cfg.step, "Random walk step length");
  app->add_option("--measurements", o.cfg.measurements,
                  "Number of channel measurements M");
  app->add_option("--trials", o.cfg.trials, "Monte Carlo trials");
  app->add_option("--seed", o.cfg.master_seed, "Master seed");
  app->add_option("--metric-d", o.cfg.metric_d,
                  "Sample lattice points per axis D");
  app->add_option("--k-max", o.cfg.k_max, "OMP iteration cap");
  app->add_option("--ridge", o.cfg.ridge, "Gram ridge regularization");
  app->add_option("--workers", o.cfg.workers, "Worker threads");
  app->add_option("--out", o.out, "Output path (default: stdout)");
  app->add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
}

std::unique_ptr<std::ofstream> open_out(const std::string& path,
                                        std::ostream*& os) {
  if (path.empty()) {
    os = &std::cout;
    return nullptr;
  }
  auto f = std::make_unique<std::ofstream>(path);
  if (!*f) throw std::invalid_argument("cannot open output file: " + path);
  os = f.get();
  return f;
}

nlohmann::json record_json(const machest::TrialRecord& r) {
  return {{"trial", r.trial},
          {"seed", r.seed},
          {"measurements", r.measurements},
          {"grid_n", r.grid_n},
          {"snr_db", r.snr_db},
          {"setup", machest::setup_name(r.setup)},
          {"nmse", r.nmse},
          {"angle_error", r.angle_error},
          {"coeff_error", r.coeff_error},
          {"achieved_snr", r.achieved_snr},
          {"max_snr", r.max_snr},
          {"fpa_snr", r.fpa_snr},
          {"omp_iterations", r.omp_iterations},
          {"empty_estimate", r.empty_estimate},
          {"wall_ms", r.wall_ms},
          {"failed", r.failed},
          {"error", r.error}};
}

int cmd_coherence(const CommonOpts& o, std::int64_t ref_n, int coh_trials) {
  o.cfg.validate();
  std::ostream* os = nullptr;
  auto file = open_out(o.out, os);
  machest::coherence_report(o.cfg, ref_n, *os, coh_trials);
  return kExitOk;
}

int cmd_estimate(const CommonOpts& o) {
  o.cfg.validate();
  const machest::TrialRecord rec = machest::run_trial(o.cfg, 0, 0);
  std::ostream* os = nullptr;
  auto file = open_out(o.out, os);
  *os << record_json(rec).dump(2) << '\n';
  if (rec.failed) {
    std::cerr << "trial failed: " << rec.error << '\n';
    return kExitPartialFailure;
  }
  return kExitOk;
}

int cmd_sweep(const CommonOpts& o, const std::string& axis_str,
              const std::vector<double>& values, const std::string& agg_out,
              bool timing) {
  o.cfg.validate();
  SweepAxis axis;
  if (axis_str == "M") axis = SweepAxis::M;
  else if (axis_str == "N") axis = SweepAxis::N;
  else if (axis_str == "SNR") axis = SweepAxis::Snr;
  else throw std::invalid_argument("sweep: axis must be one of M, N, SNR");
  if (values.empty()) throw std::invalid_argument("sweep: no --values given");

  std::ostringstream rows, agg;
  const machest::SweepResult result =
      machest::sweep(o.cfg, axis, values, rows, agg, timing);

  std::ostream* os = nullptr;
  auto file = open_out(o.out, os);
  if (o.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : result.records) j.push_back(record_json(r));
    *os << j.dump(2) << '\n';
  } else {
    *os << rows.str();
  }
  if (!agg_out.empty()) {
    std::ofstream af(agg_out);
    if (!af) throw std::invalid_argument("cannot open " + agg_out);
    af << agg.str();
  } else if (!o.out.empty()) {
    std::ofstream af(o.out + ".agg.csv");
    af << agg.str();
  }
  if (result.failed > 0) {
    std::cerr << result.failed << " of " << result.records.size()
              << " trials failed\n";
    return kExitPartialFailure;
  }
  return kExitOk;
}

int cmd_snr_map(const CommonOpts& o) {
  o.cfg.validate();
  std::vector<machest::TrialRecord> recs(o.cfg.trials);
  machest::detail::parallel_for(o.cfg.trials, o.cfg.workers, [&](int i) {
    recs[i] = machest::run_trial(o.cfg, 0, i);
  });
  std::ostream* os = nullptr;
  auto file = open_out(o.out, os);
  int failed = 0;
  if (o.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : recs) j.push_back(record_json(r));
    *os << j.dump(2) << '\n';
    for (const auto& r : recs) failed += r.failed;
  } else {
    *os << "trial,seed,max_snr,achieved_snr,fpa_snr\n";
    for (const auto& r : recs) {
      *os << r.trial << ',' << r.seed << ','
          << machest::detail::fmt17(r.max_snr) << ','
          << machest::detail::fmt17(r.achieved_snr) << ','
          << machest::detail::fmt17(r.fpa_snr) << '\n';
      failed += r.failed;
    }
  }
  if (failed > 0) {
    std::cerr << failed << " of " << recs.size() << " trials failed\n";
    return kExitPartialFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Movable-antenna channel estimation simulator"};
  app.require_subcommand(1);

  CommonOpts coh_opts, est_opts, sweep_opts, snr_opts;
  std::int64_t ref_n = 1;
  int coh_trials = 1;
  std::string axis_str = "M";
  std::vector<double> values;
  std::string agg_out;
  bool timing = false;

  CLI::App* coh = app.add_subcommand(
      "coherence", "Mutual coherence column report with sinc reference");
  add_common_flags(coh, coh_opts);
  coh->add_option("--ref-n", ref_n, "Reference column (1-based flat index)");
  coh->add_option("--coherence-trials", coh_trials,
                  "Plans to average over (random setups)");

  CLI::App* est = app.add_subcommand(
      "estimate", "Run one estimation trial and print the report as JSON");
  add_common_flags(est, est_opts);

  CLI::App* swp =
      app.add_subcommand("sweep", "Monte Carlo sweep over M, N, or SNR");
  add_common_flags(swp, sweep_opts);
  swp->add_option("--axis", axis_str, "Sweep axis: M, N, or SNR");
  swp->add_option("--values", values, "Axis values")->expected(-1);
  swp->add_option("--agg-out", agg_out, "Aggregate CSV path");
  swp->add_flag("--timing", timing,
                "Include measured wall_ms in rows (breaks byte-identical "
                "reproducibility)");

  CLI::App* snr = app.add_subcommand(
      "snr-map", "Per-trial perfect/estimated/FPA SNR comparison");
  add_common_flags(snr, snr_opts);

  try {
    app.parse(argc, argv);
    if (coh->parsed()) return cmd_coherence(coh_opts, ref_n, coh_trials);
    if (est->parsed()) return cmd_estimate(est_opts);
    if (swp->parsed())
      return cmd_sweep(sweep_opts, axis_str, values, agg_out, timing);
    if (snr->parsed()) return cmd_snr_map(snr_opts);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitInvalidConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
