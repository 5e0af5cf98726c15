#pragma once

// Command implementations behind the CLI: fit, posterior, simulate, diagnose.
// Each returns a process exit status (0 success, 2 input/config error,
// 3 fit non-convergence) and reports problems on the given stream, so the
// commands are directly drivable from tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ecnshrink/cash.hpp"
#include "ecnshrink/ecn.hpp"
#include "ecnshrink/io.hpp"
#include "ecnshrink/parallel.hpp"
#include "ecnshrink/posterior.hpp"
#include "ecnshrink/simlab.hpp"

namespace ecns {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNonConverged = 3;

/// Fits the joint model on (x, s) input, or the plain noise model on z-only
/// input, and writes the fit file.  Non-convergence still writes the file.
inline int cmd_fit(const std::string& input_path, const std::string& config_path,
                   const std::string& output_path, std::ostream& err = std::cerr) {
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : read_run_config(config_path);
    InputTable table = read_input_table(input_path);
    std::string out_path = output_path.empty() ? cfg.output.value_or("") : output_path;
    if (out_path.empty()) throw InputError("no output path given");

    FitFile fit_file;
    bool converged = true;
    if (table.z_only) {
      auto fit = fit_ecn(table.x, cfg.cash.penalty, cfg.cash.grid, cfg.cash.ecn_tol);
      fit_file.model = "ecn";
      fit_file.omega = fit.coefficients.omega;
      fit_file.converged = fit.report.converged;
      fit_file.objective_trace = {fit.report.objective};
      fit_file.fitted_sd = fitted_noise_sd(fit.coefficients);
      converged = fit.report.converged;
    } else {
      auto fit = fit_cash(table.dataset(), cfg.cash);
      fit_file.model = "cash";
      fit_file.omega = fit.omega.omega;
      fit_file.sigma_grid = fit.prior.sigma_grid;
      fit_file.pi = fit.prior.pi;
      fit_file.converged = fit.converged;
      fit_file.objective_trace = fit.trace;
      fit_file.fitted_sd = fitted_noise_sd(fit);
      converged = fit.converged;
    }
    write_text_file(out_path, serialize_fit_file(fit_file));
    if (!converged) {
      err << "fit did not converge; best iterate written to " << out_path << "\n";
      return kExitNonConverged;
    }
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

/// Posterior summaries for (x, s) input under a fitted cash model; writes a
/// TSV with one row per observation.
inline int cmd_posterior(const std::string& input_path, const std::string& fit_path,
                         double level, const std::string& output_path,
                         std::ostream& err = std::cerr) {
  try {
    if (!(level > 0.0 && level <= 1.0)) {
      throw InputError("level must lie in (0, 1]");
    }
    InputTable table = read_input_table(input_path);
    FitFile fit_file = read_fit_file(fit_path);
    if (table.z_only) {
      throw InputError("posterior requires (x, s) input; z-only tables carry no scale");
    }
    if (fit_file.model != "cash") {
      throw InputError("posterior requires a cash fit (with a mixture prior); got model '" +
                       fit_file.model + "'");
    }

    Dataset data = table.dataset();
    CashFit fit;
    fit.prior.sigma_grid = fit_file.sigma_grid;
    fit.prior.pi = fit_file.pi;
    fit.omega = NoiseCoefficients(fit_file.omega);
    try {
      fit.prior.validate();
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("fit file: ") + e.what());
    }
    fit.table = KernelTable(data, fit.prior.sigma_grid, fit.omega.max_order());
    auto summary = summarize_posterior(fit, data);

    std::string out = "id\tpost_mean\tlfdr\tqvalue\tlfsr\tsvalue\tsignificant\n";
    for (long j = 0; j < data.size(); ++j) {
      out += table.ids[j];
      out += '\t';
      out += to_string17(summary.post_mean[j]);
      out += '\t';
      out += to_string17(summary.lfdr[j]);
      out += '\t';
      out += to_string17(summary.qvalue[j]);
      out += '\t';
      out += to_string17(summary.lfsr[j]);
      out += '\t';
      out += to_string17(summary.svalue[j]);
      out += '\t';
      out += (summary.qvalue[j] <= level) ? '1' : '0';
      out += '\n';
    }
    write_text_file(output_path, out);
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

/// Runs a replicated scenario batch; writes per-replicate results and the
/// batch summary into the output directory.  Replicates run in parallel and
/// merge by index, so outputs are byte-identical at any thread count.
inline int cmd_simulate(const std::string& config_path, const std::string& output_dir,
                        double level, std::optional<std::uint64_t> seed_override,
                        std::ostream& err = std::cerr) {
  try {
    SimulateConfig cfg = read_simulate_config(config_path);
    if (seed_override) cfg.scenario.seed = *seed_override;
    std::filesystem::create_directories(output_dir);

    std::vector<ScenarioResult> results(cfg.replicates);
    parallel_for(cfg.replicates, [&](long r) {
      Scenario rep = cfg.scenario;
      rep.seed = derive_seed(cfg.scenario.seed, static_cast<std::uint64_t>(r));
      results[r] = run_scenario(rep, level);
    });

    std::string rep_out =
        "replicate\tmethod\tdiscoveries\tfalse_discoveries\tfdp\ttdp\trealized_noise_sd\n";
    for (int r = 0; r < cfg.replicates; ++r) {
      for (const auto& m : results[r].methods) {
        rep_out += std::to_string(r);
        rep_out += '\t';
        rep_out += m.method;
        rep_out += '\t';
        if (m.error.empty()) {
          rep_out += std::to_string(m.discoveries);
          rep_out += '\t';
          rep_out += std::to_string(m.false_discoveries);
          rep_out += '\t';
          rep_out += to_string17(m.fdp);
          rep_out += '\t';
          rep_out += to_string17(m.tdp);
        } else {
          rep_out += "error\terror\terror\terror";
        }
        rep_out += '\t';
        rep_out += to_string17(results[r].realized_noise_sd);
        rep_out += '\n';
        if (!m.error.empty()) {
          err << "replicate " << r << " method " << m.method << " failed: " << m.error << "\n";
        }
        // Runtimes are nondeterministic, so they go to the log, not the files.
      }
    }
    write_text_file(output_dir + "/replicates.tsv", rep_out);

    auto rows = summarize_batch(results, level);
    std::string sum_out =
        "method\tmean_fdp\tmedian_fdp\tp5_fdp\tp95_fdp\trmse_fdp\tmean_tdp\tfailures\n";
    for (const auto& row : rows) {
      sum_out += row.method;
      sum_out += '\t';
      sum_out += to_string17(row.mean_fdp);
      sum_out += '\t';
      sum_out += to_string17(row.median_fdp);
      sum_out += '\t';
      sum_out += to_string17(row.p5_fdp);
      sum_out += '\t';
      sum_out += to_string17(row.p95_fdp);
      sum_out += '\t';
      sum_out += to_string17(row.rmse_fdp);
      sum_out += '\t';
      sum_out += to_string17(row.mean_tdp);
      sum_out += '\t';
      sum_out += std::to_string(row.failures);
      sum_out += '\n';
    }
    write_text_file(output_dir + "/summary.tsv", sum_out);
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

/// Plot-ready diagnostics: a z-score histogram plus the standard normal and
/// fitted noise densities sampled on a fine grid.  Rows are tagged by kind:
///   hist  <bin_lo> <bin_hi> <count>
///   curve <x> <phi> <f_fitted>
inline int cmd_diagnose(const std::string& input_path, const std::string& fit_path,
                        const std::string& output_path, std::ostream& err = std::cerr) {
  try {
    InputTable table = read_input_table(input_path);
    FitFile fit_file = read_fit_file(fit_path);
    NoiseCoefficients coef(fit_file.omega);
    Eigen::VectorXd z = table.z_scores();

    const int bins = 100;
    const double lo = -10.0, hi = 10.0;
    std::vector<long> counts(bins, 0);
    for (long j = 0; j < z.size(); ++j) {
      int b = static_cast<int>(std::floor((z[j] - lo) / (hi - lo) * bins));
      b = std::clamp(b, 0, bins - 1);  // out-of-range values land in edge bins
      ++counts[b];
    }

    std::string out = "kind\tv1\tv2\tv3\n";
    for (int b = 0; b < bins; ++b) {
      double blo = lo + (hi - lo) * b / bins;
      double bhi = lo + (hi - lo) * (b + 1) / bins;
      out += "hist\t";
      out += to_string17(blo);
      out += '\t';
      out += to_string17(bhi);
      out += '\t';
      out += std::to_string(counts[b]);
      out += '\n';
    }
    const int curve_points = 1000;
    for (int i = 0; i < curve_points; ++i) {
      double x = lo + (hi - lo) * i / (curve_points - 1);
      out += "curve\t";
      out += to_string17(x);
      out += '\t';
      out += to_string17(norm_pdf(x));
      out += '\t';
      out += to_string17(ecn_density(coef, x));
      out += '\n';
    }
    write_text_file(output_path, out);
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace ecns
