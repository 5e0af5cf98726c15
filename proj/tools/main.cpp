// ecnshrink: empirical-Bayes normal-means shrinkage with unknown correlated
// noise.  Subcommands: fit, posterior, simulate, diagnose.

#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ecnshrink/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Empirical-Bayes normal-means shrinkage under unknown correlated noise.\n"
      "Fits a scale-mixture prior jointly with a Gaussian-derivative noise\n"
      "density, and turns the posteriors into multiple-testing summaries."};
  app.require_subcommand(1);

  std::string input, config, output, fit_path;
  double level = 0.1;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto* fit = app.add_subcommand("fit", "Estimate the prior and noise coefficients");
  fit->add_option("--input", input, "Input TSV (header 'id\\tx\\ts' or 'id\\tz')")
      ->required();
  fit->add_option("--config", config, "Run configuration JSON");
  fit->add_option("--output", output, "Fit file to write (JSON)");

  auto* posterior = app.add_subcommand("posterior", "Posterior summaries under a fit");
  posterior->add_option("--input", input, "Input TSV (header 'id\\tx\\ts')")->required();
  posterior->add_option("--fit", fit_path, "Fit file from 'fit'")->required();
  posterior->add_option("--level", level, "Nominal discovery level (default 0.1)");
  posterior->add_option("--output", output, "Summary TSV to write")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a replicated synthetic study");
  simulate->add_option("--config", config, "Scenario JSON")->required();
  simulate->add_option("--output", output, "Output directory")->required();
  simulate->add_option("--level", level, "Nominal discovery level (default 0.1)");
  simulate->add_option("--seed", seed, "Override the scenario seed")
      ->each([&](const std::string&) { seed_given = true; });

  auto* diagnose = app.add_subcommand("diagnose", "Emit z histogram and fitted density data");
  diagnose->add_option("--input", input, "Input TSV")->required();
  diagnose->add_option("--fit", fit_path, "Fit file from 'fit'")->required();
  diagnose->add_option("--output", output, "Plot-data TSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : ecns::kExitInputError;
  }

  if (fit->parsed()) return ecns::cmd_fit(input, config, output);
  if (posterior->parsed()) return ecns::cmd_posterior(input, fit_path, level, output);
  if (simulate->parsed()) {
    return ecns::cmd_simulate(config, output, level,
                              seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
  }
  if (diagnose->parsed()) return ecns::cmd_diagnose(input, fit_path, output);
  return ecns::kExitInputError;
}
