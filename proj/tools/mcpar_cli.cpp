// mcpar: run Monte Carlo campaigns, convergence studies and speedup studies.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mcpar/mcpar.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--workers", o.workers, "Number of concurrent workers")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Base seed for all random streams");
  cmd->add_option("--out", o.out, "Output directory");
}

mcpar::CampaignConfig load(const std::string& path, const Overrides& o) {
  mcpar::CampaignConfig c = mcpar::load_config(path);
  if (o.workers) c.run.n_workers = *o.workers;
  if (o.seed) c.run.base_seed = *o.seed;
  if (o.out) c.run.output_dir = *o.out;
  c.run.validate();
  return c;
}

void print_summary(const char* label, const mcpar::RunConfig& cfg, const mcpar::MergedResult& m) {
  const auto& first = m.channel_moments.front();
  const auto& last = m.channel_moments.back();
  std::cout << label << ": seed=" << cfg.base_seed << " n_mc=" << cfg.n_mc << " n_tasks=" << m.timing.n_tasks
            << " workers=" << m.timing.n_workers << " total_ms=" << m.timing.total_ms
            << " mean[0]=" << mcpar::format_double(first.mean)
            << " mean[last]=" << mcpar::format_double(last.mean) << " out=" << cfg.output_dir.string() << '\n';
}

int cmd_run(const mcpar::CampaignConfig& c) {
  const auto merged = mcpar::run(c.run);
  mcpar::write_run_outputs(c.run.output_dir, merged, c.run, c.prices, c.samples_format);
  print_summary("run", c.run, merged);
  return 0;
}

int cmd_convergence(const mcpar::CampaignConfig& c, std::vector<std::uint64_t> n_list) {
  if (n_list.empty()) n_list.push_back(c.run.n_mc);
  const fs::path out = c.run.output_dir;
  const auto study = mcpar::run_convergence_study(c, n_list, {}, [&](const mcpar::ConvergenceRun& r) {
    mcpar::RunConfig cfg = c.run;
    cfg.n_mc = r.n_mc;
    cfg.output_dir = out / ("n_" + std::to_string(r.n_mc));
    mcpar::write_run_outputs(cfg.output_dir, r.merged, cfg, c.prices, c.samples_format);
    mcpar::atomic_write(out / ("histogram_" + std::to_string(r.n_mc) + ".csv"), mcpar::histogram_csv(r.histogram));
    print_summary("convergence", cfg, r.merged);
  });

  nlohmann::json summary;
  summary["base_seed"] = c.run.base_seed;
  summary["tolerance"] = c.tolerance;
  summary["n_list"] = n_list;
  summary["steps"] = nlohmann::json::array();
  const auto& times = study.runs.front().merged.channel_times;
  for (const auto& step : study.steps) {
    const std::string tag = std::to_string(step.pdf.n_small) + "_" + std::to_string(step.pdf.n_large);
    mcpar::atomic_write(out / ("residue_mean_" + tag + ".csv"), mcpar::series_residue_csv(times, step.mean));
    mcpar::atomic_write(out / ("residue_std_" + tag + ".csv"), mcpar::series_residue_csv(times, step.std));
    summary["steps"].push_back({{"pdf", mcpar::residue_json(step.pdf)},
                                {"mean", mcpar::residue_json(step.mean)},
                                {"std", mcpar::residue_json(step.std)}});
    std::cout << "residue " << step.pdf.n_small << " -> " << step.pdf.n_large
              << ": pdf=" << mcpar::format_double(step.pdf.residue)
              << " mean=" << mcpar::format_double(step.mean.residue)
              << " std=" << mcpar::format_double(step.std.residue)
              << (step.pdf.converged ? " (converged)" : " (not converged)") << '\n';
  }
  summary["converged"] = !study.steps.empty() && study.steps.back().pdf.converged;
  mcpar::atomic_write(out / "convergence.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_speedup(const mcpar::CampaignConfig& c, const std::vector<std::size_t>& worker_list) {
  const auto rows = mcpar::run_speedup_study(c.run, worker_list);
  mcpar::atomic_write(c.run.output_dir / "speedup_study.csv", mcpar::speedup_csv(rows));
  for (const auto& r : rows) {
    std::cout << "speedup: seed=" << c.run.base_seed << " workers=" << r.workers
              << " total_ms=" << r.timing.total_ms << " speedup=" << r.speedup << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel Monte Carlo campaigns with split/process/merge task orchestration"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* run = app.add_subcommand("run", "Run one campaign and write moments.csv, samples and report.json");
  run->add_option("--config", config_path, "JSON config file")->required();
  add_overrides(run, overrides);

  std::vector<std::uint64_t> n_list;
  auto* conv = app.add_subcommand("convergence", "Run a quadrupling sequence of campaigns and report residues");
  conv->add_option("--config", config_path, "JSON config file")->required();
  conv->add_option("--n-list", n_list, "Sample counts, each four times the previous");
  add_overrides(conv, overrides);

  std::vector<std::size_t> worker_list;
  auto* sp = app.add_subcommand("speedup", "Repeat one campaign per worker count and write speedup_study.csv");
  sp->add_option("--config", config_path, "JSON config file")->required();
  sp->add_option("--worker-list", worker_list, "Worker counts to try")->required();
  add_overrides(sp, overrides);

  std::uint64_t toy_n = 16;
  std::uint64_t toy_serial = 1;
  auto* toy = app.add_subcommand("toy", "Squares of random digits, the minimal end-to-end example");
  toy->add_option("--n-mc", toy_n, "Number of realizations")->check(CLI::PositiveNumber);
  toy->add_option("--n-serial", toy_serial, "Realizations per task")->check(CLI::PositiveNumber);
  add_overrides(toy, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(load(config_path, overrides));
    if (*conv) return cmd_convergence(load(config_path, overrides), n_list);
    if (*sp) return cmd_speedup(load(config_path, overrides), worker_list);
    if (*toy) {
      mcpar::CampaignConfig c;
      c.run.n_mc = toy_n;
      c.run.n_serial = toy_serial;
      c.run.problem = mcpar::ToyConfig{};
      c.run.output_dir = "toy_out";
      if (overrides.workers) c.run.n_workers = *overrides.workers;
      if (overrides.seed) c.run.base_seed = *overrides.seed;
      if (overrides.out) c.run.output_dir = *overrides.out;
      c.run.validate();
      return cmd_run(c);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
