// hympi_bench: runs one experiment plan on the simulator and writes CSV
// (stdout unless --out) and optionally an SVG chart.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hympi/bench.hpp"
#include "hympi/chart.hpp"
#include "hympi/config.hpp"
#include "hympi/errors.hpp"

namespace {

std::vector<hympi::coll::BaselineAlgo> parse_algos(const std::string& text) {
  std::vector<hympi::coll::BaselineAlgo> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(hympi::coll::parse_baseline_algo(item));
  if (out.empty()) throw hympi::ConfigError("no baseline algorithm given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid vs. message-passing collectives on a simulated cluster"};

  std::string experiment = "single-node";
  int nodes = 0;
  std::string ppn = "24";
  std::size_t msg_min = 1;
  std::size_t msg_max = 32768;
  std::string algo = "smp";
  std::string cost;
  std::string out_path;
  std::string chart_path;
  std::string chart_x = "msg_elems";
  std::string chart_y = "modeled_time";
  std::string chart_series;
  std::uint64_t seed = 1;
  int reps = 1;
  int grid = 4;
  std::string config_path;

  app.add_option("--experiment", experiment,
                 "single-node | one-per-node | vary-ppn | irregular | summa")
      ->capture_default_str();
  app.add_option("--nodes", nodes, "node count (default: 4, or the --ppn list length)");
  app.add_option("--ppn", ppn, "ranks per node: one value or a comma list")->capture_default_str();
  app.add_option("--msg-min", msg_min, "smallest message (elements; block edge for summa)")
      ->capture_default_str();
  app.add_option("--msg-max", msg_max, "largest message, powers of two in between")
      ->capture_default_str();
  app.add_option("--algo", algo, "baseline allgathers: ring, recdbl, smp (comma list)")
      ->capture_default_str();
  app.add_option("--cost", cost, "cost overrides, e.g. alpha=1000,beta=0.5,gamma=0.05");
  app.add_option("--out", out_path, "CSV output path (default: stdout)");
  app.add_option("--chart", chart_path, "SVG line chart output path");
  app.add_option("--chart-x", chart_x, "chart x column")->capture_default_str();
  app.add_option("--chart-y", chart_y, "chart y column")->capture_default_str();
  app.add_option("--chart-series", chart_series, "chart series column(s), '+'-joined");
  app.add_option("--seed", seed, "payload and matrix seed")->capture_default_str();
  app.add_option("--reps", reps, "calls per simulation")->capture_default_str();
  app.add_option("--grid", grid, "summa process grid edge")->capture_default_str();
  app.add_option("--config", config_path, "run config file (cluster and cost keys)");

  CLI11_PARSE(app, argc, argv);

  try {
    hympi::bench::BenchPlan plan;
    plan.experiment = hympi::bench::parse_experiment(experiment);
    plan.ppn = hympi::config::parse_int_list(ppn);
    plan.msg_sweep = hympi::bench::power_sweep(msg_min, msg_max);
    plan.algos = parse_algos(algo);
    plan.seed = seed;
    plan.reps = reps;
    plan.grid = grid;
    if (!config_path.empty()) {
      const auto rc = hympi::config::load_run_config(config_path);
      plan.cluster = rc.cluster;
      plan.cost = rc.cost;
    }
    plan.cost = hympi::config::parse_cost_overrides(cost, plan.cost);
    if (nodes != 0) {
      plan.nodes = nodes;
    } else {
      plan.nodes = plan.experiment == hympi::bench::Experiment::Summa && plan.ppn.size() > 1
                       ? static_cast<int>(plan.ppn.size())
                       : 4;
    }
    if (plan.experiment == hympi::bench::Experiment::Irregular && nodes != 0 &&
        static_cast<std::size_t>(nodes) != plan.ppn.size()) {
      throw hympi::ConfigError("--nodes does not match the --ppn list length");
    }
    if (plan.experiment == hympi::bench::Experiment::Summa && !app.count("--msg-min") &&
        !app.count("--msg-max")) {
      plan.msg_sweep = {2, 4, 8, 16};
    }

    plan.validate();
    if (plan.long_running()) {
      std::cerr << "hympi_bench: warning: configuration exceeds 8 nodes x 24 ranks/node and may "
                   "run for a long time\n";
    }

    const auto table = hympi::bench::to_table(hympi::bench::run_plan(plan));
    if (out_path.empty()) {
      hympi::bench::write_csv(table, std::cout);
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw hympi::ConfigError("cannot write " + out_path);
      hympi::bench::write_csv(table, out);
    }
    if (!chart_path.empty()) {
      if (chart_series.empty()) {
        chart_series = plan.configurations().size() > 1 ? "scheme+ppn_list" : "scheme";
      }
      hympi::chart::ChartOptions opts;
      opts.title = experiment;
      hympi::chart::emit_chart(table, chart_x, chart_y, chart_series,
                               std::filesystem::path(chart_path), opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "hympi_bench: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
