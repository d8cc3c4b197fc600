// Collective latency sweep over the simulated fabric.

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mpi/bench.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Times the eleven collectives for message lengths 2^min-exp .. 2^max-exp bytes and writes "
      "per-operation means plus per-length geometric means.\n"
      "Ranks are threads on one simulated fabric; --ranks stands in for a node count."};
  mpi::bench::config cfg;
  std::string ops;
  std::string mode = "both";
  std::filesystem::path output = "bench.csv";
  std::filesystem::path summary;
  app.add_option("--ranks", cfg.ranks, "Number of ranks (substitutes for nodes)")
      ->capture_default_str();
  app.add_option("--min-exp", cfg.min_exp, "Smallest length exponent")->capture_default_str();
  app.add_option("--max-exp", cfg.max_exp, "Largest length exponent")->capture_default_str();
  app.add_option("--iters", cfg.iterations, "Timed rounds per (operation, length)")
      ->capture_default_str();
  app.add_option("--ops", ops, "Comma-separated operations (default: all eleven)");
  app.add_option("--mode", mode, "ergonomic, raw or both")
      ->check(CLI::IsMember({"ergonomic", "raw", "both"}))
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Payload seed")->capture_default_str();
  std::string clock = "wall";
  app.add_option("--timer", clock,
                 "wall: first start to last finish per round; cpu: thread CPU time summed over "
                 "ranks, which ignores time the host does not schedule the process")
      ->check(CLI::IsMember({"wall", "cpu"}))
      ->capture_default_str();
  app.add_option("--output", output, "Record CSV path")->capture_default_str();
  app.add_option("--summary", summary, "Summary CSV path (default: <output stem>_summary.csv)");
  CLI11_PARSE(app, argc, argv);

  if (!ops.empty()) cfg.operations = split_list(ops);
  if (mode == "ergonomic") cfg.modes = {mpi::bench::mode::ergonomic};
  else if (mode == "raw") cfg.modes = {mpi::bench::mode::raw};
  cfg.clock = *mpi::bench::parse_timer(clock);
  if (summary.empty())
    summary = output.parent_path() / (output.stem().string() + "_summary.csv");

  try {
    if (auto e = mpi::bench::validate(cfg); !e.ok()) throw mpi::exception(e);
    const auto records = mpi::bench::run_sweep(cfg);
    const auto rows = mpi::bench::geometric_mean(records);
    mpi::bench::emit_csv(records, output);
    mpi::bench::emit_summary(rows, summary);
    for (const auto& [length, ratio] : mpi::bench::overhead_ratios(rows))
      std::printf("%zu bytes: ergonomic/raw = %.3f\n", length, ratio);
    std::printf("wrote %zu records to %s and %zu rows to %s\n", records.size(),
                output.string().c_str(), rows.size(), summary.string().c_str());
  } catch (const mpi::exception& e) {
    std::fprintf(stderr, "%s\n", e.code().render().c_str());
    return 1;
  }
  return 0;
}
