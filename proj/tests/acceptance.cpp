// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "collective_checks.hpp"
#include "future_checks.hpp"
#include "matching_checks.hpp"
#include "mpi/bench.hpp"
#include "mpi/mpi.hpp"
#include "typemap_checks.hpp"

namespace {

using seconds = std::chrono::duration<double>;

struct outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail = why;
    pass = pass && ok;
  }
};

struct particle {
  std::uint64_t id;
  std::array<float, 3> position;
};

outcome particle_round_trip() {
  outcome o;
  const particle sent{42, {1.0f, 2.0f, 3.0f}};
  mpi::fabric_config config;
  config.world_size = 2;
  const auto got = mpi::run_world(config, [&](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    particle custom{};
    if (comm.rank() == 0) {
      custom = sent;
      comm.send(custom, 1);
    }
    if (comm.rank() == 1) comm.receive(custom, 0);
    return custom;
  });
  o.require(std::memcmp(&got[1].id, &sent.id, sizeof sent.id) == 0, "id differs");
  o.require(std::memcmp(got[1].position.data(), sent.position.data(), sizeof sent.position) == 0,
            "position differs");
  o.detail = o.pass ? "id=42 position={1,2,3} on rank 1" : o.detail;
  return o;
}

outcome broadcast_chain() {
  outcome o;
  for (int ranks = 3; ranks <= 8; ++ranks) {
    int value = 0;
    const auto bad = checks::check_broadcast_chain(ranks, value);
    o.require(bad.empty(), bad.empty() ? "" : bad.front());
    o.require(value == 3, "ranks=" + std::to_string(ranks) + " data=" + std::to_string(value));
  }
  if (o.pass) o.detail = "data=3 on every rank for 3..8 ranks";
  return o;
}

outcome matching() {
  outcome o;
  long messages = 0, wildcards = 0, probes = 0, truncations = 0;
  for (int ranks = 2; ranks <= 8; ++ranks) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto r = checks::check_matching(ranks, seed, 120);
      o.require(r.messages == 120 && r.receives == 120, "message count off");
      o.require(r.violations.empty(), r.violations.empty() ? "" : r.violations.front());
      messages += r.messages;
      wildcards += r.wildcard_receives;
      probes += r.probes;
      truncations += r.truncations;
    }
  }
  o.require(wildcards > 0 && probes > 0 && truncations > 0, "a pattern was never exercised");
  if (o.pass)
    o.detail = std::to_string(messages) + " messages, " + std::to_string(wildcards) + " wildcard, " +
               std::to_string(probes) + " probes, " + std::to_string(truncations) +
               " truncations, 0 violations";
  return o;
}

outcome collective_oracle() {
  outcome o;
  const std::array<std::size_t, 3> counts{1, 3, 17};
  int comparisons = 0;
  double worst = 0;
  for (int ranks : {1, 2, 3, 4, 5, 8}) {
    for (auto algorithm : {mpi::collective_algorithm::tree, mpi::collective_algorithm::linear}) {
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = checks::check_collectives(ranks, algorithm, seed, counts);
        o.require(r.violations.empty(), r.violations.empty() ? "" : r.violations.front());
        comparisons += r.comparisons;
        worst = std::max(worst, r.worst_relative_error);
      }
    }
  }
  o.require(worst <= 1e-12, "float64 relative error " + std::to_string(worst));
  if (o.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d comparisons, worst float64 relative error %.3g", comparisons, worst);
    o.detail = buf;
  }
  return o;
}

outcome typemap() {
  outcome o;
  int trees = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = checks::check_random_trees(seed, 100);
    o.require(r.violations.empty(), r.violations.empty() ? "" : r.violations.front());
    trees += r.trees;
  }
  o.require(trees >= 1000, "only " + std::to_string(trees) + " trees");
  const auto particle_bad = checks::check_particle_type();
  o.require(particle_bad.empty(), particle_bad.empty() ? "" : particle_bad.front());
  if (o.pass) o.detail = std::to_string(trees) + " random trees; particle offsets {0,8,12,16} agree with oracle";
  return o;
}

outcome futures() {
  outcome o;
  auto take = [&](const checks::violations& bad, const std::string& what) {
    o.require(bad.empty(), what + ": " + (bad.empty() ? "" : bad.front()));
  };
  take(checks::check_empty_when_all(), "empty when_all");
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    take(checks::check_when_all_order(2 + static_cast<int>(seed % 4), seed), "when_all order");
    take(checks::check_when_any_precompleted(seed), "when_any");
    int stages = 0;
    take(checks::check_continuations_once(seed, stages), "continuations");
  }
  if (o.pass) o.detail = "empty when_all, order, when_any and continuations over 100 seeds";
  return o;
}

outcome bench(const std::filesystem::path& tool) {
  outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "mpi20_acceptance_bench";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto records_path = dir / "bench.csv";
  const auto summary_path = dir / "bench_summary.csv";
  const std::string command = "\"" + tool.string() +
                              "\" --ranks 4 --min-exp 1 --max-exp 17 --iters 10 --mode both --output \"" +
                              records_path.string() + "\" --summary \"" + summary_path.string() +
                              "\" > \"" + (dir / "stdout.txt").string() + "\"";
  const auto start = std::chrono::steady_clock::now();
  const int rc = std::system(command.c_str());
  const double elapsed = seconds(std::chrono::steady_clock::now() - start).count();
  o.require(rc == 0, "bench exited with " + std::to_string(rc));
  if (!o.pass) return o;

  const auto records = mpi::bench::parse_csv(records_path);
  const auto rows = mpi::bench::parse_summary(summary_path);
  o.require(records.size() == 374, std::to_string(records.size()) + " records");
  o.require(rows.size() == 34, std::to_string(rows.size()) + " summary rows");
  double worst = 0;
  int checked = 0;
  for (const auto& [length, ratio] : mpi::bench::overhead_ratios(rows)) {
    if (length < 1024) continue;
    ++checked;
    worst = std::max(worst, ratio);
    o.require(ratio <= 1.25, std::to_string(length) + " bytes ratio " + std::to_string(ratio));
  }
  o.require(checked == 8, std::to_string(checked) + " lengths >= 1024");
  o.require(elapsed < 300, "took " + std::to_string(elapsed) + " s");
  if (o.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "374 records, 34 rows, worst ratio %.3f for >= 1024 bytes", worst);
    o.detail = buf;
  }
  std::filesystem::remove_all(dir);
  return o;
}

outcome error_policy() {
  outcome o;
  const auto raised = checks::run_misuse_scripts(mpi::error_policy::raise);
  const auto returned = checks::run_misuse_scripts(mpi::error_policy::return_code);
  o.require(raised.size() == returned.size(), "script count differs");
  for (std::size_t i = 0; o.pass && i < raised.size(); ++i) {
    o.require(raised[i].code == returned[i].code,
              raised[i].name + ": " + raised[i].code.render() + " vs " + returned[i].code.render());
    o.require(returned[i].recorded, raised[i].name + ": last_error not recorded");
  }
  const auto has = [&](mpi::error_class c) {
    return std::any_of(raised.begin(), raised.end(), [&](const auto& m) { return m.code.cls() == c; });
  };
  for (auto c : {mpi::error_class::invalid_rank, mpi::error_class::truncation,
                 mpi::error_class::consumed_future, mpi::error_class::start_on_active})
    o.require(has(c), std::string(mpi::to_string(c)) + " not exercised");
  if (o.pass) o.detail = std::to_string(raised.size()) + " misuse scripts agree on (class, detail)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::filesystem::path tool = "bench";
  app.add_option("--bench", tool, "Path to the bench executable")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  struct criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<outcome()> run;
  };
  const std::vector<criterion> criteria = {
      {1, "custom type round trip", 1.0, particle_round_trip},
      {2, "future broadcast chain", 1.0, broadcast_chain},
      {3, "matching properties", 0, matching},
      {4, "collective oracle", 30.0, collective_oracle},
      {5, "typemap properties", 0, typemap},
      {6, "futures", 0, futures},
      {7, "bench sweep", 300.0, [&] { return bench(tool); }},
      {8, "error policy agreement", 0, error_policy},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = c.run();
    } catch (const mpi::exception& e) {
      o = {false, "exception " + e.code().render()};
    } catch (const std::exception& e) {
      o = {false, std::string("exception ") + e.what()};
    }
    const double elapsed = seconds(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && elapsed >= c.limit_s)
      o = {false, "took " + std::to_string(elapsed) + " s, limit " + std::to_string(c.limit_s) + " s"};
    if (!o.pass) ++failures;
    std::printf("%s %d %s (%.3f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, elapsed, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
