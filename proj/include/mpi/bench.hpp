#pragma once

// Collective latency sweep comparing the typed API ("ergonomic") with
// straight-line transport calls ("raw") over the simulated fabric.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpi/error.hpp"

namespace mpi::bench {

enum class mode { ergonomic, raw };

std::string_view to_string(mode m) noexcept;
std::optional<mode> parse_mode(std::string_view text) noexcept;

inline constexpr std::array<std::string_view, 11> operation_names = {
    "barrier",    "broadcast", "gather",     "scatter",        "all_gather",    "all_to_all",
    "reduce",     "all_reduce", "reduce_scatter", "scan", "exclusive_scan"};

bool is_operation(std::string_view name) noexcept;

/// wall: from the first rank starting a round to the last rank finishing it.
/// cpu: thread CPU time spent in the round, summed over ranks. On a single
/// core the two agree except that cpu excludes time the process is not
/// scheduled at all.
enum class timer { wall, cpu };

std::string_view to_string(timer t) noexcept;
std::optional<timer> parse_timer(std::string_view text) noexcept;

struct config {
  int ranks = 4;
  int min_exp = 1;
  int max_exp = 17;
  int iterations = 10;
  std::vector<std::string> operations{operation_names.begin(), operation_names.end()};
  std::vector<mode> modes{mode::ergonomic, mode::raw};
  std::uint64_t seed = 1;
  timer clock = timer::wall;
};

/// invalid_argument for out-of-range values or unknown operation names.
error_code validate(const config& c);

struct record {
  std::string op;
  std::size_t length_bytes = 0;
  mode m = mode::ergonomic;
  double mean_ns = 0;
  int reps = 0;
  friend bool operator==(const record&, const record&) = default;
};

struct summary {
  std::size_t length_bytes = 0;
  mode m = mode::ergonomic;
  double geomean_ns = 0;
  friend bool operator==(const summary&, const summary&) = default;
};

/// For every (operation, length): one untimed round, then `iterations` timed
/// rounds per mode, interleaved across modes. Message length is the size of
/// one rank's contribution (per destination for all_to_all and scatter).
/// Throws mpi::exception on invalid configuration or if the two modes
/// produce different payloads.
std::vector<record> run_sweep(const config& c);

/// Geometric mean of the operation means, per (length, mode), ordered by
/// length then mode. empty_set for no records, invalid_argument for
/// non-positive times.
std::vector<summary> geometric_mean(const std::vector<record>& records);

void emit_csv(const std::vector<record>& records, const std::filesystem::path& path);
void emit_summary(const std::vector<summary>& rows, const std::filesystem::path& path);
std::vector<record> parse_csv(const std::filesystem::path& path);
std::vector<summary> parse_summary(const std::filesystem::path& path);

/// geomean(ergonomic) / geomean(raw) for each length present in both modes.
std::vector<std::pair<std::size_t, double>> overhead_ratios(const std::vector<summary>& rows);

}  // namespace mpi::bench
