#include "mpi/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>

#include <time.h>

#include "bench_raw.hpp"
#include "mpi/mpi.hpp"

namespace mpi::bench {

std::string_view to_string(mode m) noexcept {
  return m == mode::ergonomic ? "ergonomic" : "raw";
}

std::optional<mode> parse_mode(std::string_view text) noexcept {
  if (text == "ergonomic") return mode::ergonomic;
  if (text == "raw") return mode::raw;
  return std::nullopt;
}

std::string_view to_string(timer t) noexcept { return t == timer::wall ? "wall" : "cpu"; }

std::optional<timer> parse_timer(std::string_view text) noexcept {
  if (text == "wall") return timer::wall;
  if (text == "cpu") return timer::cpu;
  return std::nullopt;
}

bool is_operation(std::string_view name) noexcept {
  return std::find(operation_names.begin(), operation_names.end(), name) != operation_names.end();
}

error_code validate(const config& c) {
  auto bad = [](const std::string& what) { return error::invalid_argument.with_message(what); };
  if (c.ranks < 1) return bad("ranks must be at least 1");
  if (c.min_exp < 1 || c.min_exp > c.max_exp)
    return bad("exponents must satisfy 0 < min-exp <= max-exp");
  if (c.max_exp > 26) return bad("max-exp must be at most 26");
  if (c.iterations < 1) return bad("iterations must be at least 1");
  if (c.modes.empty()) return bad("no mode selected");
  if (c.operations.empty()) return bad("no operation selected");
  for (const auto& op : c.operations)
    if (!is_operation(op)) return bad("unknown operation '" + op + "'");
  return {};
}

namespace {

using clock = std::chrono::steady_clock;
using bytes = std::vector<std::uint8_t>;

std::int64_t thread_cpu_ns() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

struct round_span {
  clock::time_point start;
  clock::time_point finish;
  std::int64_t cpu_ns = 0;
};

struct typed_buffers {
  bytes in;
  bytes in_all;
  bytes bcast;
  bytes out;
  std::optional<bytes> exclusive;
};

std::span<const std::uint8_t> run_typed(std::string_view op, const communicator& comm,
                                        typed_buffers& b) {
  const bool root = comm.rank() == 0;
  if (op == "barrier") {
    comm.barrier();
    return {};
  }
  if (op == "broadcast") {
    comm.broadcast(b.bcast, 0);
    return b.bcast;
  }
  if (op == "gather") {
    comm.gather(b.in, b.out, 0);
    return root ? std::span<const std::uint8_t>(b.out) : std::span<const std::uint8_t>();
  }
  if (op == "scatter") {
    comm.scatter(b.in_all, b.out, 0);
    return b.out;
  }
  if (op == "all_gather") {
    comm.all_gather(b.in, b.out);
    return b.out;
  }
  if (op == "all_to_all") {
    comm.all_to_all(b.in_all, b.out);
    return b.out;
  }
  if (op == "reduce") {
    comm.reduce(b.in, b.out, ops::sum{}, 0);
    return root ? std::span<const std::uint8_t>(b.out) : std::span<const std::uint8_t>();
  }
  if (op == "all_reduce") {
    comm.all_reduce(b.in, b.out, ops::sum{});
    return b.out;
  }
  if (op == "reduce_scatter") {
    comm.reduce_scatter(b.in_all, b.out, ops::sum{});
    return b.out;
  }
  if (op == "scan") {
    comm.scan(b.in, b.out, ops::sum{});
    return b.out;
  }
  comm.exclusive_scan(b.in, b.exclusive, ops::sum{});
  return b.exclusive ? std::span<const std::uint8_t>(*b.exclusive)
                     : std::span<const std::uint8_t>();
}

std::span<const std::uint8_t> run_raw(std::string_view op, detail::raw_collectives& raw,
                                      detail::raw_buffers& b) {
  if (op == "barrier") {
    raw.barrier();
    return {};
  }
  if (op == "broadcast") return raw.broadcast(b);
  if (op == "gather") return raw.gather(b);
  if (op == "scatter") return raw.scatter(b);
  if (op == "all_gather") return raw.all_gather(b);
  if (op == "all_to_all") return raw.all_to_all(b);
  if (op == "reduce") return raw.reduce(b);
  if (op == "all_reduce") return raw.all_reduce(b);
  if (op == "reduce_scatter") return raw.reduce_scatter(b);
  if (op == "scan") return raw.scan(b);
  return raw.exclusive_scan(b);
}

std::uint64_t checksum(std::span<const std::uint8_t> data) {
  std::uint64_t h = 1469598103934665603ull ^ data.size();
  for (std::uint8_t v : data) {
    h ^= v;
    h *= 1099511628211ull;
  }
  return h;
}

bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  bytes out(n);
  for (auto& v : out) v = static_cast<std::uint8_t>(rng());
  return out;
}

}  // namespace

std::vector<record> run_sweep(const config& c) {
  check(validate(c), error_policy::raise);
  fabric_config fc;
  fc.world_size = c.ranks;
  fc.seed = c.seed;
  fabric fab(fc);
  const int raw_context = 2 * fab.allocate_context();
  const bool both = std::find(c.modes.begin(), c.modes.end(), mode::ergonomic) != c.modes.end() &&
                    std::find(c.modes.begin(), c.modes.end(), mode::raw) != c.modes.end();

  // Per rank: for each (operation, length) and mode, every timed round.
  using span_list = std::vector<round_span>;
  auto per_rank = run_world(fab, [&](endpoint ep) {
    const communicator comm = world(ep);
    detail::raw_collectives raw(fab, ep.rank(), raw_context);
    const auto n = static_cast<std::size_t>(c.ranks);
    std::vector<span_list> spans;
    for (const auto& op : c.operations) {
      for (int e = c.min_exp; e <= c.max_exp; ++e) {
        const std::size_t length = std::size_t{1} << e;
        std::mt19937_64 rng(c.seed ^ (static_cast<std::uint64_t>(ep.rank()) << 32) ^
                            static_cast<std::uint64_t>(e));
        const bytes in = random_bytes(rng, length);
        const bytes in_all = random_bytes(rng, length * n);

        typed_buffers typed{in, in_all, ep.rank() == 0 ? in : bytes(length), {}, {}};
        detail::raw_buffers plain{in, in_all, bytes(length * n), bytes(length), bytes(length)};
        if (ep.rank() == 0) std::copy(in.begin(), in.end(), plain.out.begin());

        auto round = [&](mode m) {
          return m == mode::raw ? run_raw(op, raw, plain) : run_typed(op, comm, typed);
        };

        for (mode m : c.modes) {
          raw.barrier();
          round(m);
        }
        std::vector<span_list> timed(c.modes.size());
        for (int it = 0; it < c.iterations; ++it) {
          for (std::size_t k = 0; k < c.modes.size(); ++k) {
            const std::size_t slot = it % 2 == 0 ? k : c.modes.size() - 1 - k;
            raw.barrier();
            const auto t0 = clock::now();
            const auto c0 = thread_cpu_ns();
            round(c.modes[slot]);
            const auto c1 = thread_cpu_ns();
            timed[slot].push_back(round_span{t0, clock::now(), c1 - c0});
          }
        }
        raw.barrier();
        if (both) {
          const auto a = checksum(run_raw(op, raw, plain));
          const auto b = checksum(run_typed(op, comm, typed));
          if (a != b)
            throw exception(error::internal.with_message(
                "payload mismatch between modes for " + op + " at " + std::to_string(length) +
                " bytes on rank " + std::to_string(ep.rank())));
        }
        for (auto& t : timed) spans.push_back(std::move(t));
      }
    }
    return spans;
  });

  std::vector<record> records;
  std::size_t index = 0;
  for (const auto& op : c.operations) {
    for (int e = c.min_exp; e <= c.max_exp; ++e) {
      for (mode m : c.modes) {
        double total = 0;
        for (int it = 0; it < c.iterations; ++it) {
          auto first = clock::time_point::max();
          auto last = clock::time_point::min();
          std::int64_t cpu = 0;
          for (const auto& rank_spans : per_rank) {
            const round_span& s = rank_spans[index][static_cast<std::size_t>(it)];
            first = std::min(first, s.start);
            last = std::max(last, s.finish);
            cpu += s.cpu_ns;
          }
          total += c.clock == timer::wall
                       ? std::chrono::duration<double, std::nano>(last - first).count()
                       : static_cast<double>(cpu);
        }
        records.push_back(record{op, std::size_t{1} << e, m,
                                 std::max(1.0, total / c.iterations), c.iterations});
        ++index;
      }
    }
  }
  return records;
}

std::vector<summary> geometric_mean(const std::vector<record>& records) {
  if (records.empty()) throw exception(error::empty_set.with_message("no benchmark records"));
  std::map<std::pair<std::size_t, mode>, std::pair<double, std::size_t>> groups;
  for (const auto& r : records) {
    if (!(r.mean_ns > 0))
      throw exception(error::invalid_argument.with_message("non-positive time for " + r.op));
    auto& g = groups[{r.length_bytes, r.m}];
    g.first += std::log(r.mean_ns);
    ++g.second;
  }
  std::vector<summary> out;
  out.reserve(groups.size());
  for (const auto& [key, g] : groups)
    out.push_back(summary{key.first, key.second, std::exp(g.first / static_cast<double>(g.second))});
  return out;
}

std::vector<std::pair<std::size_t, double>> overhead_ratios(const std::vector<summary>& rows) {
  std::map<std::size_t, std::pair<double, double>> by_length;
  for (const auto& s : rows) {
    auto& slot = by_length[s.length_bytes];
    (s.m == mode::ergonomic ? slot.first : slot.second) = s.geomean_ns;
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& [length, pair] : by_length)
    if (pair.first > 0 && pair.second > 0) out.emplace_back(length, pair.first / pair.second);
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw exception(error::invalid_argument.with_message("cannot write " + path.string()));
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out)
    throw exception(error::internal.with_message("write failed for " + path.string()));
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                std::string_view header) {
  std::ifstream in(path);
  if (!in) throw exception(error::invalid_argument.with_message("cannot read " + path.string()));
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw exception(error::invalid_argument.with_message("bad header in " + path.string()));
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

template <class T>
T parse_number(const std::string& text, const std::filesystem::path& path) {
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size())
    throw exception(error::invalid_argument.with_message("bad number '" + text + "' in " +
                                                         path.string()));
  return value;
}

mode parse_mode_field(const std::string& text, const std::filesystem::path& path) {
  auto m = parse_mode(text);
  if (!m)
    throw exception(error::invalid_argument.with_message("bad mode '" + text + "' in " +
                                                         path.string()));
  return *m;
}

constexpr std::string_view record_header = "op,length_bytes,mode,mean_ns,reps";
constexpr std::string_view summary_header = "length_bytes,mode,geomean_ns";

}  // namespace

void emit_csv(const std::vector<record>& records, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << record_header << '\n';
  for (const auto& r : records)
    out << r.op << ',' << r.length_bytes << ',' << to_string(r.m) << ','
        << format_double(r.mean_ns) << ',' << r.reps << '\n';
  finish(out, path);
}

void emit_summary(const std::vector<summary>& rows, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << summary_header << '\n';
  for (const auto& s : rows)
    out << s.length_bytes << ',' << to_string(s.m) << ',' << format_double(s.geomean_ns) << '\n';
  finish(out, path);
}

std::vector<record> parse_csv(const std::filesystem::path& path) {
  std::vector<record> out;
  for (const auto& f : read_rows(path, record_header)) {
    if (f.size() != 5)
      throw exception(error::invalid_argument.with_message("bad row in " + path.string()));
    out.push_back(record{f[0], parse_number<std::size_t>(f[1], path), parse_mode_field(f[2], path),
                         parse_number<double>(f[3], path), parse_number<int>(f[4], path)});
  }
  return out;
}

std::vector<summary> parse_summary(const std::filesystem::path& path) {
  std::vector<summary> out;
  for (const auto& f : read_rows(path, summary_header)) {
    if (f.size() != 3)
      throw exception(error::invalid_argument.with_message("bad row in " + path.string()));
    out.push_back(summary{parse_number<std::size_t>(f[0], path), parse_mode_field(f[1], path),
                          parse_number<double>(f[2], path)});
  }
  return out;
}

}  // namespace mpi::bench
