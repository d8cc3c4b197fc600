#include "mpi/error.hpp"

#include <array>
#include <charconv>
#include <utility>

namespace mpi {
namespace {

constexpr std::array<std::pair<error_class, std::string_view>, 15> class_names{{
    {error_class::success, "success"},
    {error_class::invalid_rank, "invalid_rank"},
    {error_class::invalid_tag, "invalid_tag"},
    {error_class::invalid_argument, "invalid_argument"},
    {error_class::truncation, "truncation"},
    {error_class::non_compliant_type, "non_compliant_type"},
    {error_class::use_after_free, "use_after_free"},
    {error_class::use_of_completed_request, "use_of_completed_request"},
    {error_class::start_on_active, "start_on_active"},
    {error_class::inactive_request, "inactive_request"},
    {error_class::length_mismatch, "length_mismatch"},
    {error_class::internal, "internal"},
    {error_class::consumed_future, "consumed_future"},
    {error_class::empty_set, "empty_set"},
    {error_class::deadlock_suspected, "deadlock_suspected"},
}};

thread_local error_code thread_last_error;

}  // namespace

std::string_view to_string(error_class c) noexcept {
  for (const auto& [cls, name] : class_names)
    if (cls == c && !name.empty()) return name;
  return "unknown";
}

std::optional<error_class> parse_error_class(std::string_view name) noexcept {
  for (const auto& [cls, n] : class_names)
    if (!n.empty() && n == name) return cls;
  return std::nullopt;
}

error_code::error_code(error_class cls, std::int32_t detail, std::string message)
    : class_(cls), detail_(detail), message_(std::move(message)) {
  if (class_ == error_class::success) detail_ = 0;
  else if (detail_ == 0) detail_ = 1;
}

error_code error_code::with_message(std::string message) const {
  error_code copy = *this;
  copy.message_ = std::move(message);
  return copy;
}

std::string error_code::render() const {
  std::string out{to_string(class_)};
  out += ':';
  out += std::to_string(detail_);
  out += ':';
  out += message_;
  return out;
}

std::optional<error_code> error_code::parse(std::string_view text) {
  const auto first = text.find(':');
  if (first == std::string_view::npos) return std::nullopt;
  const auto second = text.find(':', first + 1);
  if (second == std::string_view::npos) return std::nullopt;
  const auto cls = parse_error_class(text.substr(0, first));
  if (!cls) return std::nullopt;
  std::int32_t detail = 0;
  const auto digits = text.substr(first + 1, second - first - 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), detail);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  if ((*cls == error_class::success) != (detail == 0)) return std::nullopt;
  return error_code{*cls, detail, std::string{text.substr(second + 1)}};
}

exception::exception(error_code code) : std::runtime_error(code.render()), code_(std::move(code)) {}

error_code check(const error_code& code, error_policy policy) {
  if (code.ok()) return code;
  if (policy == error_policy::raise) throw exception(code);
  thread_last_error = code;
  return code;
}

const error_code& last_error() noexcept { return thread_last_error; }

void clear_last_error() noexcept { thread_last_error = error_code{}; }

}  // namespace mpi
