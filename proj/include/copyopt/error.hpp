#ifndef COPYOPT_ERROR_HPP
#define COPYOPT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace copyopt {

enum class Errc {
  duplicate_id,
  dimension_mismatch,
  empty_set,
  set_too_small,
  feature_mismatch,
  degenerate_data,
  out_of_range,
  empty_input,
  unknown_slot,
  empty_after_filters,
  generation_unavailable,
  all_zero_weights,
  zero_denominator,
  invalid_counts,
  missing_control,
  funnel_violation,
  empty_served_set,
  unknown_category,
  io_error,
  parse_error,
  validation_error,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_set: return "EmptySet";
    case Errc::set_too_small: return "SetTooSmall";
    case Errc::feature_mismatch: return "FeatureMismatch";
    case Errc::degenerate_data: return "DegenerateData";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::empty_input: return "EmptyInput";
    case Errc::unknown_slot: return "UnknownSlot";
    case Errc::empty_after_filters: return "EmptyAfterFilters";
    case Errc::generation_unavailable: return "GenerationUnavailable";
    case Errc::all_zero_weights: return "AllZeroWeights";
    case Errc::zero_denominator: return "ZeroDenominator";
    case Errc::invalid_counts: return "InvalidCounts";
    case Errc::missing_control: return "MissingControl";
    case Errc::funnel_violation: return "FunnelViolation";
    case Errc::empty_served_set: return "EmptyServedSet";
    case Errc::unknown_category: return "UnknownCategory";
    case Errc::io_error: return "IoError";
    case Errc::parse_error: return "ParseError";
    case Errc::validation_error: return "ValidationError";
  }
  return "Unknown";
}

// All domain failures surface as copyopt::Error; the code identifies the
// contract that was broken, the message carries the offending detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Config validation reports every problem at once.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(Errc::validation_error, join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace copyopt

#endif  // COPYOPT_ERROR_HPP
