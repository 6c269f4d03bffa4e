#ifndef TILEGUIDE_ERROR_H
#define TILEGUIDE_ERROR_H

#include <stdexcept>
#include <string>

namespace tileguide {

enum class error_kind {
  syntax,
  unknown_identifier,
  arity_mismatch,
  cyclic_dependency,
  non_affine_access,
  invalid_pipeline,
  no_dependency,
  invalid_position,
  out_of_range,
  tiling_not_applicable,
  lowering,
  read_out_of_region,
  missing_input,
  invalid_schedule,
  stale_option,
  empty_history,
  session_done,
  io,
};

const char* to_string(error_kind k);
// Identifier form, e.g. "out_of_range".
const char* error_code(error_kind k);

// All module errors are reported through this type. `what()` carries a
// human readable message, including a line:column prefix for source errors.
class error : public std::runtime_error {
public:
  error(error_kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  error_kind kind() const { return kind_; }

private:
  error_kind kind_;
};

}  // namespace tileguide

#endif  // TILEGUIDE_ERROR_H
