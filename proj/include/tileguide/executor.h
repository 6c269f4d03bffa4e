#ifndef TILEGUIDE_EXECUTOR_H
#define TILEGUIDE_EXECUTOR_H

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tileguide/lower.h"
#include "tileguide/pipeline.h"
#include "tileguide/schedule.h"

namespace tileguide {

// Dense float64 image; the first dimension varies fastest.
struct buffer {
  std::vector<std::int64_t> origin;
  std::vector<std::int64_t> extent;
  std::vector<double> data;

  buffer() = default;
  explicit buffer(std::vector<std::int64_t> extent_, std::vector<std::int64_t> origin_ = {});

  std::int64_t size() const;
  bool contains(const std::vector<std::int64_t>& coords) const;
  std::int64_t offset(const std::vector<std::int64_t>& coords) const;
  double& at(const std::vector<std::int64_t>& coords) { return data[offset(coords)]; }
  double at(const std::vector<std::int64_t>& coords) const { return data[offset(coords)]; }

  bool operator==(const buffer&) const = default;
};

using buffer_map = std::map<std::string, buffer, std::less<>>;

// True when both buffers have the same shape and bit-identical data.
bool bitwise_equal(const buffer& a, const buffer& b);

struct instrumentation_report {
  std::map<std::string, std::int64_t> evaluations;
  std::map<std::string, std::int64_t> stores;
  std::map<std::pair<std::string, std::string>, std::int64_t> loads;  // (consumer, producer)
  double wall_time = 0;
};

// Allocates one region of `func` one element short in `dim` (an x/y/c slot),
// so that a minimal region shows up as a read_out_of_region error.
struct shrink_region {
  std::string func;
  int dim = 0;
  bool at_lo = true;
};

struct exec_options {
  lower_options lowering;
  std::optional<shrink_region> shrink;
};

struct exec_result {
  buffer output;
  instrumentation_report report;
};

exec_result execute(const pipeline& p, const schedule& s, const buffer_map& inputs, const exec_options& opts = {});

// Per-pixel recursive evaluation of the output definition, independent of
// any schedule.
buffer reference_execute(const pipeline& p, const buffer_map& inputs);

// Deterministic pseudo-random inputs in [0, 1) matching the declared extents.
buffer_map random_inputs(const pipeline& p, std::uint64_t seed);
buffer_map constant_inputs(const pipeline& p, double value);

}  // namespace tileguide

#endif  // TILEGUIDE_EXECUTOR_H
