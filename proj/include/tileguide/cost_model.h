#ifndef TILEGUIDE_COST_MODEL_H
#define TILEGUIDE_COST_MODEL_H

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tileguide/lower.h"
#include "tileguide/pipeline.h"
#include "tileguide/schedule.h"

namespace tileguide {

struct machine_params {
  double cache_bytes = 32768;
  double weight_op = 1;
  double weight_store = 2;
  double weight_load_cached = 1;
  double weight_load_uncached = 8;
  int vector_width = 8;
  double bytes_per_element = 8;

  // Throws invalid_schedule unless every weight and size is positive.
  void validate() const;
  lower_options lowering() const { return {vector_width}; }
};

// `key = value` lines; `#` starts a comment. Unknown keys are errors.
machine_params parse_machine_params(std::string_view text);
machine_params load_machine_params(const std::string& path);
std::string print_machine_params(const machine_params& m);

struct func_cost {
  std::int64_t points = 0;
  double compute = 0;
  double load = 0;
  double store = 0;
};

struct cost_estimate {
  double total = 0;
  double load = 0;
  double store = 0;
  double compute = 0;
  std::map<std::string, func_cost> per_func;  // materialized funcs

  // Counts the instrumented executor reproduces exactly.
  std::map<std::string, std::int64_t> evaluations;  // materialized and inlined funcs
  std::map<std::pair<std::string, std::string>, std::int64_t> loads;  // (consumer, producer)
};

cost_estimate estimate(const pipeline& p, const schedule& s, const machine_params& m = {});
cost_estimate estimate(const pipeline& p, const schedule& s, const loop_nest& n, const machine_params& m);

// Maps totals to the small numbers shown next to options:
// total / 10^floor(log10(max total)), rounded to one decimal.
std::vector<double> display_costs(const std::vector<double>& totals);

struct location_option {
  location choice;
  cost_estimate cost;
};

std::vector<location_option> rank_compute_locations(const pipeline& p, const schedule& s, std::string_view func,
                                                    const machine_params& m = {});

// {4, 8, ..} x {4, 8, ..} over the parent extents; y is {1} when !two_d.
std::vector<std::array<std::int64_t, 2>> tile_range_candidates(const std::array<std::int64_t, 2>& parent, bool two_d);

struct tile_option {
  std::int64_t range_x = 1;
  std::int64_t range_y = 1;
  cost_estimate cost;
};

// Ascending by total, ties by (range_y, range_x).
std::vector<tile_option> rank_tile_suggestions(const pipeline& p, const schedule& s, std::string_view func,
                                               const machine_params& m = {}, std::size_t k = 5);

}  // namespace tileguide

#endif  // TILEGUIDE_COST_MODEL_H
