#ifndef TILEGUIDE_TESTS_SUPPORT_H
#define TILEGUIDE_TESTS_SUPPORT_H

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "tileguide/lower.h"
#include "tileguide/pipeline.h"
#include "tileguide/schedule.h"

namespace tileguide::testing {

inline std::string data_path(const std::string& name) { return std::string(TILEGUIDE_DATA_DIR) + "/" + name; }

inline pipeline gaussian() { return load_pipeline_file(data_path("gaussian.pipe")); }
inline pipeline unsharp() { return load_pipeline_file(data_path("unsharp.pipe")); }

// A random valid schedule built the way the guide builds one: funcs in
// inverse topological order, each given a random valid location and, when
// computed, a random split (any ranges, not only multiples of 4).
inline schedule random_schedule(const pipeline& p, std::mt19937_64& rng) {
  schedule s = default_schedule(p);
  for (const std::string& f : inverse_topological_order(p)) {
    if (f != p.output) {
      std::vector<location> options = valid_compute_locations(p, s, f);
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      s = apply_compute_location(p, s, f, options[pick(rng)]);
    }
    if (!is_materialized(s, p, f) || std::bernoulli_distribution(0.4)(rng)) continue;
    std::array<std::int64_t, 2> ext = *split_extents(lower(p, s), p, f);
    // Log-uniform ranges so both coarse and fine tilings are common.
    auto draw = [&](std::int64_t e) {
      double v = std::exp(std::uniform_real_distribution<double>(0.0, std::log(static_cast<double>(e) + 1))(rng));
      return std::clamp<std::int64_t>(static_cast<std::int64_t>(v), 1, e);
    };
    std::int64_t x = draw(ext[0]);
    std::int64_t y = draw(ext[1]);
    s = apply_tile_range(p, s, f, x, y);
  }
  return s;
}

}  // namespace tileguide::testing

#endif  // TILEGUIDE_TESTS_SUPPORT_H
