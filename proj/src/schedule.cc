#include "tileguide/schedule.h"

#include <algorithm>

#include "tileguide/error.h"

namespace tileguide {

std::string describe(const location& loc) {
  if (!loc) return "inline";
  if (loc->is_root()) return "root";
  std::string s = "at ";
  for (std::size_t i = 0; i < loc->path.size(); ++i) {
    if (i) s += "/";
    s += loc->path[i];
  }
  return s + " slot " + std::to_string(loc->index);
}

const computed_at* schedule::find(std::string_view func) const {
  auto it = decisions_.find(func);
  return it == decisions_.end() ? nullptr : &it->second;
}

schedule default_schedule(const pipeline& p) {
  schedule s;
  s.set(p.output, computed_at{});
  return s;
}

std::int64_t tile_extent(std::int64_t parent_extent, std::int64_t range) {
  if (parent_extent < 1) throw error(error_kind::out_of_range, "parent extent must be >= 1");
  if (range < 1 || range > parent_extent) {
    throw error(error_kind::out_of_range,
                "tile range " + std::to_string(range) + " must be within [1, " + std::to_string(parent_extent) + "]");
  }
  return (parent_extent + range - 1) / range;
}

std::vector<std::int64_t> tile_extents(std::int64_t parent_extent, std::int64_t range) {
  std::vector<std::int64_t> result;
  if (range < 1) throw error(error_kind::out_of_range, "tile range must be >= 1");
  std::int64_t t = (parent_extent + range - 1) / range;
  for (std::int64_t lo = 0, i = 0; i < range && lo < parent_extent; ++i, lo += t) {
    result.push_back(std::min(t, parent_extent - lo));
  }
  return result;
}

}  // namespace tileguide
