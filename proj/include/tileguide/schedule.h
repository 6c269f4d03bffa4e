#ifndef TILEGUIDE_SCHEDULE_H
#define TILEGUIDE_SCHEDULE_H

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tileguide/pipeline.h"

namespace tileguide {

// Outer loop iteration counts of a split. range_y is 1 for 1-D funcs.
struct tile_split {
  std::int64_t range_x = 1;
  std::int64_t range_y = 1;

  bool operator==(const tile_split&) const = default;
};

// Where a func is computed: `path` lists loop-block ids from the root to the
// host block (empty for root); `index` is the insertion slot in that body.
struct position {
  std::vector<std::string> path;
  int index = 0;

  bool is_root() const { return path.empty(); }
  bool operator==(const position&) const = default;
};

struct computed_at {
  position pos;
  std::optional<tile_split> split;

  bool operator==(const computed_at&) const = default;
};

// A compute location choice; nullopt means inline.
using location = std::optional<position>;

std::string describe(const location& loc);

// Per-func decisions. A func without a decision is inlined (clamp_edge funcs
// then read their input directly); inputs never carry a decision.
class schedule {
public:
  using decision_map = std::map<std::string, computed_at, std::less<>>;

  const computed_at* find(std::string_view func) const;
  bool is_inline(std::string_view func) const { return find(func) == nullptr; }

  void set(const std::string& func, computed_at decision) { decisions_[func] = std::move(decision); }
  void set_inline(const std::string& func) { decisions_.erase(func); }

  const decision_map& decisions() const { return decisions_; }

  bool operator==(const schedule&) const = default;

private:
  decision_map decisions_;
};

// Output at root without a split; everything else inline.
schedule default_schedule(const pipeline& p);

// ceil(parent_extent / range): the extent of every tile but the last, which is
// clamped so that the tiles cover exactly parent_extent.
std::int64_t tile_extent(std::int64_t parent_extent, std::int64_t range);

// Per-iteration extents of splitting `parent_extent` into `range` tiles. Empty
// trailing tiles (range > parent_extent / tile) are omitted.
std::vector<std::int64_t> tile_extents(std::int64_t parent_extent, std::int64_t range);

}  // namespace tileguide

#endif  // TILEGUIDE_SCHEDULE_H
