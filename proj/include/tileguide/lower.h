#ifndef TILEGUIDE_LOWER_H
#define TILEGUIDE_LOWER_H

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tileguide/pipeline.h"
#include "tileguide/schedule.h"

namespace tileguide {

enum class block_level { outer_external, inner_external, vectorized_inner };

const char* to_string(block_level l);

enum marker : unsigned {
  marker_parallel = 1u << 0,
  marker_vectorized = 1u << 1,
};

// `for var in min..min+extent-1`
struct loop {
  std::string var;
  std::string dim;
  std::int64_t min = 0;
  std::int64_t extent = 1;
};

struct body_item {
  bool is_block = true;
  int index = 0;
};

struct loop_block {
  std::string id;
  std::string func;
  block_level level = block_level::vectorized_inner;
  std::vector<loop> loops;
  unsigned markers = 0;
  std::vector<body_item> body;
  int parent = -1;  // -1: root
};

using box = std::array<interval, max_dims>;
using dims_array = std::array<std::int64_t, max_dims>;

struct compute_stmt {
  std::string func;
  box region;        // first dynamic instance, indexed by dim slot
  dims_array tile;   // leaf tile extents per dim slot
  int parent = -1;
};

// Everything bounds inference derived for one materialized func.
struct realization {
  std::string func;
  int host = -1;      // host block index, -1 for root
  int slot = 0;       // insertion slot in the host body
  std::optional<tile_split> split;
  int top_block = -1;
  int stmt = -1;
  // Region interval of every dynamic instance, per dim slot. The dynamic
  // instances are the cartesian product of the per-dim lists; dims the func
  // does not have hold [0, 0] entries (one per enclosing iteration).
  std::array<std::vector<interval>, max_dims> instances;
  dims_array max_extent{1, 1, 1};
  dims_array leaf_extent{1, 1, 1};
  std::int64_t points = 0;
  std::int64_t dynamic_instances = 0;
  std::int64_t max_points = 0;
};

// Reads of one materialized producer by one materialized consumer, after
// inlining, folded per producer dimension.
struct use_footprint {
  std::string consumer;
  std::string producer;
  std::int64_t sites = 0;
  std::array<std::optional<interval>, max_dims> relative;
  std::array<std::optional<interval>, max_dims> absolute;
};

struct loop_nest {
  std::vector<loop_block> blocks;
  std::vector<compute_stmt> stmts;
  std::vector<body_item> root;
  std::vector<realization> realizations;  // inverse topological order
  std::vector<use_footprint> uses;        // materialized funcs only (no inputs)

  const realization* find(std::string_view func) const;
  int block_index(std::string_view id) const;
  // Block ids from the root down to and including `block`.
  std::vector<std::string> path_to(int block) const;
  bool encloses(int block, int stmt) const;
  const std::vector<body_item>& body_of(int block) const { return block < 0 ? root : blocks[block].body; }
};

struct lower_options {
  int vector_width = 8;
};

bool is_materialized(const schedule& s, const pipeline& p, std::string_view func);

// Deterministic lowering with bounds inference. Throws invalid_position for
// decisions whose position is not valid in the lowered nest, and lowering for
// unclamped out-of-bounds input reads.
loop_nest lower(const pipeline& p, const schedule& s, const lower_options& opts = {});

// Plain listing (`for x in 0..255`). With `annotate`, markers and
// inferred regions are appended as comments.
std::string print_loop_nest(const pipeline& p, const loop_nest& n, bool annotate = false);

// Inline first, then root, then every enclosing loop level down to the
// deepest block that still encloses all use sites of `func`.
std::vector<location> valid_compute_locations(const pipeline& p, const schedule& s, std::string_view func,
                                              const lower_options& opts = {});

schedule apply_compute_location(const pipeline& p, const schedule& s, std::string_view func, const location& choice,
                                const lower_options& opts = {});

schedule apply_tile_range(const pipeline& p, const schedule& s, std::string_view func, std::int64_t range_x,
                          std::int64_t range_y, const lower_options& opts = {});

// The extents a split of `func` divides (x, y); y is 1 for 1-D funcs.
// nullopt when `func` is inline.
std::optional<std::array<std::int64_t, 2>> split_extents(const loop_nest& n, const pipeline& p, std::string_view func);

struct tile_viz_entry {
  std::string block_id;
  std::string func;
  std::int64_t width = 1;
  std::int64_t height = 1;
  std::string color;
  unsigned markers = 0;
};

std::string func_color(std::string_view func);
std::vector<tile_viz_entry> view_model(const loop_nest& n, const extent& image);
// Image extent (x, y) of a pipeline's output as used by the view model.
extent image_extent(const pipeline& p);

// Schedule script: `compute <f> at root | at <id>/<id> slot <i> | inline`
// and `tile <f> <range_x> <range_y>`.
std::string print_schedule_script(const pipeline& p, const schedule& s);
schedule parse_schedule_script(const pipeline& p, std::string_view text, const lower_options& opts = {});

// Re-targets `s` from `from` to a resized `to`, keeping compute locations and
// tile sizes (ranges are recomputed and clamped to the new extents).
schedule rescale_schedule(const pipeline& from, const pipeline& to, const schedule& s, const lower_options& opts = {});

}  // namespace tileguide

#endif  // TILEGUIDE_LOWER_H
