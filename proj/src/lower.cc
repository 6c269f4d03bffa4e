#include "tileguide/lower.h"

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>

#include "tileguide/error.h"

namespace tileguide {

const char* to_string(block_level l) {
  switch (l) {
  case block_level::outer_external: return "outer-external";
  case block_level::inner_external: return "inner-external";
  case block_level::vectorized_inner: return "vectorized-inner";
  }
  return "?";
}

const realization* loop_nest::find(std::string_view func) const {
  for (const realization& r : realizations) {
    if (r.func == func) return &r;
  }
  return nullptr;
}

int loop_nest::block_index(std::string_view id) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> loop_nest::path_to(int block) const {
  std::vector<std::string> path;
  for (int b = block; b >= 0; b = blocks[b].parent) path.push_back(blocks[b].id);
  std::reverse(path.begin(), path.end());
  return path;
}

bool loop_nest::encloses(int block, int stmt) const {
  if (block < 0) return true;
  for (int b = stmts[stmt].parent; b >= 0; b = blocks[b].parent) {
    if (b == block) return true;
  }
  return false;
}

bool is_materialized(const schedule& s, const pipeline& p, std::string_view func) {
  return func == p.output || s.find(func) != nullptr;
}

namespace {

bool has_dim(const pipeline& p, std::string_view func, int slot) {
  for (const std::string& d : p.dims_of(func)) {
    if (dim_slot(d) == slot) return true;
  }
  return false;
}

std::vector<interval> split_interval(const interval& r, std::int64_t range) {
  std::vector<interval> tiles;
  std::int64_t t = (r.extent() + range - 1) / range;
  for (std::int64_t i = 0; i < range; ++i) {
    std::int64_t lo = r.lo + i * t;
    if (lo > r.hi) break;
    tiles.push_back({lo, std::min(lo + t - 1, r.hi)});
  }
  return tiles;
}

bool item_contains(const loop_nest& n, const body_item& item, const std::vector<int>& stmts) {
  for (int s : stmts) {
    if (!item.is_block && item.index == s) return true;
    if (item.is_block && n.encloses(item.index, s)) return true;
  }
  return false;
}

int first_use_slot(const loop_nest& n, int host, const std::vector<int>& stmts) {
  const std::vector<body_item>& body = n.body_of(host);
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (item_contains(n, body[i], stmts)) return static_cast<int>(i);
  }
  return static_cast<int>(body.size());
}

std::string path_text(const std::vector<std::string>& path) {
  std::string s;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) s += "/";
    s += path[i];
  }
  return s.empty() ? "root" : s;
}

// Bounds inference for one dimension slot.
class dim_bounds {
public:
  dim_bounds(const pipeline& p, loop_nest& n, int d) : p_(p), n_(n), d_(d) {
    for (const use_footprint& u : n.uses) by_producer_[u.producer].push_back(&u);
  }

  void run() {
    for (realization& r : n_.realizations) {
      std::vector<interval>& inst = r.instances[d_];
      inst.clear();
      if (r.func == p_.output) {
        inst.push_back(full_output());
      } else if (r.host < 0) {
        frame root;
        memo m;
        inst.push_back(as_if(r.func, root, m));
      } else {
        const loop_block& host = n_.blocks[r.host];
        const realization* owner = n_.find(host.func);
        for (const interval& owner_region : owner->instances[d_]) {
          for (const interval& cov : coverages(*owner, host, owner_region)) {
            frame f{false, host.func, cov};
            memo m;
            inst.push_back(as_if(r.func, f, m));
          }
        }
      }
    }
  }

private:
  struct frame {
    bool root = true;
    std::string owner;
    interval cov;
  };
  using memo = std::map<std::string, interval, std::less<>>;

  interval full_output() const {
    const std::vector<std::string>& dims = p_.dims_of(p_.output);
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dim_slot(dims[i]) == d_) return {0, p_.output_extent.sizes[i] - 1};
    }
    return {0, 0};
  }

  // Coverage of the owner's points by one iteration of `host` in this dim.
  std::vector<interval> coverages(const realization& owner, const loop_block& host, const interval& region) const {
    if (!has_dim(p_, owner.func, d_) || !owner.split) return {region};
    bool tiled = d_ == 0 || (d_ == 1 && has_dim(p_, owner.func, 1));
    std::vector<interval> tiles =
        tiled ? split_interval(region, d_ == 0 ? owner.split->range_x : owner.split->range_y) : std::vector<interval>{region};
    if (host.level == block_level::inner_external && d_ == 1) {
      std::vector<interval> rows;
      for (const interval& t : tiles) {
        for (std::int64_t y = t.lo; y <= t.hi; ++y) rows.push_back({y, y});
      }
      return rows;
    }
    return tiles;
  }

  // Region of `func` needed by everything computed within one iteration of
  // the frame, as if `func` were computed at the frame.
  interval as_if(const std::string& func, const frame& f, memo& m) {
    if (!has_dim(p_, func, d_)) return {0, 0};
    if (auto it = m.find(func); it != m.end()) return it->second;
    std::optional<interval> acc;
    auto it = by_producer_.find(func);
    if (it != by_producer_.end()) {
      for (const use_footprint* u : it->second) {
        if (u->relative[d_]) {
          interval src;
          if (!f.root && u->consumer == f.owner) {
            src = f.cov;
          } else if (u->consumer == p_.output) {
            src = full_output();
          } else {
            src = as_if(u->consumer, f, m);
          }
          interval v{src.lo + u->relative[d_]->lo, src.hi + u->relative[d_]->hi};
          acc = acc ? hull(*acc, v) : v;
        }
        if (u->absolute[d_]) acc = acc ? hull(*acc, *u->absolute[d_]) : *u->absolute[d_];
      }
    }
    interval result = acc ? *acc : interval{0, 0};
    m[func] = result;
    return result;
  }

  const pipeline& p_;
  loop_nest& n_;
  int d_;
  std::map<std::string, std::vector<const use_footprint*>, std::less<>> by_producer_;
};

int add_block(loop_nest& n, loop_block b) {
  n.blocks.push_back(std::move(b));
  return static_cast<int>(n.blocks.size()) - 1;
}

}  // namespace

loop_nest lower(const pipeline& p, const schedule& s, const lower_options& opts) {
  for (const auto& [name, decision] : s.decisions()) {
    if (p.is_input(name)) throw error(error_kind::invalid_schedule, "input '" + name + "' cannot carry a decision");
    if (!p.find_func(name)) throw error(error_kind::invalid_schedule, "schedule names unknown func '" + name + "'");
    if (name == p.output && !decision.pos.is_root()) {
      throw error(error_kind::invalid_schedule, "output '" + name + "' must be computed at root");
    }
  }
  const std::vector<std::string> order = inverse_topological_order(p);
  auto mat = [&](std::string_view f) { return is_materialized(s, p, f); };

  loop_nest n;
  std::vector<std::pair<std::string, expansion>> expansions;
  for (const std::string& f : order) {
    if (mat(f)) expansions.emplace_back(f, expand(p, f, mat));
  }
  for (const auto& [consumer, e] : expansions) {
    for (const access_site& site : e.loads) {
      if (!p.find_func(site.producer)) continue;
      auto it = std::find_if(n.uses.begin(), n.uses.end(), [&](const use_footprint& u) {
        return u.consumer == consumer && u.producer == site.producer;
      });
      if (it == n.uses.end()) {
        n.uses.push_back({consumer, site.producer, 0, {}, {}});
        it = std::prev(n.uses.end());
      }
      it->sites += 1;
      const std::vector<std::string>& dims = p.dims_of(site.producer);
      for (std::size_t j = 0; j < dims.size(); ++j) {
        int slot = dim_slot(dims[j]);
        const index_term& t = site.index[j];
        std::optional<interval>& into = t.relative ? it->relative[slot] : it->absolute[slot];
        interval v{t.offset, t.offset};
        into = into ? hull(*into, v) : v;
      }
    }
  }

  // Loop structure.
  for (const std::string& f : order) {
    if (!mat(f)) continue;
    const computed_at* decision = s.find(f);
    computed_at dec = decision ? *decision : computed_at{};
    realization r;
    r.func = f;
    r.split = dec.split;
    const bool two_d = has_dim(p, f, 1);

    if (f == p.output) {
      r.host = -1;
    } else {
      if (dec.pos.is_root()) {
        r.host = -1;
      } else {
        r.host = n.block_index(dec.pos.path.back());
        if (r.host < 0 || n.path_to(r.host) != dec.pos.path) {
          throw error(error_kind::invalid_position,
                      "compute location '" + path_text(dec.pos.path) + "' of '" + f + "' does not exist in the loop nest");
        }
        if (n.blocks[r.host].level == block_level::vectorized_inner) {
          throw error(error_kind::invalid_position, "'" + f + "' cannot be computed inside vectorized block '" +
                                                        n.blocks[r.host].id + "'");
        }
      }
      std::vector<int> use_stmts;
      for (const use_footprint& u : n.uses) {
        if (u.producer == f) use_stmts.push_back(n.find(u.consumer)->stmt);
      }
      for (int st : use_stmts) {
        if (!n.encloses(r.host, st)) {
          throw error(error_kind::invalid_position, "compute location '" + path_text(dec.pos.path) + "' of '" + f +
                                                        "' does not enclose its use in '" + n.stmts[st].func + "'");
        }
      }
      r.slot = first_use_slot(n, r.host, use_stmts);
    }

    // Blocks, innermost first so the chain can be linked by index.
    compute_stmt stmt;
    stmt.func = f;
    n.stmts.push_back(stmt);
    r.stmt = static_cast<int>(n.stmts.size()) - 1;

    loop_block leaf;
    leaf.id = f + ".vec";
    leaf.func = f;
    leaf.level = block_level::vectorized_inner;
    leaf.body.push_back({false, r.stmt});
    int leaf_index = add_block(n, leaf);
    n.stmts[r.stmt].parent = leaf_index;
    int top = leaf_index;
    if (r.split) {
      int inner_index = -1;
      if (two_d) {
        loop_block inner;
        inner.id = f + ".inner";
        inner.func = f;
        inner.level = block_level::inner_external;
        inner.body.push_back({true, leaf_index});
        inner_index = add_block(n, inner);
        n.blocks[leaf_index].parent = inner_index;
      }
      loop_block outer;
      outer.id = f + ".outer";
      outer.func = f;
      outer.level = block_level::outer_external;
      int child = inner_index >= 0 ? inner_index : leaf_index;
      outer.body.push_back({true, child});
      int outer_index = add_block(n, outer);
      n.blocks[child].parent = outer_index;
      top = outer_index;
    }
    n.blocks[top].parent = r.host;
    r.top_block = top;
    std::vector<body_item>& body = r.host < 0 ? n.root : n.blocks[r.host].body;
    body.insert(body.begin() + r.slot, body_item{true, top});
    n.realizations.push_back(r);
  }

  for (int d = 0; d < max_dims; ++d) dim_bounds(p, n, d).run();

  // Derived sizes, loops and markers.
  for (realization& r : n.realizations) {
    r.points = 1;
    r.dynamic_instances = 1;
    r.max_points = 1;
    for (int d = 0; d < max_dims; ++d) {
      std::int64_t sum = 0, mx = 0;
      for (const interval& i : r.instances[d]) {
        sum += i.extent();
        mx = std::max(mx, i.extent());
      }
      r.points *= sum;
      r.dynamic_instances *= static_cast<std::int64_t>(r.instances[d].size());
      r.max_extent[d] = mx;
      r.max_points *= mx;
    }
    if (r.max_points > (std::int64_t{1} << 40)) {
      throw error(error_kind::lowering, "region of '" + r.func + "' is unbounded or too large");
    }
    const func_def* f = p.find_func(r.func);
    const bool has_x = has_dim(p, r.func, 0);
    const bool has_y = has_dim(p, r.func, 1);
    compute_stmt& stmt = n.stmts[r.stmt];
    for (int d = 0; d < max_dims; ++d) {
      stmt.region[d] = r.instances[d].front();
      std::int64_t tile = r.max_extent[d];
      if (r.split && d == 0 && has_x) tile = (tile + r.split->range_x - 1) / r.split->range_x;
      if (r.split && d == 1 && has_y) tile = (tile + r.split->range_y - 1) / r.split->range_y;
      stmt.tile[d] = tile;
      r.leaf_extent[d] = tile;
    }
    if (r.split && has_y) r.leaf_extent[1] = 1;

    loop_block& leaf = n.blocks[n.stmts[r.stmt].parent];
    if (!r.split) {
      for (const std::string& dim : f->dims) {
        int d = dim_slot(dim);
        leaf.loops.push_back({dim, dim, stmt.region[d].lo, stmt.region[d].extent()});
      }
    } else {
      loop_block& outer = n.blocks[r.top_block];
      if (has_x) outer.loops.push_back({"x_outer", "x", 0, r.split->range_x});
      if (has_y) outer.loops.push_back({"y_outer", "y", 0, r.split->range_y});
      if (has_y) {
        loop_block& inner = n.blocks[leaf.parent];
        inner.loops.push_back({"y_inner", "y", 0, stmt.tile[1]});
      }
      if (has_x) leaf.loops.push_back({"x_inner", "x", 0, stmt.tile[0]});
      for (const std::string& dim : f->dims) {
        int d = dim_slot(dim);
        if (d == 0 || d == 1) continue;
        leaf.loops.push_back({dim, dim, stmt.region[d].lo, stmt.region[d].extent()});
      }
    }
    if (has_x && r.leaf_extent[0] >= opts.vector_width) leaf.markers |= marker_vectorized;
    if (r.func == p.output) n.blocks[r.top_block].markers |= marker_parallel;
  }

  // Unclamped input reads must stay inside the input.
  for (const auto& [consumer, e] : expansions) {
    const realization* r = n.find(consumer);
    for (const access_site& site : e.loads) {
      const input_def* in = p.find_input(site.producer);
      if (!in || site.through_clamp) continue;
      for (std::size_t j = 0; j < in->dims.size(); ++j) {
        int d = dim_slot(in->dims[j]);
        const index_term& t = site.index[j];
        for (const interval& i : r->instances[d]) {
          interval need = t.relative ? interval{i.lo + t.offset, i.hi + t.offset} : interval{t.offset, t.offset};
          if (need.lo < 0 || need.hi >= in->size.sizes[j]) {
            throw error(error_kind::lowering, "'" + consumer + "' reads input '" + in->name + "' at " + in->dims[j] + " in [" +
                                                  std::to_string(need.lo) + ", " + std::to_string(need.hi) +
                                                  "] outside its extent; wrap it in clamp_edge");
          }
        }
      }
    }
  }
  return n;
}

namespace {

void print_items(std::ostream& os, const pipeline& p, const loop_nest& n, const std::vector<body_item>& items, int indent,
                 bool annotate) {
  for (const body_item& item : items) {
    if (item.is_block) {
      const loop_block& b = n.blocks[item.index];
      int depth = indent;
      for (std::size_t i = 0; i < b.loops.size(); ++i) {
        const loop& l = b.loops[i];
        os << std::string(depth * 2, ' ') << "for " << l.var << " in " << l.min << ".." << (l.min + l.extent - 1);
        if (annotate && i == 0) {
          std::string tags;
          if (b.markers & marker_parallel) tags += " parallel";
          if (b.markers & marker_vectorized) tags += " vectorized";
          os << "  # " << b.id << tags;
        }
        os << "\n";
        ++depth;
      }
      print_items(os, p, n, b.body, depth, annotate);
    } else {
      const compute_stmt& st = n.stmts[item.index];
      const func_def* f = p.find_func(st.func);
      os << std::string(indent * 2, ' ') << st.func << "(";
      for (std::size_t i = 0; i < f->dims.size(); ++i) os << (i ? ", " : "") << f->dims[i];
      os << ") = ";
      if (f->kind == func_kind::clamp_edge) {
        os << "clamp_edge(" << f->clamped_input << ")";
      } else {
        os << print_expr(p, f->body);
      }
      os << ";";
      if (annotate) {
        os << "  # region";
        for (const std::string& dim : f->dims) {
          const interval& r = st.region[dim_slot(dim)];
          os << " " << dim << ":[" << r.lo << "," << r.hi << "]";
        }
      }
      os << "\n";
    }
  }
}

}  // namespace

std::string print_loop_nest(const pipeline& p, const loop_nest& n, bool annotate) {
  std::ostringstream os;
  print_items(os, p, n, n.root, 0, annotate);
  return os.str();
}

std::vector<location> valid_compute_locations(const pipeline& p, const schedule& s, std::string_view func,
                                              const lower_options& opts) {
  if (p.is_input(func)) throw error(error_kind::invalid_schedule, "input '" + std::string(func) + "' has no compute location");
  if (!p.find_func(func)) throw error(error_kind::unknown_identifier, "unknown func '" + std::string(func) + "'");
  if (func == p.output) return {position{}};

  schedule without = s;
  without.set_inline(std::string(func));
  loop_nest n = lower(p, without, opts);
  auto mat = [&](std::string_view g) { return g == func || is_materialized(without, p, g); };
  std::vector<int> use_stmts;
  for (const realization& r : n.realizations) {
    expansion e = expand(p, r.func, mat);
    bool uses = std::any_of(e.loads.begin(), e.loads.end(), [&](const access_site& a) { return a.producer == func; });
    if (uses) use_stmts.push_back(r.stmt);
  }

  // Deepest chain of blocks enclosing every use site.
  std::vector<int> common;
  bool first = true;
  for (int st : use_stmts) {
    std::vector<int> chain;
    for (int b = n.stmts[st].parent; b >= 0; b = n.blocks[b].parent) chain.push_back(b);
    std::reverse(chain.begin(), chain.end());
    if (first) {
      common = chain;
      first = false;
    } else {
      std::size_t k = 0;
      while (k < common.size() && k < chain.size() && common[k] == chain[k]) ++k;
      common.resize(k);
    }
  }

  std::vector<location> result;
  result.push_back(std::nullopt);
  result.push_back(position{{}, first_use_slot(n, -1, use_stmts)});
  for (int b : common) {
    if (n.blocks[b].level == block_level::vectorized_inner) break;
    result.push_back(position{n.path_to(b), first_use_slot(n, b, use_stmts)});
  }
  return result;
}

schedule apply_compute_location(const pipeline& p, const schedule& s, std::string_view func, const location& choice,
                                const lower_options& opts) {
  std::string f(func);
  if (func == p.output) {
    if (!choice || !choice->is_root()) {
      throw error(error_kind::invalid_position, "output '" + f + "' can only be computed at root");
    }
    schedule result = s;
    if (!result.find(f)) result.set(f, computed_at{});
    return result;
  }
  std::vector<location> valid = valid_compute_locations(p, s, func, opts);
  if (std::find(valid.begin(), valid.end(), choice) == valid.end()) {
    throw error(error_kind::invalid_position,
                "'" + describe(choice) + "' is not a valid compute location of '" + f + "' in the current schedule");
  }
  schedule result = s;
  if (choice) {
    result.set(f, computed_at{*choice, std::nullopt});
  } else {
    result.set_inline(f);
  }
  try {
    lower(p, result, opts);
  } catch (const error& e) {
    throw error(error_kind::invalid_position, "choosing '" + describe(choice) + "' for '" + f + "' invalidates the schedule: " + e.what());
  }
  return result;
}

std::optional<std::array<std::int64_t, 2>> split_extents(const loop_nest& n, const pipeline& p, std::string_view func) {
  const realization* r = n.find(func);
  if (!r) return std::nullopt;
  std::array<std::int64_t, 2> ext{1, 1};
  if (has_dim(p, func, 0)) ext[0] = r->max_extent[0];
  if (has_dim(p, func, 1)) ext[1] = r->max_extent[1];
  return ext;
}

schedule apply_tile_range(const pipeline& p, const schedule& s, std::string_view func, std::int64_t range_x,
                          std::int64_t range_y, const lower_options& opts) {
  std::string f(func);
  if (!p.find_func(func)) throw error(error_kind::unknown_identifier, "unknown func '" + f + "'");
  const computed_at* current = s.find(func);
  if (!current && func != p.output) {
    throw error(error_kind::tiling_not_applicable, "'" + f + "' is inlined; only computed funcs can be tiled");
  }
  computed_at dec = current ? *current : computed_at{};
  loop_nest n = lower(p, s, opts);
  std::array<std::int64_t, 2> ext = *split_extents(n, p, func);
  if (!has_dim(p, func, 1)) range_y = 1;
  if (!has_dim(p, func, 0)) range_x = 1;
  auto check = [&](const char* dim, std::int64_t r, std::int64_t e) {
    if (r < 1 || r > e) {
      throw error(error_kind::out_of_range, std::string("tile range ") + dim + "=" + std::to_string(r) + " of '" + f +
                                                "' must be within [1, " + std::to_string(e) + "]");
    }
  };
  check("x", range_x, ext[0]);
  check("y", range_y, ext[1]);
  dec.split = tile_split{range_x, range_y};
  schedule result = s;
  result.set(f, dec);
  lower(p, result, opts);
  return result;
}

std::string func_color(std::string_view func) {
  static const char* palette[12] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
                                    "#f032e6", "#bfef45", "#469990", "#9a6324", "#800000", "#000075"};
  // FNV-1a
  std::uint32_t h = 2166136261u;
  for (char c : func) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  return palette[h % 12];
}

extent image_extent(const pipeline& p) {
  extent e{{1, 1}};
  const std::vector<std::string>& dims = p.dims_of(p.output);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == "x") e.sizes[0] = p.output_extent.sizes[i];
    if (dims[i] == "y") e.sizes[1] = p.output_extent.sizes[i];
  }
  return e;
}

namespace {

void viz_items(const loop_nest& n, const std::vector<body_item>& items, std::int64_t w, std::int64_t h,
               std::vector<tile_viz_entry>& out) {
  auto div = [](std::int64_t parent, std::int64_t range) { return std::max<std::int64_t>(1, (parent + range - 1) / range); };
  for (const body_item& item : items) {
    if (!item.is_block) continue;
    const loop_block& b = n.blocks[item.index];
    std::int64_t tw = w, th = h;
    if (b.level == block_level::outer_external) {
      for (const loop& l : b.loops) {
        if (l.dim == "x") tw = div(w, l.extent);
        if (l.dim == "y") th = div(h, l.extent);
      }
    }
    out.push_back({b.id, b.func, tw, th, func_color(b.func), b.markers});
    viz_items(n, b.body, tw, th, out);
  }
}

}  // namespace

std::vector<tile_viz_entry> view_model(const loop_nest& n, const extent& image) {
  std::vector<tile_viz_entry> out;
  std::int64_t w = image.sizes.size() > 0 ? image.sizes[0] : 1;
  std::int64_t h = image.sizes.size() > 1 ? image.sizes[1] : 1;
  viz_items(n, n.root, w, h, out);
  return out;
}

std::string print_schedule_script(const pipeline& p, const schedule& s) {
  std::ostringstream os;
  for (const std::string& f : inverse_topological_order(p)) {
    const computed_at* d = s.find(f);
    if (!d) continue;
    os << "compute " << f << " " << (d->pos.is_root() ? "at root" : describe(location{d->pos})) << "\n";
    if (d->split) os << "tile " << f << " " << d->split->range_x << " " << d->split->range_y << "\n";
  }
  return os.str();
}

schedule parse_schedule_script(const pipeline& p, std::string_view text, const lower_options& opts) {
  struct entry {
    std::optional<location> loc;
    std::optional<tile_split> tile;
  };
  std::map<std::string, entry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> words;
    for (std::string w; ls >> w;) words.push_back(w);
    if (words.empty()) continue;
    auto fail = [&](const std::string& msg) -> void {
      throw error(error_kind::syntax, std::to_string(line_no) + ": " + msg);
    };
    auto number = [&](const std::string& w) -> std::int64_t {
      try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(w, &used);
        if (used != w.size()) fail("expected an integer, got '" + w + "'");
        return v;
      } catch (const std::logic_error&) {
        fail("expected an integer, got '" + w + "'");
      }
      return 0;
    };
    if (words.size() < 2) fail("incomplete line");
    const std::string& f = words[1];
    if (!p.find_func(f)) {
      if (p.is_input(f)) fail("input '" + f + "' cannot be scheduled");
      fail("unknown func '" + f + "'");
    }
    if (words[0] == "compute") {
      if (entries[f].loc) fail("duplicate compute line for '" + f + "'");
      if (words.size() == 3 && words[2] == "inline") {
        entries[f].loc = location{std::nullopt};
      } else if (words.size() == 4 && words[2] == "at" && words[3] == "root") {
        entries[f].loc = location{position{}};
      } else if (words.size() == 6 && words[2] == "at" && words[4] == "slot") {
        position pos;
        std::stringstream ps(words[3]);
        for (std::string id; std::getline(ps, id, '/');) {
          if (id.empty()) fail("malformed block path '" + words[3] + "'");
          pos.path.push_back(id);
        }
        pos.index = static_cast<int>(number(words[5]));
        entries[f].loc = location{pos};
      } else {
        fail("expected 'compute <func> at root | at <path> slot <i> | inline'");
      }
    } else if (words[0] == "tile") {
      if (words.size() != 4) fail("expected 'tile <func> <range_x> <range_y>'");
      if (entries[f].tile) fail("duplicate tile line for '" + f + "'");
      entries[f].tile = tile_split{number(words[2]), number(words[3])};
    } else {
      fail("unknown directive '" + words[0] + "'");
    }
  }
  schedule s = default_schedule(p);
  for (const std::string& f : inverse_topological_order(p)) {
    auto it = entries.find(f);
    if (it == entries.end()) continue;
    if (it->second.loc) {
      location loc = *it->second.loc;
      // Root slots follow from the consumers; the script only says "at root".
      if (loc && loc->is_root() && f != p.output) {
        for (const location& v : valid_compute_locations(p, s, f, opts)) {
          if (v && v->is_root()) loc = v;
        }
      }
      s = apply_compute_location(p, s, f, loc, opts);
    }
    if (it->second.tile) s = apply_tile_range(p, s, f, it->second.tile->range_x, it->second.tile->range_y, opts);
  }
  return s;
}

schedule rescale_schedule(const pipeline& from, const pipeline& to, const schedule& s, const lower_options& opts) {
  loop_nest before = lower(from, s, opts);
  schedule out = default_schedule(to);
  for (const std::string& f : inverse_topological_order(to)) {
    const computed_at* d = s.find(f);
    if (!d) continue;
    if (f != to.output) {
      location target;
      for (const location& loc : valid_compute_locations(to, out, f, opts)) {
        if (loc && loc->path == d->pos.path) target = loc;
      }
      if (!target) throw error(error_kind::invalid_position, "compute location of '" + f + "' does not exist after resizing");
      out = apply_compute_location(to, out, f, target, opts);
    }
    if (d->split) {
      std::array<std::int64_t, 2> old_ext = *split_extents(before, from, f);
      std::array<std::int64_t, 2> new_ext = *split_extents(lower(to, out, opts), to, f);
      std::array<std::int64_t, 2> ranges{d->split->range_x, d->split->range_y};
      for (int i = 0; i < 2; ++i) {
        std::int64_t tile = (old_ext[i] + ranges[i] - 1) / ranges[i];
        ranges[i] = std::clamp<std::int64_t>((new_ext[i] + tile - 1) / tile, 1, new_ext[i]);
      }
      out = apply_tile_range(to, out, f, ranges[0], ranges[1], opts);
    }
  }
  return out;
}

}  // namespace tileguide
