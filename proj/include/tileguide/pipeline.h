#ifndef TILEGUIDE_PIPELINE_H
#define TILEGUIDE_PIPELINE_H

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tileguide {

// Dimension names are canonical: x, y, c. Each name owns a fixed slot so that
// funcs of different rank can share coordinate arrays.
constexpr int max_dims = 3;
int dim_slot(std::string_view name);
const char* dim_name(int slot);

struct source_span {
  int line = 0;
  int col = 0;
  int end_col = 0;
};

enum class binary_op { add, sub, mul, div };
enum class intrinsic { exp, sqrt };

// One argument of an access. Relative terms read `var + offset` where var is
// the consumer's loop variable with the same name as the accessed dimension;
// absolute terms read the constant `offset`.
struct index_term {
  bool relative = true;
  std::int64_t offset = 0;

  bool operator==(const index_term&) const = default;
};

enum class expr_kind { literal, param, var, access, binary, call };

struct expr_node;
using expr = std::shared_ptr<const expr_node>;

struct expr_node {
  expr_kind kind = expr_kind::literal;
  double value = 0.0;
  std::string name;
  binary_op op = binary_op::add;
  intrinsic fn = intrinsic::exp;
  std::vector<expr> args;
  std::vector<index_term> index;
  source_span span;
};

expr make_literal(double v);
expr make_param(std::string name);
expr make_var(std::string name);
expr make_access(std::string name, std::vector<index_term> index);
expr make_binary(binary_op op, expr a, expr b);
expr make_call(intrinsic fn, expr a);

// Structural comparison; source spans are ignored.
bool structurally_equal(const expr& a, const expr& b);

struct interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  std::int64_t extent() const { return hi - lo + 1; }
  bool operator==(const interval&) const = default;
};

interval hull(const interval& a, const interval& b);

struct extent {
  std::vector<std::int64_t> sizes;

  std::int64_t points() const;
  bool operator==(const extent&) const = default;
};

std::string to_string(const extent& e);

enum class func_kind { clamp_edge, computed };

struct input_def {
  std::string name;
  std::vector<std::string> dims;
  extent size;
};

struct func_def {
  std::string name;
  std::vector<std::string> dims;
  func_kind kind = func_kind::computed;
  std::string clamped_input;  // clamp_edge only
  expr body;                  // computed only
};

struct pipeline {
  std::string name;
  std::vector<std::pair<std::string, double>> params;
  std::vector<input_def> inputs;
  std::vector<func_def> funcs;  // declaration order
  std::string output;
  extent output_extent;

  const func_def* find_func(std::string_view n) const;
  const input_def* find_input(std::string_view n) const;
  std::optional<double> param(std::string_view n) const;
  bool is_input(std::string_view n) const { return find_input(n) != nullptr; }
  // Dimensions of a func or input.
  const std::vector<std::string>& dims_of(std::string_view n) const;
  int declaration_index(std::string_view n) const;
};

bool structurally_equal(const pipeline& a, const pipeline& b);

// Parses the line-oriented pipeline format and validates every invariant.
// Errors carry "line:col:" prefixes.
pipeline parse_pipeline(std::string_view text);
pipeline load_pipeline_file(const std::string& path);

// Prints `p` back in the source format; parse_pipeline(print_pipeline(p)) is
// structurally equal to `p`.
std::string print_pipeline(const pipeline& p);
// Without the pipeline, relative indices print as `?`.
std::string print_expr(const expr& e);
std::string print_expr(const pipeline& p, const expr& e);

// Returns `p` with the x/y extents of every input and of the output replaced.
pipeline resize_pipeline(const pipeline& p, std::int64_t width, std::int64_t height);

// Funcs and inputs read directly by `f`'s definition, in first-use order.
std::vector<std::string> direct_producers(const pipeline& p, std::string_view f);
// Funcs reading `f` directly, in declaration order.
std::vector<std::string> direct_consumers(const pipeline& p, std::string_view f);

// Output first; every consumer precedes its producers. Reverse of Kahn's
// producer-first order with declaration-order tie-breaking.
std::vector<std::string> inverse_topological_order(const pipeline& p);

// Per producer dimension, the union of the direct access offsets from
// `consumer` into `producer`.
struct dim_footprint {
  std::string dim;
  std::optional<interval> relative;
  std::optional<interval> absolute;

  // Combined [lo, hi] as reported to users: relative offsets when present,
  // [0, 0] for dims not accessed relatively.
  interval offsets() const;
};
using footprint = std::vector<dim_footprint>;

footprint compute_footprint(const pipeline& p, std::string_view consumer, std::string_view producer);

constexpr int default_intrinsic_weight = 10;

std::int64_t ops_per_point(const func_def& f, int intrinsic_weight = default_intrinsic_weight);

struct graph_node {
  std::string name;
  func_kind kind = func_kind::computed;
  bool highlighted = false;
};

struct graph_view {
  std::vector<graph_node> nodes;                          // funcs only
  std::vector<std::string> inputs;                        // input images
  std::vector<std::pair<std::string, std::string>> edges;  // producer -> consumer
};

graph_view dependency_graph_view(const pipeline& p, const std::optional<std::string>& highlighted = std::nullopt);

// The reads performed by one point of a materialized func once every
// non-materialized producer is expanded in place. Index terms are relative to
// the materialized func's own loop variables.
struct access_site {
  std::string producer;
  std::vector<index_term> index;
  bool through_clamp = false;  // read of an input via an inlined clamp_edge
};

struct expansion {
  std::vector<access_site> loads;
  std::map<std::string, std::int64_t> inline_calls;  // evaluations per point
  std::int64_t ops = 0;                               // folded ops per point
};

// `materialized(name)` decides which funcs are read from buffers; inputs are
// always materialized.
expansion expand(const pipeline& p, std::string_view func, const std::function<bool(std::string_view)>& materialized,
                 int intrinsic_weight = default_intrinsic_weight);

}  // namespace tileguide

#endif  // TILEGUIDE_PIPELINE_H
