#include "tileguide/cost_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tileguide/error.h"

namespace tileguide {

void machine_params::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw error(error_kind::invalid_schedule, std::string("machine parameter ") + name + " must be > 0");
  };
  positive("cache_bytes", cache_bytes);
  positive("weight_op", weight_op);
  positive("weight_store", weight_store);
  positive("weight_load_cached", weight_load_cached);
  positive("weight_load_uncached", weight_load_uncached);
  positive("vector_width", vector_width);
  positive("bytes_per_element", bytes_per_element);
}

machine_params parse_machine_params(std::string_view text) {
  machine_params m;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw error(error_kind::syntax, std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw error(error_kind::syntax, std::to_string(line_no) + ": '" + value + "' is not a number");
    }
    if (key == "cache_bytes") m.cache_bytes = v;
    else if (key == "weight_op") m.weight_op = v;
    else if (key == "weight_store") m.weight_store = v;
    else if (key == "weight_load_cached") m.weight_load_cached = v;
    else if (key == "weight_load_uncached") m.weight_load_uncached = v;
    else if (key == "vector_width") m.vector_width = static_cast<int>(v);
    else if (key == "bytes_per_element") m.bytes_per_element = v;
    else throw error(error_kind::syntax, std::to_string(line_no) + ": unknown machine parameter '" + key + "'");
  }
  m.validate();
  return m;
}

machine_params load_machine_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(error_kind::io, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_machine_params(ss.str());
}

std::string print_machine_params(const machine_params& m) {
  std::ostringstream os;
  os << "cache_bytes = " << m.cache_bytes << "\n"
     << "weight_op = " << m.weight_op << "\n"
     << "weight_store = " << m.weight_store << "\n"
     << "weight_load_cached = " << m.weight_load_cached << "\n"
     << "weight_load_uncached = " << m.weight_load_uncached << "\n"
     << "vector_width = " << m.vector_width << "\n"
     << "bytes_per_element = " << m.bytes_per_element << "\n";
  return os.str();
}

namespace {

bool has_x(const pipeline& p, std::string_view func) {
  const std::vector<std::string>& dims = p.dims_of(func);
  return std::find(dims.begin(), dims.end(), "x") != dims.end();
}

double vec_discount(const pipeline& p, const realization& r, const machine_params& m) {
  return has_x(p, r.func) && r.leaf_extent[0] >= m.vector_width ? m.vector_width : 1;
}

double allocation_bytes(const pipeline& p, const loop_nest& n, const std::string& producer, const machine_params& m) {
  if (const input_def* in = p.find_input(producer)) return static_cast<double>(in->size.points()) * m.bytes_per_element;
  return static_cast<double>(n.find(producer)->max_points) * m.bytes_per_element;
}

}  // namespace

cost_estimate estimate(const pipeline& p, const schedule& s, const loop_nest& n, const machine_params& m) {
  cost_estimate c;
  auto mat = [&](std::string_view f) { return is_materialized(s, p, f); };
  for (const realization& r : n.realizations) {
    expansion e = expand(p, r.func, mat);
    func_cost fc;
    fc.points = r.points;
    const double points = static_cast<double>(r.points);
    fc.compute = points * static_cast<double>(e.ops) * m.weight_op / vec_discount(p, r, m);
    fc.store = points * m.weight_store;
    for (const access_site& site : e.loads) {
      bool cached = allocation_bytes(p, n, site.producer, m) <= m.cache_bytes;
      fc.load += points * (cached ? m.weight_load_cached : m.weight_load_uncached);
      c.loads[{r.func, site.producer}] += r.points;
    }
    c.evaluations[r.func] += r.points;
    for (const auto& [callee, calls] : e.inline_calls) c.evaluations[callee] += r.points * calls;
    c.compute += fc.compute;
    c.store += fc.store;
    c.load += fc.load;
    c.per_func[r.func] = fc;
  }
  c.total = c.load + c.store + c.compute;
  return c;
}

cost_estimate estimate(const pipeline& p, const schedule& s, const machine_params& m) {
  return estimate(p, s, lower(p, s, m.lowering()), m);
}

std::vector<double> display_costs(const std::vector<double>& totals) {
  double mx = 0;
  for (double t : totals) mx = std::max(mx, t);
  double scale = mx > 0 ? std::pow(10.0, std::floor(std::log10(mx))) : 1;
  std::vector<double> out;
  for (double t : totals) out.push_back(std::round(t / scale * 10) / 10);
  return out;
}

std::vector<location_option> rank_compute_locations(const pipeline& p, const schedule& s, std::string_view func,
                                                    const machine_params& m) {
  std::vector<location_option> out;
  for (const location& loc : valid_compute_locations(p, s, func, m.lowering())) {
    schedule next = apply_compute_location(p, s, func, loc, m.lowering());
    out.push_back({loc, estimate(p, next, m)});
  }
  return out;
}

std::vector<std::array<std::int64_t, 2>> tile_range_candidates(const std::array<std::int64_t, 2>& parent, bool two_d) {
  if (parent[0] < 4 || (two_d && parent[1] < 4)) {
    throw error(error_kind::tiling_not_applicable, "parent tile " + std::to_string(parent[0]) + "x" +
                                                       std::to_string(parent[1]) + " is too small to tile by 4");
  }
  std::vector<std::array<std::int64_t, 2>> out;
  std::int64_t ny = two_d ? parent[1] / 4 : 1;
  std::int64_t nx = parent[0] / 4;
  out.reserve(static_cast<std::size_t>(nx * ny));
  for (std::int64_t j = 1; j <= ny; ++j) {
    for (std::int64_t i = 1; i <= nx; ++i) out.push_back({4 * i, two_d ? 4 * j : 1});
  }
  return out;
}

std::vector<tile_option> rank_tile_suggestions(const pipeline& p, const schedule& s, std::string_view func,
                                               const machine_params& m, std::size_t k) {
  if (!p.find_func(func)) throw error(error_kind::unknown_identifier, "unknown func '" + std::string(func) + "'");
  if (!is_materialized(s, p, func)) {
    throw error(error_kind::tiling_not_applicable, "'" + std::string(func) + "' is inlined; only computed funcs can be tiled");
  }
  const lower_options opts = m.lowering();
  loop_nest n = lower(p, s, opts);
  const std::vector<std::string>& dims = p.dims_of(func);
  const bool two_d = std::find(dims.begin(), dims.end(), "y") != dims.end();
  std::array<std::int64_t, 2> parent = *split_extents(n, p, func);
  std::vector<std::array<std::int64_t, 2>> candidates = tile_range_candidates(parent, two_d);

  struct scored {
    double total;
    std::array<std::int64_t, 2> range;
  };
  std::vector<scored> all;
  all.reserve(candidates.size());
  const bool hosts_nothing = std::none_of(n.realizations.begin(), n.realizations.end(), [&](const realization& r) {
    return r.host >= 0 && n.blocks[r.host].func == func;
  });
  if (hosts_nothing) {
    // Only the cursor func's vectorization changes with its split.
    cost_estimate base = estimate(p, s, n, m);
    const realization& r = *n.find(func);
    auto mat = [&](std::string_view f) { return is_materialized(s, p, f); };
    const double work = static_cast<double>(r.points) * static_cast<double>(expand(p, func, mat).ops) * m.weight_op;
    const double rest = base.total - base.per_func[std::string(func)].compute;
    const bool vectorizable = has_x(p, func);
    for (const auto& c : candidates) {
      std::int64_t leaf_x = (parent[0] + c[0] - 1) / c[0];
      double vec = vectorizable && leaf_x >= m.vector_width ? m.vector_width : 1;
      all.push_back({rest + work / vec, c});
    }
  } else {
    for (const auto& c : candidates) {
      schedule next = apply_tile_range(p, s, func, c[0], c[1], opts);
      all.push_back({estimate(p, next, m).total, c});
    }
  }
  auto before = [](const scored& a, const scored& b) {
    if (a.total != b.total) return a.total < b.total;
    if (a.range[1] != b.range[1]) return a.range[1] < b.range[1];
    return a.range[0] < b.range[0];
  };
  std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), before);

  std::vector<tile_option> out;
  for (std::size_t i = 0; i < keep; ++i) {
    schedule next = apply_tile_range(p, s, func, all[i].range[0], all[i].range[1], opts);
    out.push_back({all[i].range[0], all[i].range[1], estimate(p, next, m)});
  }
  std::stable_sort(out.begin(), out.end(), [](const tile_option& a, const tile_option& b) {
    if (a.cost.total != b.cost.total) return a.cost.total < b.cost.total;
    if (a.range_y != b.range_y) return a.range_y < b.range_y;
    return a.range_x < b.range_x;
  });
  return out;
}

}  // namespace tileguide
