#include "tileguide/executor.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <random>

#include "tileguide/error.h"

namespace tileguide {

buffer::buffer(std::vector<std::int64_t> extent_, std::vector<std::int64_t> origin_)
    : origin(std::move(origin_)), extent(std::move(extent_)) {
  if (origin.empty()) origin.assign(extent.size(), 0);
  data.assign(static_cast<std::size_t>(size()), 0.0);
}

std::int64_t buffer::size() const {
  std::int64_t n = 1;
  for (std::int64_t e : extent) n *= e;
  return n;
}

bool buffer::contains(const std::vector<std::int64_t>& coords) const {
  for (std::size_t i = 0; i < extent.size(); ++i) {
    if (coords[i] < origin[i] || coords[i] >= origin[i] + extent[i]) return false;
  }
  return true;
}

std::int64_t buffer::offset(const std::vector<std::int64_t>& coords) const {
  std::int64_t off = 0, stride = 1;
  for (std::size_t i = 0; i < extent.size(); ++i) {
    off += (coords[i] - origin[i]) * stride;
    stride *= extent[i];
  }
  return off;
}

bool bitwise_equal(const buffer& a, const buffer& b) {
  if (a.origin != b.origin || a.extent != b.extent || a.data.size() != b.data.size()) return false;
  return a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

namespace {

using coords3 = std::array<std::int64_t, max_dims>;

double apply(binary_op op, double a, double b) {
  switch (op) {
  case binary_op::add: return a + b;
  case binary_op::sub: return a - b;
  case binary_op::mul: return a * b;
  case binary_op::div: return a / b;
  }
  return 0;
}

double apply(intrinsic fn, double a) { return fn == intrinsic::exp ? std::exp(a) : std::sqrt(a); }

void check_inputs(const pipeline& p, const buffer_map& inputs) {
  for (const input_def& in : p.inputs) {
    auto it = inputs.find(in.name);
    if (it == inputs.end()) throw error(error_kind::missing_input, "missing input '" + in.name + "'");
    if (it->second.extent != in.size.sizes) {
      throw error(error_kind::missing_input, "input '" + in.name + "' has extent " + to_string(extent{it->second.extent}) +
                                                 ", expected " + to_string(in.size));
    }
  }
}

// Compiled expression node. Accesses address their target by id and map
// coordinates slot-wise: target[slot] = relative ? here[slot] + offset : offset.
struct cnode {
  enum kind_t { lit, var, bin, call, load_func, inline_func, input_read } kind = lit;
  double value = 0;
  int slot = 0;
  binary_op op = binary_op::add;
  intrinsic fn = intrinsic::exp;
  int target = -1;
  bool clamp = false;  // input_read of a clamp_edge func
  std::array<bool, max_dims> present{};
  std::array<bool, max_dims> relative{};
  std::array<std::int64_t, max_dims> offset{};
  int a = -1, b = -1;
};

struct live_buffer {
  box region;
  std::array<std::int64_t, max_dims> stride{};
  std::vector<double> data;

  std::int64_t index(const coords3& c) const {
    std::int64_t off = 0;
    for (int d = 0; d < max_dims; ++d) off += (c[d] - region[d].lo) * stride[d];
    return off;
  }
  bool contains(const coords3& c) const {
    for (int d = 0; d < max_dims; ++d) {
      if (c[d] < region[d].lo || c[d] > region[d].hi) return false;
    }
    return true;
  }
};

class interpreter {
public:
  interpreter(const pipeline& p, const schedule& s, const buffer_map& inputs, const exec_options& opts)
      : p_(p), s_(s), opts_(opts) {
    nest_ = lower(p, s, opts.lowering);
    for (const func_def& f : p.funcs) func_ids_.push_back(f.name);
    for (const input_def& in : p.inputs) {
      const buffer& b = inputs.find(in.name)->second;
      input_ptrs_.push_back(&b);
      std::array<int, max_dims> slots{0, 0, 0};
      for (std::size_t j = 0; j < in.dims.size(); ++j) slots[j] = dim_slot(in.dims[j]);
      input_slots_.push_back(slots);
    }
    const std::size_t nf = p.funcs.size();
    materialized_.assign(nf, false);
    roots_.assign(nf, -1);
    for (std::size_t i = 0; i < nf; ++i) materialized_[i] = is_materialized(s, p, p.funcs[i].name);
    for (std::size_t i = 0; i < nf; ++i) roots_[i] = compile_func(p.funcs[i]);
    stacks_.resize(nf);
    evaluations_.assign(nf, 0);
    stores_.assign(nf, 0);
    row_ = nf + p.inputs.size();
    loads_.assign(nf * row_, 0);
    uses_by_producer_.resize(nf);
    for (const use_footprint& u : nest_.uses) uses_by_producer_[func_id(u.producer)].push_back(&u);
    realization_of_.assign(nf, nullptr);
    for (const realization& r : nest_.realizations) realization_of_[func_id(r.func)] = &r;
  }

  exec_result run() {
    auto start = std::chrono::steady_clock::now();
    run_body(nest_.root, frame{});
    exec_result result;
    result.output = std::move(output_);
    instrumentation_report& rep = result.report;
    const std::size_t nf = p_.funcs.size();
    for (std::size_t i = 0; i < nf; ++i) {
      if (evaluations_[i]) rep.evaluations[func_ids_[i]] = evaluations_[i];
      if (stores_[i]) rep.stores[func_ids_[i]] = stores_[i];
      for (std::size_t j = 0; j < nf + p_.inputs.size(); ++j) {
        std::int64_t n = loads_[i * (nf + p_.inputs.size()) + j];
        if (!n) continue;
        const std::string& producer = j < nf ? func_ids_[j] : p_.inputs[j - nf].name;
        rep.loads[{func_ids_[i], producer}] = n;
      }
    }
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

private:
  struct frame {
    int owner = -1;  // -1: root
    box cov{};
  };

  int func_id(std::string_view name) const {
    for (std::size_t i = 0; i < func_ids_.size(); ++i) {
      if (func_ids_[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  int input_id(std::string_view name) const {
    for (std::size_t i = 0; i < p_.inputs.size(); ++i) {
      if (p_.inputs[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  int add(cnode n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_index(cnode& n, const std::vector<std::string>& dims, const std::vector<index_term>& index) {
    for (std::size_t j = 0; j < dims.size(); ++j) {
      int slot = dim_slot(dims[j]);
      n.present[slot] = true;
      n.relative[slot] = index[j].relative;
      n.offset[slot] = index[j].offset;
    }
  }

  int compile_func(const func_def& f) {
    if (f.kind == func_kind::clamp_edge) {
      // A materialized clamp reads its input with clamped coordinates.
      cnode n;
      n.kind = cnode::input_read;
      n.target = input_id(f.clamped_input);
      n.clamp = true;
      for (const std::string& d : f.dims) {
        int slot = dim_slot(d);
        n.present[slot] = true;
        n.relative[slot] = true;
      }
      return add(n);
    }
    return compile(f.body);
  }

  int compile(const expr& e) {
    cnode n;
    switch (e->kind) {
    case expr_kind::literal: n.kind = cnode::lit; n.value = e->value; break;
    case expr_kind::param: n.kind = cnode::lit; n.value = *p_.param(e->name); break;
    case expr_kind::var: n.kind = cnode::var; n.slot = dim_slot(e->name); break;
    case expr_kind::binary:
      n.kind = cnode::bin;
      n.op = e->op;
      n.a = compile(e->args[0]);
      n.b = compile(e->args[1]);
      break;
    case expr_kind::call:
      n.kind = cnode::call;
      n.fn = e->fn;
      n.a = compile(e->args[0]);
      break;
    case expr_kind::access: {
      set_index(n, p_.dims_of(e->name), e->index);
      if (int in = input_id(e->name); in >= 0) {
        n.kind = cnode::input_read;
        n.target = in;
      } else {
        n.target = func_id(e->name);
        n.kind = materialized_[n.target] ? cnode::load_func : cnode::inline_func;
      }
      break;
    }
    }
    return add(n);
  }

  [[noreturn]] void out_of_region(int consumer, int producer, const coords3& at) const {
    std::string where;
    for (int d = 0; d < max_dims; ++d) where += (d ? "," : "") + std::to_string(at[d]);
    throw error(error_kind::read_out_of_region, "'" + func_ids_[consumer] + "' read '" + func_ids_[producer] + "' at (" +
                                                    where + ") outside its computed region");
  }

  double eval(int id, const coords3& here) {
    const cnode& n = nodes_[id];
    switch (n.kind) {
    case cnode::lit: return n.value;
    case cnode::var: return static_cast<double>(here[n.slot]);
    case cnode::bin: {
      double a = eval(n.a, here);
      double b = eval(n.b, here);
      return apply(n.op, a, b);
    }
    case cnode::call: return apply(n.fn, eval(n.a, here));
    case cnode::load_func: {
      coords3 at = target_coords(n, here);
      const std::vector<live_buffer>& st = stacks_[n.target];
      ++loads_[current_ * row_ + n.target];
      if (st.empty() || !st.back().contains(at)) out_of_region(current_, n.target, at);
      return st.back().data[st.back().index(at)];
    }
    case cnode::inline_func: {
      coords3 at = target_coords(n, here);
      ++evaluations_[n.target];
      return eval(roots_[n.target], at);
    }
    case cnode::input_read: {
      coords3 at = target_coords(n, here);
      const buffer& b = *input_ptrs_[n.target];
      ++loads_[current_ * row_ + p_.funcs.size() + n.target];
      return b.data[static_cast<std::size_t>(input_offset(n.target, at, n.clamp))];
    }
    }
    return 0;
  }

  std::int64_t input_offset(int input, const coords3& at, bool clamp) const {
    const buffer& b = *input_ptrs_[input];
    std::int64_t off = 0;
    std::int64_t stride = 1;
    for (std::size_t j = 0; j < b.extent.size(); ++j) {
      int d = input_slots_[input][j];
      std::int64_t v = at[d];
      if (clamp) v = std::clamp<std::int64_t>(v, 0, b.extent[j] - 1);
      if (v < 0 || v >= b.extent[j]) {
        throw error(error_kind::read_out_of_region,
                    "'" + func_ids_[current_] + "' read input '" + p_.inputs[input].name + "' out of bounds");
      }
      off += v * stride;
      stride *= b.extent[j];
    }
    return off;
  }

  static coords3 target_coords(const cnode& n, const coords3& here) {
    coords3 at{0, 0, 0};
    for (int d = 0; d < max_dims; ++d) {
      if (n.present[d]) at[d] = n.relative[d] ? here[d] + n.offset[d] : n.offset[d];
    }
    return at;
  }

  bool has_dim(int func, int slot) const {
    for (const std::string& d : p_.funcs[func].dims) {
      if (dim_slot(d) == slot) return true;
    }
    return false;
  }

  box full_output() const {
    box b{};
    const std::vector<std::string>& dims = p_.dims_of(p_.output);
    for (std::size_t i = 0; i < dims.size(); ++i) b[dim_slot(dims[i])] = {0, p_.output_extent.sizes[i] - 1};
    return b;
  }

  // Region of `func` needed within one iteration of the frame.
  interval as_if(int func, const frame& f, int d, std::vector<std::optional<interval>>& memo) {
    if (!has_dim(func, d)) return {0, 0};
    if (memo[func]) return *memo[func];
    std::optional<interval> acc;
    for (const use_footprint* u : uses_by_producer_[func]) {
      int consumer = func_id(u->consumer);
      if (u->relative[d]) {
        interval src;
        if (f.owner >= 0 && consumer == f.owner) {
          src = f.cov[d];
        } else if (u->consumer == p_.output) {
          src = full_output()[d];
        } else {
          src = as_if(consumer, f, d, memo);
        }
        interval v{src.lo + u->relative[d]->lo, src.hi + u->relative[d]->hi};
        acc = acc ? hull(*acc, v) : v;
      }
      if (u->absolute[d]) acc = acc ? hull(*acc, *u->absolute[d]) : *u->absolute[d];
    }
    interval r = acc ? *acc : interval{0, 0};
    memo[func] = r;
    return r;
  }

  box region_of(int func, const frame& f) {
    if (func_ids_[func] == p_.output) return full_output();
    box b{};
    for (int d = 0; d < max_dims; ++d) {
      std::vector<std::optional<interval>> memo(p_.funcs.size());
      b[d] = as_if(func, f, d, memo);
    }
    if (opts_.shrink && opts_.shrink->func == func_ids_[func]) {
      interval& i = b[opts_.shrink->dim];
      if (i.extent() > 1) (opts_.shrink->at_lo ? i.lo += 1 : i.hi -= 1);
    }
    return b;
  }

  void run_body(const std::vector<body_item>& items, const frame& f) {
    std::vector<int> pushed;
    for (const body_item& item : items) {
      if (!item.is_block) {
        compute(f);
        continue;
      }
      const loop_block& b = nest_.blocks[item.index];
      int func = func_id(b.func);
      if (func != f.owner) {
        live_buffer lb;
        lb.region = region_of(func, f);
        std::int64_t stride = 1;
        for (int d = 0; d < max_dims; ++d) {
          lb.stride[d] = stride;
          stride *= lb.region[d].extent();
        }
        lb.data.assign(static_cast<std::size_t>(stride), 0.0);
        stacks_[func].push_back(std::move(lb));
        pushed.push_back(func);
        enter(b, func, stacks_[func].back().region);
      } else {
        enter(b, func, f.cov);
      }
    }
    for (auto it = pushed.rbegin(); it != pushed.rend(); ++it) {
      if (func_ids_[*it] == p_.output) save_output(stacks_[*it].back());
      stacks_[*it].pop_back();
    }
  }

  static std::vector<interval> tiles(const interval& r, std::int64_t range) {
    std::vector<interval> out;
    std::int64_t t = (r.extent() + range - 1) / range;
    for (std::int64_t i = 0; i < range; ++i) {
      std::int64_t lo = r.lo + i * t;
      if (lo > r.hi) break;
      out.push_back({lo, std::min(lo + t - 1, r.hi)});
    }
    return out;
  }

  void enter(const loop_block& b, int func, const box& cov) {
    const realization& r = *realization_of_[func];
    switch (b.level) {
    case block_level::outer_external: {
      std::vector<interval> xs = has_dim(func, 0) ? tiles(cov[0], r.split->range_x) : std::vector<interval>{cov[0]};
      std::vector<interval> ys = has_dim(func, 1) ? tiles(cov[1], r.split->range_y) : std::vector<interval>{cov[1]};
      for (const interval& tx : xs) {
        for (const interval& ty : ys) {
          box t = cov;
          t[0] = tx;
          t[1] = ty;
          run_body(b.body, frame{func, t});
        }
      }
      break;
    }
    case block_level::inner_external:
      for (std::int64_t y = cov[1].lo; y <= cov[1].hi; ++y) {
        box row = cov;
        row[1] = {y, y};
        run_body(b.body, frame{func, row});
      }
      break;
    case block_level::vectorized_inner: run_body(b.body, frame{func, cov}); break;
    }
  }

  void compute(const frame& f) {
    const int func = f.owner;
    live_buffer& out = stacks_[func].back();
    const int root = roots_[func];
    const int saved = current_;
    current_ = func;
    coords3 c{0, 0, 0};
    for (c[0] = f.cov[0].lo; c[0] <= f.cov[0].hi; ++c[0]) {
      for (c[1] = f.cov[1].lo; c[1] <= f.cov[1].hi; ++c[1]) {
        for (c[2] = f.cov[2].lo; c[2] <= f.cov[2].hi; ++c[2]) {
          double v = eval(root, c);
          ++evaluations_[func];
          if (!out.contains(c)) out_of_region(func, func, c);
          out.data[out.index(c)] = v;
          ++stores_[func];
        }
      }
    }
    current_ = saved;
  }

  void save_output(const live_buffer& lb) {
    const std::vector<std::string>& dims = p_.dims_of(p_.output);
    output_ = buffer(p_.output_extent.sizes);
    std::vector<std::int64_t> at(dims.size());
    for (std::int64_t i = 0; i < output_.size(); ++i) {
      std::int64_t rest = i;
      coords3 c{0, 0, 0};
      for (std::size_t j = 0; j < dims.size(); ++j) {
        c[dim_slot(dims[j])] = rest % output_.extent[j];
        rest /= output_.extent[j];
      }
      output_.data[static_cast<std::size_t>(i)] = lb.data[lb.index(c)];
    }
  }

  const pipeline& p_;
  const schedule& s_;
  const exec_options& opts_;
  loop_nest nest_;
  std::vector<std::string> func_ids_;
  std::vector<const buffer*> input_ptrs_;
  std::vector<std::array<int, max_dims>> input_slots_;
  std::vector<bool> materialized_;
  std::vector<int> roots_;
  std::vector<cnode> nodes_;
  std::vector<std::vector<live_buffer>> stacks_;
  std::vector<std::vector<const use_footprint*>> uses_by_producer_;
  std::vector<const realization*> realization_of_;
  std::vector<std::int64_t> evaluations_, stores_, loads_;
  std::size_t row_ = 0;
  int current_ = -1;
  buffer output_;
};

}  // namespace

exec_result execute(const pipeline& p, const schedule& s, const buffer_map& inputs, const exec_options& opts) {
  check_inputs(p, inputs);
  interpreter it(p, s, inputs, opts);
  return it.run();
}

namespace {

class reference_evaluator {
public:
  reference_evaluator(const pipeline& p, const buffer_map& inputs) : p_(p), inputs_(inputs) {}

  double func(const std::string& name, const std::map<std::string, std::int64_t>& at) {
    if (const input_def* in = p_.find_input(name)) return read_input(*in, at, false);
    const func_def& f = *p_.find_func(name);
    if (f.kind == func_kind::clamp_edge) return read_input(*p_.find_input(f.clamped_input), at, true);
    return value(f.body, at);
  }

private:
  double read_input(const input_def& in, const std::map<std::string, std::int64_t>& at, bool clamp) {
    const buffer& b = inputs_.find(in.name)->second;
    std::vector<std::int64_t> c;
    for (std::size_t j = 0; j < in.dims.size(); ++j) {
      std::int64_t v = at.at(in.dims[j]);
      if (clamp) v = std::clamp<std::int64_t>(v, 0, b.extent[j] - 1);
      if (v < 0 || v >= b.extent[j]) throw error(error_kind::read_out_of_region, "read outside input '" + in.name + "'");
      c.push_back(v);
    }
    return b.at(c);
  }

  double value(const expr& e, const std::map<std::string, std::int64_t>& at) {
    switch (e->kind) {
    case expr_kind::literal: return e->value;
    case expr_kind::param: return *p_.param(e->name);
    case expr_kind::var: return static_cast<double>(at.at(e->name));
    case expr_kind::binary: {
      double a = value(e->args[0], at);
      double b = value(e->args[1], at);
      return apply(e->op, a, b);
    }
    case expr_kind::call: return apply(e->fn, value(e->args[0], at));
    case expr_kind::access: {
      const std::vector<std::string>& dims = p_.dims_of(e->name);
      std::map<std::string, std::int64_t> next;
      for (std::size_t j = 0; j < dims.size(); ++j) {
        const index_term& t = e->index[j];
        next[dims[j]] = t.relative ? at.at(dims[j]) + t.offset : t.offset;
      }
      return func(e->name, next);
    }
    }
    return 0;
  }

  const pipeline& p_;
  const buffer_map& inputs_;
};

}  // namespace

buffer reference_execute(const pipeline& p, const buffer_map& inputs) {
  check_inputs(p, inputs);
  reference_evaluator ev(p, inputs);
  const std::vector<std::string>& dims = p.dims_of(p.output);
  buffer out(p.output_extent.sizes);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    std::int64_t rest = i;
    std::map<std::string, std::int64_t> at;
    for (std::size_t j = 0; j < dims.size(); ++j) {
      at[dims[j]] = rest % out.extent[j];
      rest /= out.extent[j];
    }
    out.data[static_cast<std::size_t>(i)] = ev.func(p.output, at);
  }
  return out;
}

buffer_map random_inputs(const pipeline& p, std::uint64_t seed) {
  buffer_map m;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (const input_def& in : p.inputs) {
    buffer b(in.size.sizes);
    for (double& v : b.data) v = dist(rng);
    m.emplace(in.name, std::move(b));
  }
  return m;
}

buffer_map constant_inputs(const pipeline& p, double value) {
  buffer_map m;
  for (const input_def& in : p.inputs) {
    buffer b(in.size.sizes);
    std::fill(b.data.begin(), b.data.end(), value);
    m.emplace(in.name, std::move(b));
  }
  return m;
}

}  // namespace tileguide
