#include "tileguide/guide.h"

#include <algorithm>

#include "tileguide/error.h"

namespace tileguide {

const char* to_string(guide_phase ph) {
  switch (ph) {
  case guide_phase::compute_location: return "compute_location";
  case guide_phase::tile_range: return "tile_range";
  case guide_phase::done: return "done";
  }
  return "?";
}

namespace {

std::string where(const location& loc) {
  if (!loc) return "inline";
  if (loc->is_root()) return "root";
  std::string s;
  for (std::size_t i = 0; i < loc->path.size(); ++i) s += (i ? "/" : "") + loc->path[i];
  return s;
}

}  // namespace

guided_session::guided_session(pipeline p, machine_params m)
    : pipeline_(std::move(p)), machine_(m), order_(inverse_topological_order(pipeline_)) {
  machine_.validate();
  state_.sched = default_schedule(pipeline_);
  enter_func(0);
}

bool guided_session::tiling_applicable(const std::string& func) const {
  if (!is_materialized(state_.sched, pipeline_, func)) return false;
  loop_nest n = lower(pipeline_, state_.sched, machine_.lowering());
  std::array<std::int64_t, 2> ext = *split_extents(n, pipeline_, func);
  const std::vector<std::string>& dims = pipeline_.dims_of(func);
  auto has = [&](const char* d) { return std::find(dims.begin(), dims.end(), d) != dims.end(); };
  if (!has("x") && !has("y")) return false;
  if (has("x") && ext[0] < 4) return false;
  if (has("y") && ext[1] < 4) return false;
  return true;
}

void guided_session::enter_func(int cursor) {
  if (cursor >= static_cast<int>(order_.size())) {
    state_.cursor = static_cast<int>(order_.size());
    state_.phase = guide_phase::done;
    state_.options.clear();
    return;
  }
  const std::string& f = order_[cursor];
  if (f == pipeline_.output) {
    enter_tile_or_next(cursor);
    return;
  }
  state_.cursor = cursor;
  state_.phase = guide_phase::compute_location;
  state_.visited.push_back(f);
  refresh_options();
}

void guided_session::enter_tile_or_next(int cursor) {
  const std::string& f = order_[cursor];
  if (!tiling_applicable(f)) {
    enter_func(cursor + 1);
    return;
  }
  if (state_.visited.empty() || state_.visited.back() != f || state_.cursor != cursor) state_.visited.push_back(f);
  state_.cursor = cursor;
  state_.phase = guide_phase::tile_range;
  refresh_options();
}

void guided_session::refresh_options() {
  state_.options.clear();
  const std::string& f = order_[state_.cursor];
  const std::string prefix = std::to_string(state_.cursor);
  std::vector<double> totals;
  if (state_.phase == guide_phase::compute_location) {
    for (location_option& o : rank_compute_locations(pipeline_, state_.sched, f, machine_)) {
      guide_option g;
      g.id = prefix + ":loc:" + where(o.choice);
      g.description = o.choice ? (o.choice->is_root() ? "compute at root" : "compute at " + where(o.choice)) : "inline";
      g.choice = o.choice;
      g.cost = std::move(o.cost);
      totals.push_back(g.cost.total);
      state_.options.push_back(std::move(g));
    }
  } else {
    for (tile_option& o : rank_tile_suggestions(pipeline_, state_.sched, f, machine_)) {
      guide_option g;
      g.id = prefix + ":tile:" + std::to_string(o.range_x) + "x" + std::to_string(o.range_y);
      g.description = "x: " + std::to_string(o.range_x) + ", y: " + std::to_string(o.range_y);
      g.range_x = o.range_x;
      g.range_y = o.range_y;
      g.cost = std::move(o.cost);
      totals.push_back(g.cost.total);
      state_.options.push_back(std::move(g));
    }
  }
  std::vector<double> shown = display_costs(totals);
  for (std::size_t i = 0; i < shown.size(); ++i) state_.options[i].display_cost = shown[i];
}

instruction guided_session::current_instruction() const {
  instruction ins;
  ins.current_cost = estimate(pipeline_, state_.sched, machine_);
  switch (state_.phase) {
  case guide_phase::tile_range:
    ins.highlighted_func = order_[state_.cursor];
    ins.text = "Choose or type the tile range of Func " + ins.highlighted_func + ".";
    break;
  case guide_phase::compute_location:
    ins.highlighted_func = order_[state_.cursor];
    ins.text = "Choose the compute location of Func " + ins.highlighted_func + ".";
    break;
  case guide_phase::done: ins.text = "Done!"; break;
  }
  return ins;
}

const std::vector<guide_option>& guided_session::list_options() const {
  if (state_.phase == guide_phase::done) throw error(error_kind::session_done, "the session is done; there are no options");
  return state_.options;
}

void guided_session::commit(schedule next, bool was_tile) {
  history_.push_back(state_);
  state_.sched = std::move(next);
  if (was_tile) {
    enter_func(state_.cursor + 1);
  } else {
    enter_tile_or_next(state_.cursor);
  }
}

void guided_session::choose(const std::string& option_id) {
  if (state_.phase == guide_phase::done) throw error(error_kind::session_done, "the session is done; nothing to choose");
  auto it = std::find_if(state_.options.begin(), state_.options.end(),
                         [&](const guide_option& o) { return o.id == option_id; });
  if (it == state_.options.end()) {
    throw error(error_kind::stale_option, "option '" + option_id + "' is not offered in the current state");
  }
  const std::string& f = order_[state_.cursor];
  const lower_options opts = machine_.lowering();
  if (state_.phase == guide_phase::compute_location) {
    schedule next = apply_compute_location(pipeline_, state_.sched, f, it->choice, opts);
    log_.push_back({guide_action::choose, option_id, 0, 0});
    commit(std::move(next), false);
  } else {
    schedule next = apply_tile_range(pipeline_, state_.sched, f, it->range_x, it->range_y, opts);
    log_.push_back({guide_action::choose, option_id, 0, 0});
    commit(std::move(next), true);
  }
}

void guided_session::custom_tile(std::int64_t range_x, std::int64_t range_y) {
  if (state_.phase == guide_phase::done) throw error(error_kind::session_done, "the session is done; nothing to tile");
  if (state_.phase != guide_phase::tile_range) {
    throw error(error_kind::tiling_not_applicable, std::string("custom tile ranges need the tile_range phase, not ") +
                                                       to_string(state_.phase));
  }
  schedule next = apply_tile_range(pipeline_, state_.sched, order_[state_.cursor], range_x, range_y, machine_.lowering());
  log_.push_back({guide_action::custom_tile, "", range_x, range_y});
  commit(std::move(next), true);
}

void guided_session::undo() {
  if (history_.empty()) throw error(error_kind::empty_history, "nothing to undo");
  state_ = std::move(history_.back());
  history_.pop_back();
  log_.push_back({guide_action::undo, "", 0, 0});
}

void guided_session::apply(const guide_action& a) {
  switch (a.kind) {
  case guide_action::choose: choose(a.option_id); break;
  case guide_action::custom_tile: custom_tile(a.range_x, a.range_y); break;
  case guide_action::undo: undo(); break;
  }
}

std::string guided_session::export_schedule() const { return print_schedule_script(pipeline_, state_.sched); }

loop_nest guided_session::current_nest() const { return lower(pipeline_, state_.sched, machine_.lowering()); }

guided_session guided_session::replay(pipeline p, const machine_params& m, const std::vector<guide_action>& log) {
  guided_session s(std::move(p), m);
  for (const guide_action& a : log) s.apply(a);
  return s;
}

}  // namespace tileguide
