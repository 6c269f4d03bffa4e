#ifndef TILEGUIDE_GUIDE_H
#define TILEGUIDE_GUIDE_H

#include <cstdint>
#include <string>
#include <vector>

#include "tileguide/cost_model.h"
#include "tileguide/lower.h"
#include "tileguide/pipeline.h"
#include "tileguide/schedule.h"

namespace tileguide {

enum class guide_phase { compute_location, tile_range, done };

const char* to_string(guide_phase ph);

struct guide_option {
  std::string id;  // "<cursor>:loc:<where>" or "<cursor>:tile:<x>x<y>"
  std::string description;
  cost_estimate cost;
  double display_cost = 0;
  location choice;  // compute_location phase
  std::int64_t range_x = 0, range_y = 0;  // tile_range phase
};

struct instruction {
  std::string text;
  std::string highlighted_func;  // empty when done
  cost_estimate current_cost;
};

// One recorded user action; replaying a log from a fresh session reproduces
// the state it was recorded on.
struct guide_action {
  enum kind_t { choose, custom_tile, undo } kind = choose;
  std::string option_id;
  std::int64_t range_x = 0, range_y = 0;

  bool operator==(const guide_action&) const = default;
};

class guided_session {
public:
  guided_session(pipeline p, machine_params m = {});

  const pipeline& source() const { return pipeline_; }
  const machine_params& machine() const { return machine_; }
  const std::vector<std::string>& order() const { return order_; }
  int cursor() const { return state_.cursor; }
  guide_phase phase() const { return state_.phase; }
  const schedule& current_schedule() const { return state_.sched; }
  const std::vector<guide_action>& log() const { return log_; }
  std::size_t history_size() const { return history_.size(); }
  // Funcs highlighted so far, in order, including the current one.
  const std::vector<std::string>& visited() const { return state_.visited; }

  instruction current_instruction() const;
  // Throws session_done in the done phase.
  const std::vector<guide_option>& list_options() const;

  // Throws stale_option for ids not among the current options.
  void choose(const std::string& option_id);
  void custom_tile(std::int64_t range_x, std::int64_t range_y);
  void undo();
  void apply(const guide_action& a);

  std::string export_schedule() const;
  loop_nest current_nest() const;

  static guided_session replay(pipeline p, const machine_params& m, const std::vector<guide_action>& log);

private:
  struct state {
    int cursor = 0;
    guide_phase phase = guide_phase::done;
    schedule sched;
    std::vector<guide_option> options;
    std::vector<std::string> visited;
  };

  void enter_func(int cursor);
  void enter_tile_or_next(int cursor);
  void refresh_options();
  bool tiling_applicable(const std::string& func) const;
  void commit(schedule next, bool was_tile);

  pipeline pipeline_;
  machine_params machine_;
  std::vector<std::string> order_;
  state state_;
  std::vector<state> history_;
  std::vector<guide_action> log_;
};

}  // namespace tileguide

#endif  // TILEGUIDE_GUIDE_H
