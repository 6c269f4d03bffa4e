#include <gtest/gtest.h>

#include <random>

#include "support.h"
#include "tileguide/error.h"
#include "tileguide/guide.h"

namespace tileguide {
namespace {

using testing::gaussian;
using testing::unsharp;

error_kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return error_kind::io;
}

bool offers(const guided_session& s, const std::string& id) {
  for (const guide_option& o : s.list_options()) {
    if (o.id == id) return true;
  }
  return false;
}

TEST(guide, walkthrough) {
  guided_session s(gaussian());
  EXPECT_EQ(s.current_instruction().text, "Choose or type the tile range of Func blur.");
  EXPECT_EQ(s.current_instruction().highlighted_func, "blur");
  ASSERT_GE(s.list_options().size(), 2u);
  EXPECT_EQ(s.list_options()[1].id, "0:tile:8x4");
  EXPECT_EQ(s.list_options()[1].description, "x: 8, y: 4");

  s.choose("0:tile:8x4");
  EXPECT_EQ(s.current_instruction().text, "Choose the compute location of Func blur_y.");
  ASSERT_EQ(s.list_options().size(), 4u);
  EXPECT_EQ(s.list_options()[0].description, "inline");
  EXPECT_EQ(s.list_options()[1].description, "compute at root");
  EXPECT_EQ(s.list_options()[2].description, "compute at blur.outer");
  EXPECT_EQ(s.list_options()[3].description, "compute at blur.outer/blur.inner");

  s.choose("1:loc:blur.outer/blur.inner");
  // blur_y's row region is 38x1: too small to tile, so its tile phase is skipped.
  EXPECT_EQ(s.current_instruction().text, "Choose the compute location of Func bounded.");
  s.choose("2:loc:inline");
  EXPECT_EQ(s.current_instruction().text, "Choose the compute location of Func kernel.");
  s.choose("3:loc:root");
  EXPECT_EQ(s.current_instruction().text, "Choose or type the tile range of Func kernel.");
  EXPECT_TRUE(offers(s, "3:tile:4x1"));
  s.choose("3:tile:4x1");
  EXPECT_EQ(s.current_instruction().text, "Done!");
  EXPECT_EQ(s.current_instruction().highlighted_func, "");
  EXPECT_EQ(s.phase(), guide_phase::done);
  EXPECT_EQ(s.visited(), (std::vector<std::string>{"blur", "blur_y", "bounded", "kernel"}));
}

TEST(guide, unsharp_first_instruction) {
  guided_session s(unsharp());
  EXPECT_EQ(s.current_instruction().text, "Choose or type the tile range of Func unsharp.");
  EXPECT_LE(s.list_options().size(), 5u);
}

TEST(guide, single_pixel_pipeline_is_done_at_once) {
  guided_session s(parse_pipeline("pipeline one\nfunc f(x, y) = 1\noutput f : 1x1\n"));
  EXPECT_EQ(s.current_instruction().text, "Done!");
  EXPECT_EQ(kind_of([&] { s.list_options(); }), error_kind::session_done);
  EXPECT_EQ(kind_of([&] { s.choose("0:tile:4x4"); }), error_kind::session_done);
  EXPECT_EQ(kind_of([&] { s.custom_tile(1, 1); }), error_kind::session_done);
  EXPECT_EQ(s.export_schedule(), "compute f at root\n");
}

TEST(guide, undo_restores_previous_state) {
  guided_session s(gaussian());
  EXPECT_EQ(kind_of([&] { s.undo(); }), error_kind::empty_history);
  const std::string first_options = s.list_options()[0].id;
  const schedule before = s.current_schedule();
  s.choose("0:tile:8x4");
  const std::string mid = s.current_instruction().text;
  s.choose("1:loc:root");
  s.undo();
  EXPECT_EQ(s.current_instruction().text, mid);
  s.undo();
  EXPECT_EQ(s.current_instruction().text, "Choose or type the tile range of Func blur.");
  EXPECT_EQ(s.current_schedule(), before);
  EXPECT_EQ(s.list_options()[0].id, first_options);
  EXPECT_EQ(kind_of([&] { s.undo(); }), error_kind::empty_history);
  EXPECT_EQ(s.history_size(), 0u);
}

TEST(guide, stale_ids_are_rejected) {
  guided_session s(gaussian());
  s.choose("0:tile:8x4");
  s.choose("1:loc:root");
  const std::string later = s.list_options()[0].id;
  s.undo();
  EXPECT_EQ(kind_of([&] { s.choose(later); }), error_kind::stale_option);
  EXPECT_EQ(kind_of([&] { s.choose("0:tile:8x4"); }), error_kind::stale_option);
  EXPECT_EQ(kind_of([&] { s.choose("bogus"); }), error_kind::stale_option);
  // Rejected actions are not logged.
  EXPECT_EQ(s.log().size(), 3u);
}

TEST(guide, custom_tile) {
  guided_session s(gaussian());
  EXPECT_EQ(kind_of([&] { s.custom_tile(0, 4); }), error_kind::out_of_range);
  EXPECT_EQ(kind_of([&] { s.custom_tile(4, 257); }), error_kind::out_of_range);
  EXPECT_EQ(s.current_instruction().text, "Choose or type the tile range of Func blur.");
  s.custom_tile(1, 1);
  EXPECT_EQ(s.current_schedule().find("blur")->split, (tile_split{1, 1}));
  EXPECT_EQ(s.phase(), guide_phase::compute_location);
  EXPECT_EQ(kind_of([&] { s.custom_tile(4, 4); }), error_kind::tiling_not_applicable);
}

TEST(guide, export_round_trip) {
  guided_session s(gaussian());
  EXPECT_EQ(s.export_schedule(), "compute blur at root\n");
  for (const char* id : {"0:tile:8x4", "1:loc:blur.outer/blur.inner", "2:loc:inline", "3:loc:root", "3:tile:4x1"}) {
    s.choose(id);
  }
  schedule back = parse_schedule_script(s.source(), s.export_schedule());
  EXPECT_EQ(back, s.current_schedule());
  EXPECT_EQ(estimate(s.source(), back).total, s.current_instruction().current_cost.total);
}

TEST(guide, replay_is_deterministic) {
  std::mt19937_64 rng(31);
  for (const pipeline& p : {resize_pipeline(gaussian(), 64, 48), resize_pipeline(unsharp(), 64, 48)}) {
    for (int run = 0; run < 5; ++run) {
      guided_session s(p);
      for (int step = 0; step < 12 && s.phase() != guide_phase::done; ++step) {
        int what = std::uniform_int_distribution<int>(0, 9)(rng);
        if (what == 0 && s.history_size() > 0) {
          s.undo();
        } else if (what == 1 && s.phase() == guide_phase::tile_range) {
          s.custom_tile(std::uniform_int_distribution<std::int64_t>(1, 3)(rng), 1);
        } else {
          const auto& opts = s.list_options();
          s.choose(opts[std::uniform_int_distribution<std::size_t>(0, opts.size() - 1)(rng)].id);
        }
      }
      guided_session r = guided_session::replay(p, s.machine(), s.log());
      EXPECT_EQ(r.current_schedule(), s.current_schedule());
      EXPECT_EQ(r.cursor(), s.cursor());
      EXPECT_EQ(r.phase(), s.phase());
      EXPECT_EQ(r.current_instruction().text, s.current_instruction().text);
      EXPECT_EQ(r.current_instruction().current_cost.total, s.current_instruction().current_cost.total);
      EXPECT_EQ(r.history_size(), s.history_size());
    }
  }
}

TEST(guide, fuzz_keeps_invariants) {
  // Random API use: every state is valid, costs are consistent, funcs are
  // highlighted in inverse topological order, and tile options follow the
  // suggestion contract.
  std::mt19937_64 rng(77);
  for (const pipeline& p : {resize_pipeline(gaussian(), 48, 40), resize_pipeline(unsharp(), 48, 40)}) {
    const std::vector<std::string> order = inverse_topological_order(p);
    for (int run = 0; run < 8; ++run) {
      guided_session s(p);
      while (s.phase() != guide_phase::done) {
        instruction ins = s.current_instruction();
        EXPECT_DOUBLE_EQ(ins.current_cost.total, estimate(p, s.current_schedule()).total);
        EXPECT_NO_THROW(lower(p, s.current_schedule()));
        const auto& opts = s.list_options();
        ASSERT_FALSE(opts.empty());
        if (s.phase() == guide_phase::tile_range) {
          EXPECT_LE(opts.size(), 5u);
          for (std::size_t i = 1; i < opts.size(); ++i) EXPECT_LE(opts[i - 1].cost.total, opts[i].cost.total);
        }
        // Visited funcs form a subsequence of the order, without undo.
        std::size_t k = 0;
        for (const std::string& f : s.visited()) {
          while (k < order.size() && order[k] != f) ++k;
          ASSERT_LT(k, order.size()) << f;
        }
        int what = std::uniform_int_distribution<int>(0, 7)(rng);
        if (what == 0 && s.history_size() > 0) {
          s.undo();
        } else {
          s.choose(opts[std::uniform_int_distribution<std::size_t>(0, opts.size() - 1)(rng)].id);
        }
      }
      EXPECT_EQ(s.current_instruction().text, "Done!");
    }
  }
}

TEST(guide, options_report_their_cost) {
  guided_session s(gaussian());
  s.choose("0:tile:8x4");
  for (const guide_option& o : s.list_options()) {
    schedule next = apply_compute_location(s.source(), s.current_schedule(), "blur_y", o.choice);
    EXPECT_DOUBLE_EQ(o.cost.total, estimate(s.source(), next).total) << o.id;
  }
}

}  // namespace
}  // namespace tileguide
