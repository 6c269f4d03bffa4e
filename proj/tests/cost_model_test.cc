#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "support.h"
#include "tileguide/cost_model.h"
#include "tileguide/error.h"
#include "tileguide/executor.h"

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

schedule per_tile(const pipeline& p, std::int64_t rx, std::int64_t ry) {
  schedule s = apply_tile_range(p, default_schedule(p), "blur", rx, ry);
  return apply_compute_location(p, s, "blur_y", valid_compute_locations(p, s, "blur_y")[2]);
}

TEST(machine, parse_and_print) {
  machine_params m = parse_machine_params("# comment\ncache_bytes = 1024\nvector_width=4\n\nweight_op = 2.5  # trailing\n");
  EXPECT_EQ(m.cache_bytes, 1024);
  EXPECT_EQ(m.vector_width, 4);
  EXPECT_EQ(m.weight_op, 2.5);
  EXPECT_EQ(m.weight_store, 2);
  machine_params back = parse_machine_params(print_machine_params(m));
  EXPECT_EQ(back.cache_bytes, m.cache_bytes);
  EXPECT_EQ(back.weight_op, m.weight_op);
  EXPECT_EQ(back.vector_width, m.vector_width);
}

TEST(machine, errors) {
  EXPECT_EQ(kind_of([] { parse_machine_params("cache_size = 3\n"); }), error_kind::syntax);
  EXPECT_EQ(kind_of([] { parse_machine_params("weight_op 3\n"); }), error_kind::syntax);
  EXPECT_EQ(kind_of([] { parse_machine_params("weight_op = three\n"); }), error_kind::syntax);
  EXPECT_EQ(kind_of([] { parse_machine_params("weight_op = 0\n"); }), error_kind::invalid_schedule);
  EXPECT_EQ(kind_of([] { parse_machine_params("cache_bytes = -1\n"); }), error_kind::invalid_schedule);
  EXPECT_EQ(kind_of([] { load_machine_params("/nonexistent/machine.cfg"); }), error_kind::io);
}

TEST(estimate, additive) {
  std::mt19937_64 rng(2);
  for (const pipeline& p : {resize_pipeline(gaussian(), 64, 64), resize_pipeline(unsharp(), 64, 64)}) {
    for (int i = 0; i < 20; ++i) {
      cost_estimate c = estimate(p, testing::random_schedule(p, rng));
      EXPECT_DOUBLE_EQ(c.total, c.load + c.store + c.compute);
      double l = 0, st = 0, co = 0;
      for (const auto& [f, fc] : c.per_func) {
        l += fc.load;
        st += fc.store;
        co += fc.compute;
      }
      EXPECT_DOUBLE_EQ(l, c.load);
      EXPECT_DOUBLE_EQ(st, c.store);
      EXPECT_DOUBLE_EQ(co, c.compute);
    }
  }
}

TEST(estimate, weights_scale_totals) {
  std::mt19937_64 rng(4);
  pipeline p = resize_pipeline(unsharp(), 48, 48);
  machine_params m;
  machine_params m3 = m;
  m3.weight_op *= 3;
  m3.weight_store *= 3;
  m3.weight_load_cached *= 3;
  m3.weight_load_uncached *= 3;
  for (int i = 0; i < 10; ++i) {
    schedule s = testing::random_schedule(p, rng);
    EXPECT_NEAR(estimate(p, s, m3).total, 3 * estimate(p, s, m).total, 1e-9 * estimate(p, s, m3).total);
  }
  pipeline g = gaussian();
  schedule s = apply_tile_range(g, default_schedule(g), "blur", 32, 16);
  auto a = rank_compute_locations(g, s, "blur_y", m);
  auto b = rank_compute_locations(g, s, "blur_y", m3);
  auto argmin = [](const std::vector<location_option>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i].cost.total < v[best].cost.total) best = i;
    }
    return best;
  };
  EXPECT_EQ(argmin(a), argmin(b));
  auto ta = rank_tile_suggestions(g, default_schedule(g), "blur", m);
  auto tb = rank_tile_suggestions(g, default_schedule(g), "blur", m3);
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].range_x, tb[i].range_x);
    EXPECT_EQ(ta[i].range_y, tb[i].range_y);
  }
}

TEST(estimate, closed_form_default) {
  // Fully inline gaussian: one store per pixel, 49 clamped input loads per
  // pixel (input is 524288 bytes, uncached), ops folded and vectorized.
  pipeline p = gaussian();
  cost_estimate c = estimate(p, default_schedule(p));
  const double px = 256 * 256;
  EXPECT_EQ(c.per_func.size(), 1u);
  EXPECT_DOUBLE_EQ(c.store, px * 2);
  EXPECT_DOUBLE_EQ(c.load, px * 49 * 8);
  EXPECT_DOUBLE_EQ(c.compute, px * (10 + 7 * 10 + 32 * 28) / 8.0);
  EXPECT_EQ(c.evaluations.at("blur_y"), 458752);
  EXPECT_EQ(c.evaluations.at("kernel"), 65536 * (4 + 7 * 4));
}

TEST(estimate, cache_threshold) {
  // Root blur_y allocates 262*256*8 bytes: uncached. Raising cache_bytes over
  // that switches blur's seven blur_y loads to the cached weight.
  pipeline p = gaussian();
  schedule s = apply_compute_location(p, default_schedule(p), "blur_y", position{});
  machine_params small;
  machine_params huge;
  huge.cache_bytes = 262.0 * 256 * 8;
  const double px = 256 * 256;
  double delta = estimate(p, s, small).per_func["blur"].load - estimate(p, s, huge).per_func["blur"].load;
  EXPECT_DOUBLE_EQ(delta, px * 7 * (8 - 1));
}

TEST(estimate, partial_schedule_defaults_to_inline) {
  pipeline p = gaussian();
  schedule s = default_schedule(p);
  EXPECT_EQ(estimate(p, s).per_func.count("blur_y"), 0u);
  EXPECT_EQ(estimate(p, s).evaluations.at("blur_y"), 458752);
}

TEST(estimate, per_tile_points_between_root_and_inline) {
  pipeline p = gaussian();
  schedule root = apply_compute_location(p, default_schedule(p), "blur_y", position{});
  EXPECT_EQ(estimate(p, root).per_func["blur_y"].points, 67072);
  EXPECT_EQ(estimate(p, per_tile(p, 32, 16)).per_func["blur_y"].points, 114688);
  for (std::int64_t r : {2, 4, 8, 16, 32, 64}) {
    std::int64_t pts = estimate(p, per_tile(p, r, r)).per_func["blur_y"].points;
    EXPECT_GT(pts, 67072) << r;
    EXPECT_LT(pts, 458752) << r;
  }
}

TEST(estimate, halo_grows_with_tile_range) {
  // More, smaller tiles recompute more halo.
  pipeline p = gaussian();
  std::int64_t prev = 0;
  for (std::int64_t r : {1, 2, 4, 8, 16, 32, 64, 128, 256}) {
    std::int64_t pts = estimate(p, per_tile(p, r, 1)).per_func["blur_y"].points;
    EXPECT_GE(pts, prev) << r;
    prev = pts;
  }
  EXPECT_EQ(prev, 256 * 7 * 256);
}

TEST(estimate, zero_op_single_pixel) {
  pipeline p = parse_pipeline("pipeline z\nfunc f(x, y) = 0\noutput f : 1x1\n");
  cost_estimate c = estimate(p, default_schedule(p));
  EXPECT_EQ(c.compute, 0);
  EXPECT_EQ(c.load, 0);
  EXPECT_EQ(c.store, machine_params{}.weight_store);
  EXPECT_EQ(c.total, machine_params{}.weight_store);
}

TEST(display, normalized) {
  EXPECT_EQ(display_costs({3100, 9400, 12000}), (std::vector<double>{0.3, 0.9, 1.2}));
  EXPECT_EQ(display_costs({5, 0.5}), (std::vector<double>{5, 0.5}));
  EXPECT_EQ(display_costs({0, 0}), (std::vector<double>{0, 0}));
  EXPECT_TRUE(display_costs({}).empty());
}

TEST(candidates, grid) {
  auto c = tile_range_candidates({16, 16}, true);
  ASSERT_EQ(c.size(), 16u);
  for (const auto& r : c) {
    EXPECT_EQ(r[0] % 4, 0);
    EXPECT_EQ(r[1] % 4, 0);
    EXPECT_LE(r[0], 16);
    EXPECT_LE(r[1], 16);
  }
  EXPECT_EQ(tile_range_candidates({8, 4}, true),
            (std::vector<std::array<std::int64_t, 2>>{{4, 4}, {8, 4}}));
  EXPECT_EQ(tile_range_candidates({9, 1}, false).size(), 2u);
  EXPECT_EQ(kind_of([] { tile_range_candidates({3, 16}, true); }), error_kind::tiling_not_applicable);
  EXPECT_EQ(kind_of([] { tile_range_candidates({16, 3}, true); }), error_kind::tiling_not_applicable);
}

TEST(candidates, large_enumeration_is_fast) {
  auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(tile_range_candidates({2560, 1600}, true).size(), 256000u);
  pipeline p = resize_pipeline(gaussian(), 2560, 1600);
  auto top = rank_tile_suggestions(p, default_schedule(p), "blur");
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(top.size(), 5u);
  EXPECT_LT(secs, 1.0);
}

TEST(suggestions, sorted_top_five) {
  std::mt19937_64 rng(8);
  for (const pipeline& p : {resize_pipeline(gaussian(), 64, 48), resize_pipeline(unsharp(), 64, 48)}) {
    for (int i = 0; i < 10; ++i) {
      schedule s = testing::random_schedule(p, rng);
      for (const auto& [f, d] : s.decisions()) {
        std::vector<tile_option> top;
        try {
          top = rank_tile_suggestions(p, s, f);
        } catch (const error& e) {
          EXPECT_EQ(e.kind(), error_kind::tiling_not_applicable);
          continue;
        }
        ASSERT_LE(top.size(), 5u);
        ASSERT_FALSE(top.empty());
        for (std::size_t k = 1; k < top.size(); ++k) EXPECT_LE(top[k - 1].cost.total, top[k].cost.total);
        for (const tile_option& t : top) {
          EXPECT_EQ(t.range_x % 4, 0);
          EXPECT_DOUBLE_EQ(t.cost.total, estimate(p, apply_tile_range(p, s, f, t.range_x, t.range_y)).total);
        }
      }
    }
  }
}

TEST(suggestions, match_exhaustive_scan) {
  // The ranking equals a brute-force scan over every candidate with full
  // re-estimation, in both the incremental and the hosting case.
  pipeline p = resize_pipeline(gaussian(), 48, 32);
  schedule plain = default_schedule(p);
  schedule hosting = per_tile(p, 4, 4);
  for (const schedule& s : {plain, hosting}) {
    std::vector<tile_option> all;
    for (const auto& c : tile_range_candidates({48, 32}, true)) {
      all.push_back({c[0], c[1], estimate(p, apply_tile_range(p, s, "blur", c[0], c[1]))});
    }
    std::stable_sort(all.begin(), all.end(), [](const tile_option& a, const tile_option& b) {
      if (a.cost.total != b.cost.total) return a.cost.total < b.cost.total;
      if (a.range_y != b.range_y) return a.range_y < b.range_y;
      return a.range_x < b.range_x;
    });
    auto top = rank_tile_suggestions(p, s, "blur");
    ASSERT_EQ(top.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(top[i].range_x, all[i].range_x) << i;
      EXPECT_EQ(top[i].range_y, all[i].range_y) << i;
      EXPECT_DOUBLE_EQ(top[i].cost.total, all[i].cost.total);
    }
  }
}

TEST(suggestions, top_beats_extremes) {
  pipeline p = gaussian();
  schedule s = per_tile(p, 32, 16);
  auto top = rank_tile_suggestions(p, s, "blur");
  ASSERT_FALSE(top.empty());
  double degenerate = estimate(p, apply_tile_range(p, s, "blur", 1, 1)).total;
  double max_range = estimate(p, apply_tile_range(p, s, "blur", 256, 256)).total;
  EXPECT_LE(top[0].cost.total, degenerate);
  EXPECT_LT(top[0].cost.total, max_range);
}

TEST(suggestions, errors) {
  pipeline p = gaussian();
  EXPECT_EQ(kind_of([&] { rank_tile_suggestions(p, default_schedule(p), "blur_y"); }),
            error_kind::tiling_not_applicable);
  EXPECT_EQ(kind_of([&] { rank_tile_suggestions(p, default_schedule(p), "nope"); }), error_kind::unknown_identifier);
  pipeline tiny = resize_pipeline(p, 3, 3);
  EXPECT_EQ(kind_of([&] { rank_tile_suggestions(tiny, default_schedule(tiny), "blur"); }),
            error_kind::tiling_not_applicable);
}

TEST(locations, four_blur_y_rows) {
  pipeline p = gaussian();
  schedule s = apply_tile_range(p, default_schedule(p), "blur", 32, 16);
  auto ranked = rank_compute_locations(p, s, "blur_y");
  ASSERT_EQ(ranked.size(), 4u);
  EXPECT_EQ(ranked[0].cost.evaluations.at("blur_y"), 458752);
  EXPECT_EQ(ranked[1].cost.evaluations.at("blur_y"), 67072);
  EXPECT_EQ(ranked[2].cost.evaluations.at("blur_y"), 114688);
  EXPECT_EQ(ranked[3].cost.evaluations.at("blur_y"), 114688);
}

}  // namespace
}  // namespace tileguide
