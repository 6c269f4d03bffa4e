#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support.h"
#include "tileguide/error.h"
#include "tileguide/pipeline.h"

namespace tileguide {
namespace {

using testing::gaussian;
using testing::unsharp;

error_kind parse_error_kind(const std::string& text) {
  try {
    parse_pipeline(text);
  } catch (const error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a parse error for:\n" << text;
  return error_kind::io;
}

std::string parse_error_message(const std::string& text) {
  try {
    parse_pipeline(text);
  } catch (const error& e) {
    return e.what();
  }
  return "";
}

TEST(pipeline, gaussian_corpus) {
  pipeline p = gaussian();
  std::vector<std::string> names;
  for (const func_def& f : p.funcs) names.push_back(f.name);
  EXPECT_EQ(names, (std::vector<std::string>{"kernel", "bounded", "blur_y", "blur"}));
  EXPECT_EQ(p.output, "blur");
  EXPECT_EQ(p.output_extent.sizes, (std::vector<std::int64_t>{256, 256}));
  ASSERT_EQ(p.inputs.size(), 1u);
  EXPECT_EQ(p.inputs[0].name, "input");
  EXPECT_EQ(p.find_func("bounded")->kind, func_kind::clamp_edge);
  EXPECT_EQ(p.find_func("bounded")->clamped_input, "input");
  EXPECT_EQ(p.find_func("bounded")->dims, (std::vector<std::string>{"x", "y"}));
  EXPECT_DOUBLE_EQ(*p.param("sigma"), 1.5);
}

TEST(pipeline, unsharp_corpus) {
  pipeline p = unsharp();
  EXPECT_EQ(p.funcs.size(), 8u);
  EXPECT_EQ(p.output, "unsharp");
  EXPECT_EQ(p.find_func("unsharp")->dims, (std::vector<std::string>{"x", "y", "c"}));
  EXPECT_EQ(p.output_extent.sizes, (std::vector<std::int64_t>{2560, 1600, 3}));
}

TEST(pipeline, single_func) {
  pipeline p = parse_pipeline("pipeline one\nfunc f(x, y) = 1\noutput f : 1x1\n");
  EXPECT_EQ(inverse_topological_order(p), (std::vector<std::string>{"f"}));
}

TEST(pipeline, errors) {
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc f(x, y) = f(x-1, y)\noutput f : 4x4\n"), error_kind::cyclic_dependency);
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc f(x, y) = g(x, y)\noutput f : 4x4\n"), error_kind::unknown_identifier);
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc f(x, y) = x + q\noutput f : 4x4\n"), error_kind::unknown_identifier);
  EXPECT_EQ(parse_error_kind("pipeline p\ninput a(x, y) : 4x4\nfunc f(x, y) = a(x)\noutput f : 4x4\n"),
            error_kind::arity_mismatch);
  EXPECT_EQ(parse_error_kind("pipeline p\ninput a(x, y) : 4x4\nfunc f(x, y) = a(2*x, y)\noutput f : 4x4\n"),
            error_kind::non_affine_access);
  EXPECT_EQ(parse_error_kind("pipeline p\ninput a(x, y) : 4x4\nfunc f(x, y) = a(y, x)\noutput f : 4x4\n"),
            error_kind::non_affine_access);
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc f(x, y) = (x + 1\noutput f : 4x4\n"), error_kind::syntax);
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc f(x, y) = x $ 1\noutput f : 4x4\n"), error_kind::syntax);
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc g(x, y) = x\nfunc h(x, y) = g(x, y) + g(x, y-1)\nfunc f(x, y) = h(x, y) + h(x, y+1)\n"
                             "func f(x, y) = 1\noutput f : 4x4\n"),
            error_kind::invalid_pipeline);
  // Mutual recursion is a cycle through two funcs.
  EXPECT_EQ(parse_error_kind("pipeline p\nfunc f(x, y) = g(x, y)\nfunc g(x, y) = f(x+1, y)\noutput f : 4x4\n"),
            error_kind::cyclic_dependency);
}

TEST(pipeline, error_spans) {
  std::string msg = parse_error_message("pipeline p\nfunc f(x, y) = x +\noutput f : 4x4\n");
  EXPECT_EQ(msg.rfind("2:", 0), 0u) << msg;
  msg = parse_error_message("pipeline p\nfunc f(x, y) = gg(x, y)\noutput f : 4x4\n");
  EXPECT_EQ(msg.rfind("2:16:", 0), 0u) << msg;
}

// Every permutation in which each consumer precedes its producers.
std::vector<std::vector<std::string>> all_inverse_orders(const pipeline& p) {
  std::vector<std::string> names;
  for (const func_def& f : p.funcs) names.push_back(f.name);
  std::sort(names.begin(), names.end());
  std::vector<std::vector<std::string>> out;
  do {
    bool ok = true;
    for (std::size_t i = 0; i < names.size() && ok; ++i) {
      for (const std::string& prod : direct_producers(p, names[i])) {
        auto it = std::find(names.begin(), names.end(), prod);
        if (it != names.end() && it < names.begin() + static_cast<std::ptrdiff_t>(i)) ok = false;
      }
    }
    if (ok) out.push_back(names);
  } while (std::next_permutation(names.begin(), names.end()));
  return out;
}

// The reverse of the producer-first order whose declaration indices are
// lexicographically smallest.
std::vector<std::string> tie_break_oracle(const pipeline& p, std::vector<std::vector<std::string>> orders) {
  auto key = [&](const std::vector<std::string>& inverse) {
    std::vector<int> k;
    for (auto it = inverse.rbegin(); it != inverse.rend(); ++it) k.push_back(p.declaration_index(*it));
    return k;
  };
  return *std::min_element(orders.begin(), orders.end(),
                           [&](const auto& a, const auto& b) { return key(a) < key(b); });
}

TEST(pipeline, inverse_topological_order_brute_force) {
  for (const pipeline& p : {gaussian(), unsharp()}) {
    std::vector<std::string> order = inverse_topological_order(p);
    auto valid = all_inverse_orders(p);
    EXPECT_NE(std::find(valid.begin(), valid.end(), order), valid.end());
    EXPECT_EQ(order, tie_break_oracle(p, valid));
    EXPECT_EQ(order.front(), p.output);
  }
  EXPECT_EQ(inverse_topological_order(gaussian()), (std::vector<std::string>{"blur", "blur_y", "bounded", "kernel"}));
  EXPECT_EQ(inverse_topological_order(unsharp()),
            (std::vector<std::string>{"unsharp", "ratio", "sharpen", "blur", "blur_y", "gray", "bounded", "kernel"}));
}

TEST(pipeline, footprints) {
  pipeline p = gaussian();
  footprint f = compute_footprint(p, "blur", "blur_y");
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].dim, "x");
  EXPECT_EQ(*f[0].relative, (interval{-3, 3}));
  EXPECT_EQ(*f[1].relative, (interval{0, 0}));
  f = compute_footprint(p, "blur_y", "bounded");
  EXPECT_EQ(*f[0].relative, (interval{0, 0}));
  EXPECT_EQ(*f[1].relative, (interval{-3, 3}));
  f = compute_footprint(p, "blur", "kernel");
  ASSERT_EQ(f.size(), 1u);
  EXPECT_FALSE(f[0].relative);
  EXPECT_EQ(*f[0].absolute, (interval{0, 3}));

  pipeline id = parse_pipeline("pipeline p\ninput a(x, y) : 4x4\nfunc g(x, y) = a(x, y)\noutput g : 4x4\n");
  f = compute_footprint(id, "g", "a");
  EXPECT_EQ(*f[0].relative, (interval{0, 0}));
  EXPECT_EQ(*f[1].relative, (interval{0, 0}));

  try {
    compute_footprint(p, "blur", "bounded");
    ADD_FAILURE() << "expected no_dependency";
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::no_dependency);
  }
}

TEST(pipeline, ops_per_point) {
  pipeline p = parse_pipeline(
      "pipeline p\ninput a(x, y) : 4x4\ninput b(x, y) : 4x4\nfunc g(x, y) = a(x, y)\nfunc h(x, y) = a(x, y) + b(x, y)\n"
      "func k(x, y) = exp(g(x, y)) + h(x, y)\noutput k : 4x4\n");
  EXPECT_EQ(ops_per_point(*p.find_func("g")), 0);
  EXPECT_EQ(ops_per_point(*p.find_func("h")), 1);
  EXPECT_EQ(ops_per_point(*p.find_func("k")), 11);
  EXPECT_EQ(ops_per_point(*p.find_func("k"), 3), 4);
  EXPECT_EQ(ops_per_point(*gaussian().find_func("blur")), 10);
}

TEST(pipeline, dependency_graph_view) {
  pipeline p = gaussian();
  graph_view g = dependency_graph_view(p, std::string("blur_y"));
  EXPECT_EQ(g.nodes.size(), 4u);
  EXPECT_EQ(g.inputs, (std::vector<std::string>{"input"}));
  std::vector<std::pair<std::string, std::string>> edges = g.edges;
  std::sort(edges.begin(), edges.end());
  std::vector<std::pair<std::string, std::string>> expected{
      {"blur_y", "blur"}, {"bounded", "blur_y"}, {"input", "bounded"}, {"kernel", "blur"}, {"kernel", "blur_y"}};
  EXPECT_EQ(edges, expected);
  int flagged = 0;
  for (const graph_node& n : g.nodes) {
    if (n.highlighted) {
      ++flagged;
      EXPECT_EQ(n.name, "blur_y");
    }
  }
  EXPECT_EQ(flagged, 1);

  g = dependency_graph_view(p);
  for (const graph_node& n : g.nodes) EXPECT_FALSE(n.highlighted);

  g = dependency_graph_view(unsharp(), std::string("ratio"));
  for (const graph_node& n : g.nodes) EXPECT_EQ(n.highlighted, n.name == "ratio");

  EXPECT_THROW(dependency_graph_view(p, std::string("nope")), error);
}

TEST(pipeline, print_round_trip) {
  for (const pipeline& p : {gaussian(), unsharp()}) {
    pipeline again = parse_pipeline(print_pipeline(p));
    EXPECT_TRUE(structurally_equal(p, again)) << print_pipeline(p);
    EXPECT_EQ(print_pipeline(again), print_pipeline(p));
  }
}

TEST(pipeline, print_keeps_non_associative_grouping) {
  pipeline p = parse_pipeline("pipeline p\nfunc f(x, y) = x - (y - 1) / (2 / (x + 1)) - -3\noutput f : 4x4\n");
  pipeline again = parse_pipeline(print_pipeline(p));
  EXPECT_TRUE(structurally_equal(p, again)) << print_pipeline(p);
}

TEST(pipeline, expand_composes_inlined_offsets) {
  pipeline p = gaussian();
  auto nothing = [&](std::string_view f) { return f == "blur"; };
  expansion e = expand(p, "blur", nothing);
  // 7 blur_y calls x 7 bounded reads each, all through the clamp.
  EXPECT_EQ(e.loads.size(), 49u);
  for (const access_site& a : e.loads) {
    EXPECT_EQ(a.producer, "input");
    EXPECT_TRUE(a.through_clamp);
  }
  EXPECT_EQ(e.inline_calls.at("blur_y"), 7);
  EXPECT_EQ(e.inline_calls.at("bounded"), 49);
  EXPECT_EQ(e.inline_calls.at("kernel"), 4 + 7 * 4);
  EXPECT_EQ(e.ops, 10 + 7 * 10 + 32 * 28);
}

TEST(pipeline, resize) {
  pipeline p = resize_pipeline(unsharp(), 64, 48);
  EXPECT_EQ(p.output_extent.sizes, (std::vector<std::int64_t>{64, 48, 3}));
  EXPECT_EQ(p.inputs[0].size.sizes, (std::vector<std::int64_t>{64, 48, 3}));
}

}  // namespace
}  // namespace tileguide
