#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tileguide/cost_model.h"
#include "tileguide/error.h"
#include "tileguide/executor.h"
#include "tileguide/guide.h"
#include "tileguide/image_io.h"
#include "tileguide/lower.h"
#include "tileguide/service.h"

using namespace tileguide;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(error_kind::io, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

schedule load_schedule(const pipeline& p, const std::string& path, const machine_params& m) {
  if (path.empty()) return default_schedule(p);
  return parse_schedule_script(p, read_text(path), m.lowering());
}

machine_params load_machine(const std::string& path) { return path.empty() ? machine_params{} : load_machine_params(path); }

void print_cost(std::ostream& os, const cost_estimate& c) {
  os << std::fixed << std::setprecision(1);
  os << "total=" << c.total << " load=" << c.load << " store=" << c.store << " compute=" << c.compute << "\n";
  os << std::left << std::setw(12) << "func" << std::right << std::setw(12) << "points" << std::setw(14) << "load"
     << std::setw(14) << "store" << std::setw(14) << "compute" << "\n";
  for (const auto& [f, fc] : c.per_func) {
    os << std::left << std::setw(12) << f << std::right << std::setw(12) << fc.points << std::setw(14) << fc.load
       << std::setw(14) << fc.store << std::setw(14) << fc.compute << "\n";
  }
  os.unsetf(std::ios::floatfield);
}

void print_report(std::ostream& os, const instrumentation_report& r) {
  for (const auto& [f, n] : r.evaluations) os << "evaluations " << f << " " << n << "\n";
  for (const auto& [f, n] : r.stores) os << "stores " << f << " " << n << "\n";
  for (const auto& [k, n] : r.loads) os << "loads " << k.first << " <- " << k.second << " " << n << "\n";
  os << "wall_time " << r.wall_time << "\n";
}

void print_options(const guided_session& s) {
  const std::vector<guide_option>& options = s.list_options();
  for (std::size_t i = 0; i < options.size(); ++i) {
    std::cout << "  [" << i + 1 << "] " << std::left << std::setw(36) << options[i].description
              << " Cost: " << options[i].display_cost << "  (total " << std::fixed << std::setprecision(1)
              << options[i].cost.total << ")\n";
    std::cout.unsetf(std::ios::floatfield);
  }
}

int run_guide(guided_session& s, const std::string& export_path) {
  std::cout << "Commands: <n> choose option, t <x> <y> custom tile range, u undo, p print loop nest, q quit\n";
  std::string line;
  while (true) {
    instruction ins = s.current_instruction();
    std::cout << "\n" << ins.text << "  (current cost " << std::fixed << std::setprecision(1) << ins.current_cost.total
              << ")\n";
    std::cout.unsetf(std::ios::floatfield);
    if (s.phase() == guide_phase::done) break;
    print_options(s);
    std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    std::istringstream in(line);
    std::string cmd;
    in >> cmd;
    try {
      if (cmd == "q") {
        break;
      } else if (cmd == "u") {
        s.undo();
      } else if (cmd == "p") {
        std::cout << print_loop_nest(s.source(), s.current_nest(), true);
      } else if (cmd == "t") {
        std::int64_t x = 0, y = 0;
        if (!(in >> x >> y)) throw error(error_kind::syntax, "usage: t <range_x> <range_y>");
        s.custom_tile(x, y);
      } else {
        std::size_t n = std::stoul(cmd);
        const std::vector<guide_option>& options = s.list_options();
        if (n < 1 || n > options.size()) throw error(error_kind::out_of_range, "no option " + cmd);
        s.choose(options[n - 1].id);
      }
    } catch (const error& e) {
      std::cout << "error: " << e.what() << "\n";
    } catch (const std::logic_error&) {
      std::cout << "error: unknown command '" << cmd << "'\n";
    }
  }
  std::cout << "\n" << s.export_schedule();
  if (!export_path.empty()) {
    std::ofstream out(export_path);
    out << s.export_schedule();
  }
  return 0;
}

int default_port() {
  if (const char* env = std::getenv("TILEGUIDE_PORT")) {
    try {
      return std::stoi(env);
    } catch (const std::logic_error&) {
      std::cerr << "tileguide: ignoring invalid TILEGUIDE_PORT '" << env << "'\n";
    }
  }
  return 8080;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided scheduling of stencil image pipelines"};
  app.require_subcommand(1);

  std::string file, schedule_path, machine_path, func, output_path, export_path, size, state_dir, host = "127.0.0.1";
  std::vector<std::string> input_paths;
  bool annotate = false, locations = false, reference = false;
  std::size_t k = 5;
  int port = default_port();
  std::uint64_t seed = 1;

  CLI::App* check = app.add_subcommand("check", "Parse and validate a pipeline; print its dependency graph");
  check->add_option("file", file, "Pipeline file")->required();

  CLI::App* lower_cmd = app.add_subcommand("lower", "Print the loop nest of a schedule");
  lower_cmd->add_option("file", file, "Pipeline file")->required();
  lower_cmd->add_option("--schedule", schedule_path, "Schedule script (default: all inline)");
  lower_cmd->add_flag("--annotate", annotate, "Show block ids, markers and regions");

  CLI::App* cost = app.add_subcommand("cost", "Print the cost estimate of a schedule");
  cost->add_option("file", file, "Pipeline file")->required();
  cost->add_option("--schedule", schedule_path, "Schedule script (default: all inline)");
  cost->add_option("--machine", machine_path, "Machine parameter file");

  CLI::App* suggest = app.add_subcommand("suggest", "Rank tile ranges (or compute locations) for a func");
  suggest->add_option("file", file, "Pipeline file")->required();
  suggest->add_option("--func", func, "Func to rank options for")->required();
  suggest->add_option("--schedule", schedule_path, "Schedule script (default: all inline)");
  suggest->add_option("--machine", machine_path, "Machine parameter file");
  suggest->add_option("-k", k, "Number of tile suggestions");
  suggest->add_flag("--locations", locations, "Rank compute locations instead of tile ranges");

  CLI::App* run = app.add_subcommand("run", "Execute a schedule and report instrumentation counters");
  run->add_option("file", file, "Pipeline file")->required();
  run->add_option("--schedule", schedule_path, "Schedule script (default: all inline)");
  run->add_option("--input", input_paths, "Input images in declaration order (.pgm, .ppm, .f64); random if omitted");
  run->add_option("--output", output_path, "Output image (.pgm, .ppm, .f64)");
  run->add_option("--size", size, "Resize to WxH first, keeping the schedule's tile sizes");
  run->add_option("--seed", seed, "Seed for random inputs");
  run->add_flag("--reference", reference, "Also run the reference evaluator and compare bitwise");

  CLI::App* serve_cmd = app.add_subcommand("serve", "Host the guided-session HTTP API");
  serve_cmd->add_option("--port", port, "Port (default: $TILEGUIDE_PORT or 8080)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--state-dir", state_dir, "Directory for session persistence");

  CLI::App* guide = app.add_subcommand("guide", "Interactive guided session in the terminal");
  guide->add_option("file", file, "Pipeline file")->required();
  guide->add_option("--machine", machine_path, "Machine parameter file");
  guide->add_option("--export", export_path, "Write the final schedule script here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) {
      pipeline p = load_pipeline_file(file);
      std::cout << "pipeline " << p.name << ": " << p.funcs.size() << " funcs, " << p.inputs.size() << " inputs, output "
                << p.output << " " << to_string(p.output_extent) << "\n";
      std::cout << "order:";
      for (const std::string& f : inverse_topological_order(p)) std::cout << " " << f;
      std::cout << "\n";
      graph_view g = dependency_graph_view(p);
      for (const auto& [from, to] : g.edges) std::cout << "  " << from << " -> " << to << "\n";
      for (const func_def& f : p.funcs) std::cout << "ops " << f.name << " " << ops_per_point(f) << "\n";
      return 0;
    }
    if (serve_cmd->parsed()) {
      session_store store(state_dir.empty() ? std::nullopt : std::optional<std::string>(state_dir));
      std::cout << "serving on http://" << host << ":" << port << std::endl;
      if (!serve(store, host, port)) {
        std::cerr << "tileguide: cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }

    pipeline p = load_pipeline_file(file);
    machine_params m = load_machine(machine_path);
    if (guide->parsed()) {
      guided_session s(p, m);
      return run_guide(s, export_path);
    }
    schedule s = load_schedule(p, schedule_path, m);
    if (lower_cmd->parsed()) {
      std::cout << print_loop_nest(p, lower(p, s, m.lowering()), annotate);
    } else if (cost->parsed()) {
      print_cost(std::cout, estimate(p, s, m));
    } else if (suggest->parsed()) {
      if (locations) {
        auto ranked = rank_compute_locations(p, s, func, m);
        std::vector<double> totals;
        for (const auto& o : ranked) totals.push_back(o.cost.total);
        std::vector<double> shown = display_costs(totals);
        for (std::size_t i = 0; i < ranked.size(); ++i) {
          std::cout << std::left << std::setw(40) << describe(ranked[i].choice) << std::right << std::fixed
                    << std::setprecision(1) << std::setw(16) << ranked[i].cost.total << "  Cost: " << shown[i] << "\n";
        }
      } else {
        auto ranked = rank_tile_suggestions(p, s, func, m, k);
        std::vector<double> totals;
        for (const auto& o : ranked) totals.push_back(o.cost.total);
        std::vector<double> shown = display_costs(totals);
        std::cout << "range_x range_y           total    load   store   compute\n";
        for (std::size_t i = 0; i < ranked.size(); ++i) {
          const cost_estimate& c = ranked[i].cost;
          std::cout << std::fixed << std::setprecision(1) << std::setw(7) << ranked[i].range_x << " " << std::setw(7)
                    << ranked[i].range_y << " " << std::setw(15) << c.total << " " << c.load << " " << c.store << " "
                    << c.compute << "  Cost: " << shown[i] << "\n";
        }
      }
    } else if (run->parsed()) {
      if (!size.empty()) {
        auto x = size.find('x');
        if (x == std::string::npos) throw error(error_kind::syntax, "--size must be WxH");
        pipeline resized = resize_pipeline(p, std::stoll(size.substr(0, x)), std::stoll(size.substr(x + 1)));
        s = rescale_schedule(p, resized, s, m.lowering());
        p = resized;
      }
      buffer_map inputs;
      if (input_paths.empty()) {
        inputs = random_inputs(p, seed);
      } else {
        if (input_paths.size() != p.inputs.size()) {
          throw error(error_kind::missing_input, "expected " + std::to_string(p.inputs.size()) + " --input images");
        }
        for (std::size_t i = 0; i < p.inputs.size(); ++i) inputs.emplace(p.inputs[i].name, read_image(input_paths[i]));
      }
      exec_options opts;
      opts.lowering = m.lowering();
      exec_result r = execute(p, s, inputs, opts);
      print_report(std::cout, r.report);
      if (reference) {
        bool same = bitwise_equal(reference_execute(p, inputs), r.output);
        std::cout << "reference " << (same ? "bitwise-equal" : "DIFFERENT") << "\n";
        if (!same) return 1;
      }
      if (!output_path.empty()) write_image(output_path, r.output);
    }
    return 0;
  } catch (const error& e) {
    std::cerr << "tileguide: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tileguide: " << e.what() << "\n";
    return 1;
  }
}
