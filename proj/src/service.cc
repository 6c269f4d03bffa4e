#include "tileguide/service.h"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "httplib.h"
#include "tileguide/error.h"
#include "tileguide/executor.h"

namespace tileguide {

json to_json(const cost_estimate& c) {
  return {{"total", c.total}, {"load", c.load}, {"store", c.store}, {"compute", c.compute}};
}

json to_json(const graph_view& g) {
  json nodes = json::array();
  for (const graph_node& n : g.nodes) {
    nodes.push_back({{"name", n.name},
                     {"kind", n.kind == func_kind::clamp_edge ? "clamp_edge" : "computed"},
                     {"highlighted", n.highlighted}});
  }
  json edges = json::array();
  for (const auto& [from, to] : g.edges) edges.push_back({{"from", from}, {"to", to}});
  return {{"nodes", nodes}, {"inputs", g.inputs}, {"edges", edges}};
}

namespace {

json markers_json(unsigned m) {
  json out = json::array();
  if (m & marker_parallel) out.push_back("parallel");
  if (m & marker_vectorized) out.push_back("vectorized");
  return out;
}

json body_json(const pipeline& p, const loop_nest& n, const std::vector<body_item>& items) {
  json out = json::array();
  for (const body_item& item : items) {
    if (item.is_block) {
      const loop_block& b = n.blocks[item.index];
      json loops = json::array();
      for (const loop& l : b.loops) loops.push_back({{"var", l.var}, {"min", l.min}, {"extent", l.extent}});
      out.push_back({{"id", b.id},
                     {"func", b.func},
                     {"level", to_string(b.level)},
                     {"loops", loops},
                     {"markers", markers_json(b.markers)},
                     {"body", body_json(p, n, b.body)}});
    } else {
      const compute_stmt& st = n.stmts[item.index];
      json region = json::object();
      for (const std::string& d : p.dims_of(st.func)) {
        const interval& r = st.region[dim_slot(d)];
        region[d] = {r.lo, r.hi};
      }
      out.push_back({{"stmt", st.func}, {"region", region}});
    }
  }
  return out;
}

}  // namespace

json to_json(const pipeline& p, const loop_nest& n) { return body_json(p, n, n.root); }

json to_json(const std::vector<tile_viz_entry>& viz) {
  json out = json::array();
  for (const tile_viz_entry& e : viz) {
    out.push_back({{"block_id", e.block_id},
                   {"func", e.func},
                   {"width", e.width},
                   {"height", e.height},
                   {"color", e.color},
                   {"markers", markers_json(e.markers)}});
  }
  return out;
}

json to_json(const machine_params& m) {
  return {{"cache_bytes", m.cache_bytes},
          {"weight_op", m.weight_op},
          {"weight_store", m.weight_store},
          {"weight_load_cached", m.weight_load_cached},
          {"weight_load_uncached", m.weight_load_uncached},
          {"vector_width", m.vector_width},
          {"bytes_per_element", m.bytes_per_element}};
}

machine_params machine_from_json(const json& j) {
  if (!j.is_object()) throw error(error_kind::syntax, "machine must be an object");
  machine_params m;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw error(error_kind::syntax, "machine parameter '" + key + "' must be a number");
    double v = value.get<double>();
    if (key == "cache_bytes") m.cache_bytes = v;
    else if (key == "weight_op") m.weight_op = v;
    else if (key == "weight_store") m.weight_store = v;
    else if (key == "weight_load_cached") m.weight_load_cached = v;
    else if (key == "weight_load_uncached") m.weight_load_uncached = v;
    else if (key == "vector_width") m.vector_width = static_cast<int>(v);
    else if (key == "bytes_per_element") m.bytes_per_element = v;
    else throw error(error_kind::syntax, "unknown machine parameter '" + key + "'");
  }
  m.validate();
  return m;
}

json to_json(const guide_action& a) {
  switch (a.kind) {
  case guide_action::choose: return {{"kind", "choose"}, {"option_id", a.option_id}};
  case guide_action::custom_tile: return {{"kind", "tile"}, {"range_x", a.range_x}, {"range_y", a.range_y}};
  case guide_action::undo: return {{"kind", "undo"}};
  }
  return {};
}

guide_action action_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "choose") return {guide_action::choose, j.at("option_id").get<std::string>(), 0, 0};
  if (kind == "tile") return {guide_action::custom_tile, "", j.at("range_x").get<std::int64_t>(), j.at("range_y").get<std::int64_t>()};
  if (kind == "undo") return {guide_action::undo, "", 0, 0};
  throw error(error_kind::syntax, "unknown action kind '" + kind + "'");
}

json state_json(const guided_session& s) {
  const pipeline& p = s.source();
  instruction ins = s.current_instruction();
  loop_nest n = s.current_nest();
  json options = json::array();
  if (s.phase() != guide_phase::done) {
    for (const guide_option& o : s.list_options()) {
      options.push_back({{"id", o.id}, {"description", o.description}, {"cost", to_json(o.cost)}, {"display_cost", o.display_cost}});
    }
  }
  std::optional<std::string> highlight;
  if (!ins.highlighted_func.empty()) highlight = ins.highlighted_func;
  return {{"instruction", ins.text},
          {"highlighted_func", highlight ? json(*highlight) : json(nullptr)},
          {"phase", to_string(s.phase())},
          {"done", s.phase() == guide_phase::done},
          {"order", s.order()},
          {"cursor", s.cursor()},
          {"dependency_graph", to_json(dependency_graph_view(p, highlight))},
          {"loop_nest", to_json(p, n)},
          {"loop_nest_text", print_loop_nest(p, n)},
          {"tile_viz", to_json(view_model(n, image_extent(p)))},
          {"options", options},
          {"current_cost", to_json(ins.current_cost)},
          {"schedule", s.export_schedule()},
          {"can_undo", s.history_size() > 0}};
}

json run_summary(const guided_session& s, std::int64_t width, std::int64_t height) {
  const pipeline& from = s.source();
  pipeline to = resize_pipeline(from, width, height);
  const machine_params& m = s.machine();
  schedule sched = rescale_schedule(from, to, s.current_schedule(), m.lowering());
  exec_options opts;
  opts.lowering = m.lowering();
  exec_result r = execute(to, sched, random_inputs(to, 1), opts);
  cost_estimate model = estimate(to, sched, m);
  std::int64_t evaluations = 0, stores = 0, loads = 0;
  for (const auto& [f, v] : r.report.evaluations) evaluations += v;
  for (const auto& [f, v] : r.report.stores) stores += v;
  json load_list = json::array();
  for (const auto& [k, v] : r.report.loads) {
    loads += v;
    load_list.push_back({{"consumer", k.first}, {"producer", k.second}, {"count", v}});
  }
  return {{"width", width},
          {"height", height},
          {"schedule", print_schedule_script(to, sched)},
          {"evaluations", r.report.evaluations},
          {"stores", r.report.stores},
          {"loads", load_list},
          {"total_evaluations", evaluations},
          {"total_stores", stores},
          {"total_loads", loads},
          {"model_matches_counters", model.evaluations == r.report.evaluations && model.loads == r.report.loads},
          {"estimate", to_json(model)},
          {"wall_time", r.report.wall_time}};
}

namespace {

http_response json_response(int status, const json& j) { return {status, j.dump(), "application/json"}; }

http_response error_response(int status, const std::string& kind, const std::string& message) {
  return json_response(status, {{"error", kind}, {"message", message}});
}

int status_of(error_kind k) {
  switch (k) {
  case error_kind::stale_option:
  case error_kind::session_done:
  case error_kind::empty_history: return 409;
  default: return 422;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '/');) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

std::map<std::string, std::string> parse_query(const std::string& query) {
  std::map<std::string, std::string> out;
  std::stringstream ss(query);
  for (std::string kv; std::getline(ss, kv, '&');) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) out[kv] = "";
    else out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

std::optional<std::pair<std::int64_t, std::int64_t>> parse_size(const std::string& s) {
  auto x = s.find('x');
  if (x == std::string::npos) return std::nullopt;
  std::int64_t w = 0, h = 0;
  auto r1 = std::from_chars(s.data(), s.data() + x, w);
  auto r2 = std::from_chars(s.data() + x + 1, s.data() + s.size(), h);
  if (r1.ec != std::errc() || r1.ptr != s.data() + x || r2.ec != std::errc() || r2.ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return std::make_pair(w, h);
}

}  // namespace

session_store::session_store(std::optional<std::string> state_dir) : state_dir_(std::move(state_dir)), rng_(std::random_device{}()) {
  if (state_dir_) {
    std::filesystem::create_directories(*state_dir_);
    load_all();
  }
}

std::size_t session_store::size() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::shared_ptr<session_store::entry> session_store::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string session_store::new_id() {
  std::lock_guard lock(id_mu_);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
  return buf;
}

void session_store::persist(const std::string& id, const entry& e) const {
  if (!state_dir_) return;
  json log = json::array();
  for (const guide_action& a : e.session.log()) log.push_back(to_json(a));
  json doc = {{"pipeline_source", e.source}, {"machine", to_json(e.session.machine())}, {"log", log}};
  std::filesystem::path dir(*state_dir_);
  std::filesystem::path tmp = dir / (id + ".json.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw error(error_kind::io, "cannot write session file in '" + *state_dir_ + "'");
    out << doc.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, dir / (id + ".json"));
}

void session_store::load_all() {
  for (const auto& file : std::filesystem::directory_iterator(*state_dir_)) {
    if (file.path().extension() != ".json") continue;
    std::string id = file.path().stem().string();
    try {
      std::ifstream in(file.path());
      json doc = json::parse(in);
      std::vector<guide_action> log;
      for (const json& a : doc.at("log")) log.push_back(action_from_json(a));
      std::string source = doc.at("pipeline_source").get<std::string>();
      guided_session s = guided_session::replay(parse_pipeline(source), machine_from_json(doc.at("machine")), log);
      sessions_[id] = std::make_shared<entry>(source, std::move(s));
    } catch (const std::exception& e) {
      std::cerr << "tileguide: skipping session file " << file.path() << ": " << e.what() << "\n";
    }
  }
}

http_response session_store::handle(const std::string& method, const std::string& target, const std::string& body) {
  std::string path = target, query;
  if (auto q = target.find('?'); q != std::string::npos) {
    path = target.substr(0, q);
    query = target.substr(q + 1);
  }
  std::vector<std::string> parts = split_path(path);
  try {
    if (parts.empty() || parts[0] != "sessions") return error_response(404, "not_found", "no route for '" + path + "'");

    if (parts.size() == 1) {
      if (method != "POST") return error_response(405, "method_not_allowed", "use POST /sessions");
      json req;
      try {
        req = json::parse(body);
      } catch (const json::exception& e) {
        return error_response(400, "bad_request", std::string("invalid JSON: ") + e.what());
      }
      if (!req.is_object() || !req.contains("pipeline_source") || !req["pipeline_source"].is_string()) {
        return error_response(400, "bad_request", "body must contain a string 'pipeline_source'");
      }
      std::string source = req["pipeline_source"].get<std::string>();
      machine_params m = req.contains("machine") ? machine_from_json(req["machine"]) : machine_params{};
      auto e = std::make_shared<entry>(source, guided_session(parse_pipeline(source), m));
      std::string id = new_id();
      std::lock_guard elock(e->mu);
      {
        std::unique_lock lock(mu_);
        while (sessions_.count(id)) id = new_id();
        sessions_[id] = e;
      }
      persist(id, *e);
      return json_response(201, {{"session_id", id}, {"state", state_json(e->session)}});
    }

    std::shared_ptr<entry> e = find(parts[1]);
    if (!e) return error_response(404, "unknown_session", "no session '" + parts[1] + "'");
    std::lock_guard elock(e->mu);
    const std::string action = parts.size() > 2 ? parts[2] : "";
    if (parts.size() > 3) return error_response(404, "not_found", "no route for '" + path + "'");

    if (action.empty()) {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return json_response(200, state_json(e->session));
    }
    if (action == "schedule") {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return {200, e->session.export_schedule(), "text/plain"};
    }
    if (action == "run") {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      auto q = parse_query(query);
      std::int64_t w = 64, h = 64;
      if (q.count("size")) {
        auto size = parse_size(q["size"]);
        if (!size) return error_response(422, "invalid_size", "size must be WxH, e.g. 64x64");
        std::tie(w, h) = *size;
      }
      if (w < 1 || h < 1 || w * h > 4096 * 4096) {
        return error_response(422, "invalid_size", "size must be within 1x1 .. 4096x4096 pixels");
      }
      return json_response(200, run_summary(e->session, w, h));
    }
    if (method != "POST") return error_response(405, "method_not_allowed", "use POST");
    json req = json::object();
    if (!body.empty()) {
      try {
        req = json::parse(body);
      } catch (const json::exception& ex) {
        return error_response(400, "bad_request", std::string("invalid JSON: ") + ex.what());
      }
    }
    if (action == "choose") {
      if (!req.contains("option_id") || !req["option_id"].is_string()) {
        return error_response(400, "bad_request", "body must contain a string 'option_id'");
      }
      e->session.choose(req["option_id"].get<std::string>());
    } else if (action == "tile") {
      if (!req.contains("range_x") || !req.contains("range_y") || !req["range_x"].is_number_integer() ||
          !req["range_y"].is_number_integer()) {
        return error_response(422, "invalid_range", "body must contain integer 'range_x' and 'range_y'");
      }
      e->session.custom_tile(req["range_x"].get<std::int64_t>(), req["range_y"].get<std::int64_t>());
    } else if (action == "undo") {
      e->session.undo();
    } else {
      return error_response(404, "not_found", "no route for '" + path + "'");
    }
    persist(parts[1], *e);
    return json_response(200, state_json(e->session));
  } catch (const error& ex) {
    return error_response(status_of(ex.kind()), error_code(ex.kind()), ex.what());
  } catch (const std::exception& ex) {
    return error_response(500, "internal", ex.what());
  }
}

struct http_service::impl {
  httplib::Server server;
};

http_service::http_service(session_store& store) : impl_(std::make_unique<impl>()) {
  auto route = [&store](const httplib::Request& req, httplib::Response& res) {
    http_response r = store.handle(req.method, req.target, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
    res.set_header("Access-Control-Allow-Origin", "*");
  };
  httplib::Server& server = impl_->server;
  server.Get(".*", route);
  server.Post(".*", route);
  server.Put(".*", route);
  server.Delete(".*", route);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

http_service::~http_service() = default;

int http_service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void http_service::listen() { impl_->server.listen_after_bind(); }

void http_service::stop() { impl_->server.stop(); }

bool serve(session_store& store, const std::string& host, int port) {
  http_service http(store);
  if (http.bind(host, port) < 0) return false;
  http.listen();
  return true;
}

}  // namespace tileguide
