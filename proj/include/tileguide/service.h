#ifndef TILEGUIDE_SERVICE_H
#define TILEGUIDE_SERVICE_H

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>

#include "json.hpp"
#include "tileguide/cost_model.h"
#include "tileguide/guide.h"

namespace tileguide {

using json = nlohmann::json;

json to_json(const cost_estimate& c);
json to_json(const graph_view& g);
json to_json(const pipeline& p, const loop_nest& n);
json to_json(const std::vector<tile_viz_entry>& viz);
json to_json(const machine_params& m);
machine_params machine_from_json(const json& j);
json to_json(const guide_action& a);
guide_action action_from_json(const json& j);

// The state document served for a session.
json state_json(const guided_session& s);

// Counters of executing the session's schedule at another image size, next to
// the model's prediction of the same counters.
json run_summary(const guided_session& s, std::int64_t width, std::int64_t height);

struct http_response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class session_store {
public:
  // With a state directory, every session is saved as its pipeline source,
  // machine parameters and action log, and reloaded by replay.
  explicit session_store(std::optional<std::string> state_dir = std::nullopt);

  // Transport-independent request handling; `target` may carry a query.
  http_response handle(const std::string& method, const std::string& target, const std::string& body);

  std::size_t size() const;

private:
  struct entry {
    std::mutex mu;
    std::string source;
    guided_session session;

    entry(std::string src, guided_session s) : source(std::move(src)), session(std::move(s)) {}
  };

  std::shared_ptr<entry> find(const std::string& id) const;
  std::string new_id();
  void persist(const std::string& id, const entry& e) const;
  void load_all();

  std::optional<std::string> state_dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<entry>> sessions_;
  std::mutex id_mu_;
  std::mt19937_64 rng_;
};

// HTTP transport for a session store.
class http_service {
public:
  explicit http_service(session_store& store);
  ~http_service();

  // Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void listen();
  void stop();

private:
  struct impl;
  std::unique_ptr<impl> impl_;
};

// Blocks serving `store` over HTTP until the process is stopped.
// Returns false if the socket could not be bound.
bool serve(session_store& store, const std::string& host, int port);

}  // namespace tileguide

#endif  // TILEGUIDE_SERVICE_H
