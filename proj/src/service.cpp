#include "forumcp/service.hpp"

#include <charconv>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "forumcp/error.hpp"
#include "forumcp/report.hpp"

namespace forumcp {

namespace {

int http_status(const std::string& code) {
  if (code == "not_found") return 404;
  if (code == "conflict" || code == "run_not_ready") return 409;
  if (code == "parse_error" || code == "validation_error" || code == "index_error" || code == "bad_request") return 400;
  return 500;
}

void send_json(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_raw_json(httplib::Response& res, const std::string& body) {
  res.status = 200;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message,
                const std::string& stage = {}) {
  nlohmann::ordered_json body = {{"code", code}, {"message", message}};
  if (!stage.empty()) body["stage"] = stage;
  send_json(res, body, http_status(code));
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad_request", std::string("request body is not valid JSON: ") + e.what());
  }
}

template <typename T>
std::optional<T> query_number(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const std::string text = req.get_param_value(name);
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError(std::string("query parameter ") + name + " is not a number: '" + text + "'");
  }
  return value;
}

int path_int(const httplib::Request& req, const char* name) {
  const std::string text = req.path_params.at(name);
  int value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) throw NotFound("no cluster '" + text + "'");
  return value;
}

}  // namespace

struct Service::Impl {
  explicit Impl(Store& s) : store(s), worker([this] { work(); }) {}

  ~Impl() {
    {
      std::lock_guard lock(queue_mutex);
      stopping = true;
    }
    queue_cv.notify_all();
    worker.join();
  }

  Store& store;
  httplib::Server server;
  std::mutex write_mutex;

  std::mutex queue_mutex;
  std::condition_variable queue_cv;
  std::deque<std::string> queue;
  bool busy = false;
  bool stopping = false;

  std::mutex cache_mutex;
  std::map<std::string, std::shared_ptr<const PostTable>> tables;

  std::thread worker;

  void work() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(queue_mutex);
        queue_cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        busy = true;
      }
      try {
        store.execute_run(id);
      } catch (const std::exception& e) {
        std::cerr << "run " << id << " failed: " << e.what() << '\n';
      }
      {
        std::lock_guard lock(queue_mutex);
        busy = false;
      }
      queue_cv.notify_all();
    }
  }

  std::string submit(const std::string& dataset, const RunConfig& config) {
    std::string id;
    {
      std::lock_guard write(write_mutex);
      id = store.create_run(dataset, config);
    }
    std::lock_guard lock(queue_mutex);
    if (store.status(id).state == RunState::queued &&
        std::find(queue.begin(), queue.end(), id) == queue.end()) {
      queue.push_back(id);
      queue_cv.notify_all();
    }
    return id;
  }

  std::shared_ptr<const PostTable> table(const std::string& name) {
    {
      std::lock_guard lock(cache_mutex);
      auto it = tables.find(name);
      if (it != tables.end()) return it->second;
    }
    auto loaded = std::make_shared<const PostTable>(store.load_dataset(name));
    std::lock_guard lock(cache_mutex);
    return tables.emplace(name, std::move(loaded)).first->second;
  }

  /// Status of a run whose views are requested; throws for failed runs.
  RunStatus viewable(const std::string& id) {
    RunStatus s = store.status(id);
    if (s.state == RunState::failed) {
      throw StageError(s.stage, "run_failed", "run '" + id + "' failed: " + s.error_message);
    }
    return s;
  }

  void routes();
};

namespace {

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const StageError& e) {
      send_error(res, e.code(), e.what(), e.stage());
      if (e.code() == "run_failed") res.status = 409;
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, "bad_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, "internal_error", e.what());
    }
  };
}

}  // namespace

void Service::Impl::routes() {
  server.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) {
    send_json(res, {{"status", "ok"}});
  }));

  server.Get("/api/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& name : store.datasets()) out.push_back(to_json(store.dataset(name)));
    send_json(res, out);
  }));

  server.Post("/api/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::string name, format = "csv", content;
    if (req.has_param("name")) {
      name = req.get_param_value("name");
      if (req.has_param("format")) format = req.get_param_value("format");
      content = req.body;
    } else {
      const auto body = parse_body(req);
      name = body.at("name").get<std::string>();
      format = body.value("format", format);
      content = body.at("content").get<std::string>();
    }
    std::istringstream in(content);
    const PostTable parsed = parse_posts(in, parse_input_format(format));
    std::lock_guard write(write_mutex);
    const bool existed = [&] {
      try {
        store.dataset(name);
        return true;
      } catch (const NotFound&) {
        return false;
      }
    }();
    send_json(res, to_json(store.ingest(name, parsed)), existed ? 200 : 201);
  }));

  server.Get("/api/datasets/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, to_json(store.dataset(req.path_params.at("id"))));
  }));

  server.Get("/api/datasets/:id/threads/:tid", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.path_params.at("id"), tid = req.path_params.at("tid");
    const auto t = table(name);
    const auto thread = t->threads.find(tid);
    if (!thread) throw NotFound("dataset '" + name + "' has no thread '" + tid + "'");
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < t->records.size(); ++r) {
      if (t->record_thread[r] == *thread) rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = t->records[a];
      const auto& y = t->records[b];
      return x.date != y.date ? x.date < y.date : x.post_id < y.post_id;
    });
    nlohmann::ordered_json posts = nlohmann::ordered_json::array();
    for (std::size_t r : rows) {
      const auto& p = t->records[r];
      posts.push_back({{"post_id", p.post_id}, {"username", p.username}, {"date", format_date(p.date)}, {"content", p.content}});
    }
    send_json(res, {{"dataset", name}, {"thread_id", tid}, {"title", t->thread_title(*thread)}, {"posts", std::move(posts)}});
  }));

  server.Get("/api/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& id : store.runs()) out.push_back(to_json(store.status(id)));
    send_json(res, out);
  }));

  server.Post("/api/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const std::string dataset = body.at("dataset").get<std::string>();
    const RunConfig config = run_config_from_json(body.value("config", nlohmann::json::object()));
    store.dataset(dataset);
    const std::string id = submit(dataset, config);
    const RunStatus s = store.status(id);
    send_json(res, {{"run_id", id}, {"status", run_state_name(s.state)}}, s.state == RunState::done ? 200 : 202);
  }));

  server.Get("/api/runs/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    nlohmann::ordered_json out = to_json(store.status(id));
    out["config"] = nlohmann::ordered_json::parse(store.read_text(id, "config.json"));
    if (store.status(id).state == RunState::done) {
      const auto manifest = nlohmann::ordered_json::parse(store.read_text(id, "manifest.json"));
      out["rank"] = manifest.at("rank");
      out["clusters"] = manifest.at("clusters");
      out["tensor"] = manifest.at("tensor");
      out["warnings"] = manifest.at("warnings");
    }
    send_json(res, out);
  }));

  server.Get("/api/runs/:id/clusters", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const RunStatus s = viewable(id);
    nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
    if (s.state == RunState::done) clusters = nlohmann::ordered_json::parse(store.read_text(id, "clusters.json"));
    send_json(res, {{"run_id", id}, {"status", run_state_name(s.state)}, {"clusters", std::move(clusters)}});
  }));

  server.Get("/api/runs/:id/clusters/:cid", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const RunStatus s = viewable(id);
    if (s.state != RunState::done) throw Error("run_not_ready", "run '" + id + "' is " + run_state_name(s.state));
    const int cid = path_int(req, "cid");
    const RunViews views(store, id);
    const ClusterCard& card = views.card(cid);
    nlohmann::ordered_json out = {{"run_id", id}, {"cluster", to_json(card)}};
    for (const auto& k : nlohmann::ordered_json::parse(store.read_text(id, "keywords.json"))) {
      if (k.at("cluster_id").get<int>() == cid) out["keywords"] = k;
    }
    for (const auto& l : nlohmann::ordered_json::parse(store.read_text(id, "labels.json"))) {
      if (l.at("cluster_id").get<int>() == cid) out["label"] = l;
    }
    const auto heatmap = nlohmann::ordered_json::parse(store.read_text(id, "heatmap.json"));
    for (const auto& r : heatmap.at("rows")) {
      if (r.at("cluster_id").get<int>() == cid) out["profile"] = r;
    }
    send_json(res, out);
  }));

  server.Get("/api/runs/:id/clusters/:cid/storyline", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const RunStatus s = viewable(id);
    if (s.state != RunState::done) throw Error("run_not_ready", "run '" + id + "' is " + run_state_name(s.state));
    ViewKnobs knobs;
    knobs.r_t = query_number<int>(req, "rt");
    knobs.th_dom = query_number<double>(req, "th_dom");
    const RunViews views(store, id);
    send_json(res, to_json(views.storyline(path_int(req, "cid"), knobs)));
  }));

  server.Get("/api/runs/:id/tableview", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const RunStatus s = viewable(id);
    ViewKnobs knobs;
    knobs.k = query_number<int>(req, "k");
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    if (s.state == RunState::done) rows = to_json(RunViews(store, id).tableview(knobs));
    send_json(res, {{"run_id", id}, {"status", run_state_name(s.state)}, {"rows", std::move(rows)}});
  }));

  server.Get("/api/runs/:id/heatmap", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const RunStatus s = viewable(id);
    if (s.state == RunState::done) return send_raw_json(res, store.read_text(id, "heatmap.json"));
    nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
    for (auto name : kMetricNames) metrics.push_back(std::string(name));
    send_json(res, {{"metrics", std::move(metrics)}, {"unlabelable", false}, {"rows", nlohmann::ordered_json::array()}});
  }));

  server.Get("/api/runs/:id/scree", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const RunStatus s = viewable(id);
    if (s.state == RunState::done) return send_raw_json(res, store.read_text(id, "scree.json"));
    send_json(res, nlohmann::ordered_json::array());
  }));

  server.Post("/api/runs/:id/relabel", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    const auto body = parse_body(req);
    const auto classes = classes_from_json(body);
    std::lock_guard write(write_mutex);
    const auto labels = store.relabel(id, classes);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& l : labels) out.push_back(to_json(l));
    send_json(res, {{"run_id", id}, {"labels", std::move(out)}});
  }));
}

Service::Service(Store& store) : impl_(std::make_unique<Impl>(store)) {
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  impl_->routes();
}

Service::~Service() { stop(); }

void Service::bind(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("startup_error", "cannot bind " + host + ":" + std::to_string(port));
  }
}

int Service::bind_any(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port < 0) throw Error("startup_error", "cannot bind an ephemeral port on " + host);
  return port;
}

void Service::listen() {
  if (!impl_->server.listen_after_bind()) throw Error("startup_error", "server stopped unexpectedly");
}

void Service::stop() { impl_->server.stop(); }

std::string Service::submit(const std::string& dataset, const RunConfig& config) { return impl_->submit(dataset, config); }

void Service::wait_idle() {
  std::unique_lock lock(impl_->queue_mutex);
  impl_->queue_cv.wait(lock, [this] { return impl_->queue.empty() && !impl_->busy; });
}

}  // namespace forumcp
