#pragma once

#include <memory>
#include <string>

#include "forumcp/store.hpp"

namespace forumcp {

/// JSON HTTP API over a Store. Reads are served concurrently; runs are
/// executed one at a time by a background worker in submission order.
///
///   POST /api/datasets                          {name, format, content}
///   POST /api/runs                              {dataset, config}
///   GET  /api/runs/{id}
///   GET  /api/runs/{id}/clusters
///   GET  /api/runs/{id}/clusters/{cid}
///   GET  /api/runs/{id}/clusters/{cid}/storyline?rt=&th_dom=
///   GET  /api/runs/{id}/tableview?k=
///   GET  /api/runs/{id}/heatmap
///   GET  /api/runs/{id}/scree
///   GET  /api/datasets/{id}/threads/{tid}
///   POST /api/runs/{id}/relabel                 {classes}
///
/// Errors are `{code, message}` plus `stage` for failed runs.
class Service {
 public:
  explicit Service(Store& store);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the port; throws Error("startup_error") when it is unavailable.
  void bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it.
  int bind_any(const std::string& host);
  /// Serves until stop(); call after bind.
  void listen();
  void stop();

  /// Queues a run; returns its id. A run that already exists and has not
  /// failed is not queued again.
  std::string submit(const std::string& dataset, const RunConfig& config);
  /// Blocks until the worker queue is empty and no run is executing.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace forumcp
