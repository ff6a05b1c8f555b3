#include <doctest.h>

#include <atomic>
#include <future>
#include <sstream>
#include <thread>

#include "forumcp/service.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace forumcp;
using namespace forumcp::testing;
using nlohmann::json;

namespace {

std::string csv_of(const std::vector<PostRecord>& posts) {
  std::ostringstream out;
  write_posts(out, posts, InputFormat::csv);
  return out.str();
}

/// Three-block forum whose automatic rank search takes a few seconds.
std::vector<PostRecord> slow_forum() {
  SyntheticSpec spec;
  spec.forum_id = "slow";
  spec.seed = 21;
  for (int b = 0; b < 3; ++b) {
    PlantedBlock p;
    p.users = 30;
    p.threads = 40;
    p.week_start = 2 + 6 * b;
    p.weeks = 4;
    p.intensity = 3.0;
    spec.blocks.push_back(p);
  }
  return generate_synthetic(spec).posts;
}

/// A Service on an ephemeral port, serving on a background thread.
struct Server {
  explicit Server(const std::string& name) : store(scratch_dir(name)), service(store) {
    port = service.bind_any("127.0.0.1");
    thread = std::thread([this] { service.listen(); });
    httplib::Client probe("127.0.0.1", port);
    for (int n = 0; n < 200; ++n) {
      if (auto r = probe.Get("/api/health"); r && r->status == 200) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Server() {
    service.stop();
    thread.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }

  json get(const std::string& path, int expect = 200) const {
    auto r = client().Get(path);
    REQUIRE(r);
    CHECK_MESSAGE(r->status == expect, path << " -> " << r->status << " " << r->body);
    return json::parse(r->body);
  }

  json post(const std::string& path, const json& body, int expect) const {
    auto r = client().Post(path, body.dump(), "application/json");
    REQUIRE(r);
    CHECK_MESSAGE(r->status == expect, path << " -> " << r->status << " " << r->body);
    return json::parse(r->body);
  }

  Store store;
  Service service;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_CASE("health and datasets") {
  Server s("service-datasets");
  CHECK(s.get("/api/health") == json{{"status", "ok"}});
  CHECK(s.get("/api/datasets").empty());

  const std::string csv = csv_of(small_forum());
  const json created = s.post("/api/datasets", {{"name", "small"}, {"format", "csv"}, {"content", csv}}, 201);
  CHECK(created.at("name") == "small");
  CHECK(created.at("forum") == "small");
  CHECK(s.post("/api/datasets", {{"name", "small"}, {"format", "csv"}, {"content", csv}}, 200) == created);
  CHECK(s.get("/api/datasets/small") == created);
  CHECK(s.get("/api/datasets").size() == 1);

  const json conflict = s.post("/api/datasets", {{"name", "small"}, {"format", "csv"}, {"content", csv_of(small_forum(6))}}, 409);
  CHECK(conflict.at("code") == "conflict");
  const json bad = s.post("/api/datasets", {{"name", "bad"}, {"format", "csv"}, {"content", "not,a,header\n"}}, 400);
  CHECK(bad.contains("message"));
  CHECK(s.get("/api/datasets/none", 404).at("code") == "not_found");

  auto raw = s.client().Post("/api/datasets", "{oops", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 400);
}

TEST_CASE("a submitted run is visible at once and its views fill in when it finishes") {
  Server s("service-runs");
  s.post("/api/datasets", {{"name", "slow"}, {"format", "csv"}, {"content", csv_of(slow_forum())}}, 201);
  const json submitted = s.post("/api/runs", {{"dataset", "slow"}, {"config", {{"seed", 1}}}}, 202);
  const std::string id = submitted.at("run_id");
  CHECK(id.size() == 16);

  const json status = s.get("/api/runs/" + id);
  const std::string state = status.at("status");
  CHECK((state == "queued" || state == "fitting"));
  CHECK(status.at("config").at("seed") == 1);

  // reads stay responsive while the worker fits
  std::vector<std::future<int>> readers;
  for (int n = 0; n < 8; ++n) {
    readers.push_back(std::async(std::launch::async, [&s, &id] {
      auto c = s.client();
      int ok = 0;
      for (const char* path : {"/api/health", "/api/datasets/slow"}) ok += c.Get(path)->status == 200;
      ok += c.Get("/api/runs/" + id)->status == 200;
      return ok;
    }));
  }
  for (auto& r : readers) CHECK(r.get() == 3);

  const json partial = s.get("/api/runs/" + id + "/clusters");
  if (partial.at("status") != "done") {
    CHECK(partial.at("clusters").empty());
    CHECK(s.get("/api/runs/" + id + "/clusters/0", 409).at("code") == "run_not_ready");
    CHECK(s.get("/api/runs/" + id + "/tableview").at("rows").empty());
    CHECK(s.get("/api/runs/" + id + "/heatmap").at("rows").empty());
  }

  s.service.wait_idle();
  const json done = s.get("/api/runs/" + id);
  REQUIRE(done.at("status") == "done");
  CHECK(done.at("rank").at("value") == 3);
  CHECK(done.at("clusters") == 3);

  const json clusters = s.get("/api/runs/" + id + "/clusters").at("clusters");
  REQUIRE(clusters.size() == 3);
  const json detail = s.get("/api/runs/" + id + "/clusters/0");
  CHECK(detail.at("cluster").at("cluster_id") == 0);
  CHECK(detail.contains("keywords"));
  CHECK(detail.contains("label"));
  CHECK(detail.contains("profile"));
  CHECK(s.get("/api/runs/" + id + "/clusters/9", 404).at("code") == "not_found");
  CHECK(s.get("/api/runs/" + id + "/clusters/x", 404).at("code") == "not_found");

  const json story = s.get("/api/runs/" + id + "/clusters/0/storyline?rt=2&th_dom=0.5");
  if (story.at("available") == true) {
    CHECK(story.at("r_t") == 2);
    CHECK(story.at("coverage").get<double>() >= 0.5);
  }
  CHECK(s.get("/api/runs/" + id + "/clusters/0/storyline?rt=abc", 400).at("code") == "validation_error");

  const json table = s.get("/api/runs/" + id + "/tableview?k=1").at("rows");
  REQUIRE(table.size() == 3);
  for (const auto& row : table) CHECK(row.at("top_users").size() == 1);
  CHECK(s.get("/api/runs/" + id + "/heatmap").at("rows").size() == 3);
  CHECK(s.get("/api/runs/" + id + "/scree").is_array());
  CHECK(s.get("/api/runs").size() == 1);

  SUBCASE("resubmitting a finished run returns it") {
    const json again = s.post("/api/runs", {{"dataset", "slow"}, {"config", {{"seed", 1}}}}, 200);
    CHECK(again.at("run_id") == id);
    CHECK(again.at("status") == "done");
  }
  SUBCASE("relabel") {
    json classes = json::array({{{"label", "A"}, {"bag", {"zzz"}}}, {{"label", "B"}, {"bag", {"yyy"}}}});
    const json out = s.post("/api/runs/" + id + "/relabel", {{"classes", classes}}, 200);
    REQUIRE(out.at("labels").size() == 3);
    for (const auto& l : out.at("labels")) CHECK(l.at("label") == "G");
    CHECK(s.post("/api/runs/" + id + "/relabel", {{"classes", json::array()}}, 400).at("code") == "validation_error");
  }
  SUBCASE("thread drill-down") {
    const std::string tid = clusters[0].at("threads")[0].at("id");
    const json thread = s.get("/api/datasets/slow/threads/" + tid);
    CHECK(thread.at("thread_id") == tid);
    REQUIRE(!thread.at("posts").empty());
    const auto& posts = thread.at("posts");
    for (std::size_t n = 1; n < posts.size(); ++n) CHECK(posts[n - 1].at("date") <= posts[n].at("date"));
    CHECK(s.get("/api/datasets/slow/threads/none", 404).at("code") == "not_found");
  }
}

TEST_CASE("run errors") {
  Server s("service-errors");
  CHECK(s.get("/api/runs/0123456789abcdef", 404).at("code") == "not_found");
  CHECK(s.get("/api/runs/0123456789abcdef/clusters", 404).at("code") == "not_found");
  CHECK(s.post("/api/runs", {{"dataset", "none"}}, 404).at("code") == "not_found");
  s.post("/api/datasets", {{"name", "small"}, {"format", "csv"}, {"content", csv_of(small_forum())}}, 201);
  CHECK(s.post("/api/runs", {{"dataset", "small"}, {"config", {{"lambda", -1}}}}, 400).at("code") == "validation_error");
  CHECK(s.post("/api/runs", {{"dataset", "small"}, {"config", {{"unknown", 1}}}}, 400).at("code") == "validation_error");

  s.post("/api/datasets", {{"name", "empty"}, {"format", "csv"}, {"content", "forum_id,thread_id,post_id,username,date,content\n"}},
         201);
  const std::string id = s.post("/api/runs", {{"dataset", "empty"}, {"config", {{"rank", 2}}}}, 202).at("run_id");
  s.service.wait_idle();
  const json status = s.get("/api/runs/" + id);
  CHECK(status.at("status") == "failed");
  CHECK(status.at("stage") == "ingest");
  const json failed = s.get("/api/runs/" + id + "/clusters", 409);
  CHECK(failed.at("code") == "run_failed");
  CHECK(failed.at("stage") == "ingest");
  CHECK(failed.at("message").get<std::string>().find("no temporal extent") != std::string::npos);
  CHECK(s.post("/api/runs/" + id + "/relabel", {{"classes", json::array({{{"label", "A"}, {"bag", {"a"}}},
                                                                        {{"label", "B"}, {"bag", {"b"}}}})}},
               409)
            .at("code") == "conflict");
}

TEST_CASE("binding a port in use is a startup error") {
  Server s("service-port");
  Store other_store(scratch_dir("service-port-2"));
  Service other(other_store);
  try {
    other.bind("127.0.0.1", s.port);
    FAIL("expected a startup error");
  } catch (const Error& e) {
    CHECK(e.code() == "startup_error");
  }
}
