#include <doctest.h>

#include "forumcp/clusters.hpp"
#include "forumcp/cp_als.hpp"
#include "forumcp/synthetic.hpp"
#include "support.hpp"

using namespace forumcp;
using namespace forumcp::testing;

namespace {

/// Rank-one-per-cluster model where each component's nonzero entries are
/// given explicitly.
CPModel<double> model_of(std::array<Index, 3> s, const std::vector<std::array<std::vector<std::pair<int, double>>, 3>>& cols) {
  CPModel<double> m;
  m.U = Eigen::MatrixXd::Zero(s[0], static_cast<Index>(cols.size()));
  m.T = Eigen::MatrixXd::Zero(s[1], static_cast<Index>(cols.size()));
  m.W = Eigen::MatrixXd::Zero(s[2], static_cast<Index>(cols.size()));
  Eigen::MatrixXd* f[3] = {&m.U, &m.T, &m.W};
  for (std::size_t r = 0; r < cols.size(); ++r)
    for (int d = 0; d < 3; ++d)
      for (const auto& [n, v] : cols[r][static_cast<std::size_t>(d)]) (*f[d])(n, static_cast<Index>(r)) = v;
  return m;
}

}  // namespace

TEST_CASE("a component with an all-zero week column is dropped and logged") {
  const auto m = model_of({3, 3, 3}, {{{{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}}}, {{{{1, 1.0}}, {{1, 1.0}}, {}}}});
  std::vector<std::string> dropped;
  const auto clusters = extract_clusters(m, 0.0, &dropped);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].component == 0);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].find("week") != std::string::npos);
}

TEST_CASE("clusters are ordered by energy and members by strength") {
  const auto m = model_of({4, 4, 4}, {
                                          {{{{0, 1.0}, {1, 2.0}}, {{0, 1.0}}, {{0, 1.0}}}},
                                          {{{{2, 3.0}, {3, 3.0}}, {{2, 2.0}}, {{1, 2.0}}}},
                                      });
  const auto clusters = extract_clusters(m);
  REQUIRE(clusters.size() == 2);
  CHECK(clusters[0].component == 1);
  CHECK(clusters[0].cluster_id == 0);
  CHECK(clusters[1].cluster_id == 1);
  CHECK(clusters[0].energy == doctest::Approx(std::sqrt(18.0) * 2.0 * 2.0));
  CHECK(clusters[0].energy > clusters[1].energy);
  CHECK(clusters[1].users[0].index == 1);
  CHECK(clusters[1].users[1].index == 0);
  // equal strengths: index ascending
  CHECK(clusters[0].users[0].index == 2);
  CHECK(clusters[0].users[1].index == 3);
}

TEST_CASE("epsilon filters weak entries") {
  const auto m = model_of({3, 1, 1}, {{{{{0, 0.5}, {1, 0.05}, {2, 0.2}}, {{0, 1.0}}, {{0, 1.0}}}}});
  CHECK(extract_clusters(m, 0.0)[0].users.size() == 3);
  const auto c = extract_clusters(m, 0.1);
  REQUIRE(c[0].users.size() == 2);
  for (const auto& u : c[0].users) CHECK(u.strength > 0.1);
}

TEST_CASE("cluster members are inside the support of a fitted tensor") {
  const std::array<Index, 3> s{20, 20, 8};
  const auto x = planted_tensor(s, {{0, 6, 0, 6, 0, 3}, {10, 6, 10, 6, 4, 3}}, 3.0, 0.02, 8);
  SolverOptions o;
  const auto m = cp_als_nn_l1(x, 2, o);
  std::set<Index> users, threads, slots;
  for (const auto& e : x.entries()) {
    users.insert(e.i);
    threads.insert(e.j);
    slots.insert(e.k);
  }
  for (const auto& c : extract_clusters(m)) {
    for (const auto& u : c.users) CHECK(users.count(u.index) == 1);
    for (const auto& t : c.threads) CHECK(threads.count(t.index) == 1);
    for (const auto& w : c.weeks) CHECK(slots.count(w.index) == 1);
  }
}

TEST_CASE("planted synthetic blocks come back as clusters") {
  SyntheticSpec spec;
  spec.seed = 7;
  for (int b = 0; b < 3; ++b) {
    PlantedBlock block;
    block.users = 30;
    block.threads = 40;
    block.week_start = 2 + 6 * b;
    block.weeks = 4;
    block.intensity = 3.0;
    spec.blocks.push_back(block);
  }
  const SyntheticForum forum = generate_synthetic(spec);
  const PostTable t = table_of(forum.posts);
  const auto x = build_tensor(t, discretize(t, Granularity::week));
  SolverOptions o;
  const auto clusters = extract_clusters(cp_als_nn_l1(x, 3, o));
  REQUIRE(clusters.size() == 3);
  for (const auto& truth : forum.truth) {
    double best = 0;
    for (const auto& c : clusters) {
      std::vector<std::string> names;
      for (const auto& u : c.users) names.push_back(t.users.name(u.index));
      best = std::max(best, set_jaccard(names, truth.users));
    }
    CHECK(best >= 0.8);
  }
}

TEST_CASE("top_entities") {
  // users a, b; threads t1, t2; one week starting Monday 2024-01-01
  const PostTable t = table_of({post("t1", "p1", "a", day(2024, 1, 1), "x"), post("t1", "p2", "b", day(2024, 1, 1), "x"),
                                post("t2", "p3", "a", day(2024, 1, 1), "x"), post("t2", "p4", "b", day(2024, 1, 2), "x"),
                                post("t1", "p5", "a", day(2024, 1, 7), "x")});
  const TimeIndex time = discretize(t, Granularity::week);
  Cluster c;
  c.users = {{0, 0.9}, {1, 0.5}};
  c.threads = {{0, 0.7}, {1, 0.6}};
  c.weeks = {{0, 1.0}};

  SUBCASE("under-full cluster is not padded") {
    const TopEntities top = top_entities(c, t, time, 3);
    CHECK(top.users.size() == 2);
    CHECK(top.threads.size() == 2);
    CHECK(top.weeks.size() == 1);
  }
  SUBCASE("Monday x3 and Tuesday x1 gives Monday") {
    const TopEntities top = top_entities(c, t, time, 3);
    REQUIRE(top.dates.size() == 1);
    CHECK(top.dates[0] == day(2024, 1, 1));
  }
  SUBCASE("k equal to the cluster size returns every member") {
    const TopEntities top = top_entities(c, t, time, 2);
    CHECK(top.users[0].index == c.users[0].index);
    CHECK(top.users[1].index == c.users[1].index);
    CHECK(top.threads.size() == c.threads.size());
  }
  SUBCASE("k = 1") {
    const TopEntities top = top_entities(c, t, time, 1);
    CHECK(top.users.size() == 1);
    CHECK(top.users[0].index == 0);
  }
  SUBCASE("k < 1 is rejected") { CHECK_THROWS_AS(top_entities(c, t, time, 0), ValidationError); }
}

TEST_CASE("peak day ties go to the earliest date and dates stay inside their slot") {
  const PostTable t = table_of({post("t", "p1", "a", day(2024, 1, 3), "x"), post("t", "p2", "a", day(2024, 1, 2), "x"),
                                post("t", "p3", "a", day(2024, 1, 1), "anchor"), post("t", "p4", "a", day(2024, 1, 16), "x")});
  const TimeIndex time = discretize(t, Granularity::week);
  Cluster c;
  c.users = {{0, 1.0}};
  c.threads = {{0, 1.0}};
  c.weeks = {{0, 1.0}, {1, 0.5}, {2, 0.2}};
  const TopEntities top = top_entities(c, t, time, 3);
  REQUIRE(top.dates.size() == 3);
  CHECK(top.dates[0] == day(2024, 1, 1));
  CHECK(top.dates[1] == time.slot_start(1));
  CHECK(top.dates[2] == day(2024, 1, 16));
  for (std::size_t n = 0; n < top.dates.size(); ++n) CHECK(time.slot(top.dates[n]) == top.weeks[n].index);
}

TEST_CASE("cluster_activity") {
  SUBCASE("all posts on one day") {
    const PostTable t = table_of({post("t", "p1", "a", day(2024, 3, 5), "x"), post("t", "p2", "a", day(2024, 3, 5), "y")});
    Cluster c;
    c.users = {{0, 1.0}};
    c.threads = {{0, 1.0}};
    c.weeks = {{0, 1.0}};
    const auto a = cluster_activity(c, t, discretize(t, Granularity::week));
    CHECK(a.duration_days == 0);
    CHECK(a.active_days == 1);
    CHECK(a.active_percent == 100.0);
    CHECK(a.posts.size() == 2);
  }
  SUBCASE("ten days with five active") {
    std::vector<PostRecord> rows;
    for (int d : {0, 2, 4, 7, 9}) rows.push_back(post("t", "p" + std::to_string(d), "a", day(2024, 3, 1) + std::chrono::days{d}, "x"));
    const PostTable t = table_of(rows);
    Cluster c;
    c.users = {{0, 1.0}};
    c.threads = {{0, 1.0}};
    c.weeks = {{0, 1.0}, {1, 1.0}};
    const auto a = cluster_activity(c, t, discretize(t, Granularity::week));
    CHECK(a.duration_days == 9);
    CHECK(a.active_days == 5);
    CHECK(a.active_percent == doctest::Approx(50.0));
  }
  SUBCASE("posts outside the cluster's users, threads or slots do not count") {
    const PostTable t = table_of({post("t1", "p1", "a", day(2024, 3, 1), "x"), post("t2", "p2", "a", day(2024, 3, 1), "x"),
                                  post("t1", "p3", "b", day(2024, 3, 1), "x"), post("t1", "p4", "a", day(2024, 3, 20), "x")});
    Cluster c;
    c.users = {{0, 1.0}};
    c.threads = {{0, 1.0}};
    c.weeks = {{0, 1.0}};
    const auto a = cluster_activity(c, t, discretize(t, Granularity::week));
    CHECK(a.posts == std::vector<std::size_t>{0});
  }
  SUBCASE("no posts is an inconsistent cluster") {
    const PostTable t = table_of({post("t1", "p1", "a", day(2024, 3, 1), "x"), post("t2", "p2", "b", day(2024, 3, 1), "x")});
    Cluster c;
    c.users = {{0, 1.0}};
    c.threads = {{1, 1.0}};
    c.weeks = {{0, 1.0}};
    try {
      cluster_activity(c, t, discretize(t, Granularity::week));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == "inconsistent_cluster");
    }
  }
}

TEST_CASE("cluster cards round-trip through JSON") {
  const PostTable t = table_of({post("t1", "p1", "a", day(2024, 1, 1), "x", "Title one"), post("t2", "p2", "b", day(2024, 1, 9), "y")});
  const TimeIndex time = discretize(t, Granularity::week);
  Cluster c;
  c.cluster_id = 4;
  c.component = 2;
  c.energy = 1.5;
  c.users = {{1, 0.75}, {0, 0.25}};
  c.threads = {{0, 2.0}, {1, 1.0}};
  c.weeks = {{1, 1.0}, {0, 0.5}};
  const ClusterCard card = make_card(c, cluster_activity(c, t, time), t, time);
  CHECK(card.users[0].name == "b");
  CHECK(card.threads[0].title == "Title one");
  CHECK(card.weeks[0].peak == day(2024, 1, 9));
  const ClusterCard back = card_from_json(nlohmann::json::parse(to_json(card).dump()));
  CHECK(to_json(back).dump() == to_json(card).dump());
}
