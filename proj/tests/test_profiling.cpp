#include <doctest.h>

#include <cmath>
#include <numeric>

#include "forumcp/profiling.hpp"
#include "forumcp/text.hpp"
#include "support.hpp"

using namespace forumcp;
using namespace forumcp::testing;

namespace {

KeywordSet keywords_of(std::vector<std::string> terms) {
  KeywordSet kw;
  for (auto& t : terms) kw.keywords.push_back({std::move(t), 1.0});
  return kw;
}

std::vector<std::string> numbered(const std::string& prefix, int from, int to) {
  std::vector<std::string> out;
  for (int n = from; n < to; ++n) out.push_back(prefix + std::to_string(n));
  return out;
}

/// A keyword set of `k` terms and a bag sharing `common` of them, padded
/// with bag-only terms so that the Jaccard score is common / union.
ClassDefinition bag_for(const std::string& label, int k, int common, int union_size, const std::string& pad) {
  std::vector<std::string> bag = numbered("kw", 0, common);
  const auto extra = numbered(pad, 0, union_size - k);
  bag.insert(bag.end(), extra.begin(), extra.end());
  return {label, bag};
}

Cluster cluster_of(std::vector<int> users, std::vector<int> threads, std::vector<int> weeks) {
  Cluster c;
  for (int u : users) c.users.push_back({u, 1.0});
  for (int t : threads) c.threads.push_back({t, 1.0});
  for (int w : weeks) c.weeks.push_back({w, 1.0});
  return c;
}

/// Textbook DBSCAN with cluster expansion; returns the noise rows.
std::set<int> reference_dbscan(const std::vector<std::vector<double>>& rows, double eps, int min_pts) {
  const int n = static_cast<int>(rows.size());
  const auto near = [&](int a) {
    std::vector<int> out;
    for (int b = 0; b < n; ++b) {
      double s = 0;
      for (std::size_t k = 0; k < rows[a].size(); ++k) s += std::pow(rows[a][k] - rows[b][k], 2);
      if (std::sqrt(s) <= eps) out.push_back(b);
    }
    return out;
  };
  std::vector<int> label(n, -2);  // -2 unvisited, -1 noise
  int cluster = 0;
  for (int p = 0; p < n; ++p) {
    if (label[p] != -2) continue;
    auto seeds = near(p);
    if (static_cast<int>(seeds.size()) < min_pts) {
      label[p] = -1;
      continue;
    }
    label[p] = cluster;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const int q = seeds[s];
      if (label[q] == -1) label[q] = cluster;
      if (label[q] != -2) continue;
      label[q] = cluster;
      const auto more = near(q);
      if (static_cast<int>(more.size()) >= min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  std::set<int> noise;
  for (int p = 0; p < n; ++p)
    if (label[p] == -1) noise.insert(p);
  return noise;
}

}  // namespace

TEST_CASE("TF-IDF on a three-thread forum matches the hand computation") {
  const PostTable t = table_of({post("t1", "p1", "a", day(2024, 1, 1), "ransomware locker ransomware victim"),
                                post("t2", "p2", "b", day(2024, 1, 1), "ransomware tutorial guide"),
                                post("t3", "p3", "c", day(2024, 1, 1), "python tutorial script"),
                                post("t1", "p4", "c", day(2024, 1, 2), "replies never count toward keywords")});
  const KeywordCorpus corpus(t);
  CHECK(corpus.documents() == 3);
  CHECK(corpus.document_frequency("ransomware") == 2);
  CHECK(corpus.document_frequency("replies") == 0);
  const KeywordSet kw = cluster_keywords(cluster_of({0}, {0, 1}, {0}), corpus, 50);
  const double l3 = std::log(3.0), l15 = std::log(1.5);
  const std::vector<std::pair<std::string, double>> want = {
      {"ransomware", 3 * l15}, {"guide", l3}, {"locker", l3}, {"victim", l3}, {"tutorial", l15}};
  REQUIRE(kw.keywords.size() == want.size());
  for (std::size_t n = 0; n < want.size(); ++n) {
    CHECK(kw.keywords[n].term == want[n].first);
    CHECK(kw.keywords[n].score == doctest::Approx(want[n].second).epsilon(1e-12));
  }
  const KeywordSet top2 = cluster_keywords(cluster_of({0}, {0, 1}, {0}), corpus, 2);
  REQUIRE(top2.keywords.size() == 2);
  CHECK(top2.keywords[1].term == "guide");
}

TEST_CASE("terms present in every first post never rank") {
  const PostTable t = table_of({post("t1", "p1", "a", day(2024, 1, 1), "forum alpha"),
                                post("t2", "p2", "b", day(2024, 1, 1), "forum beta"),
                                post("t3", "p3", "c", day(2024, 1, 1), "forum gamma")});
  const KeywordCorpus corpus(t);
  const KeywordSet kw = cluster_keywords(cluster_of({0}, {0, 1, 2}, {0}), corpus);
  for (const auto& k : kw.keywords) CHECK(k.term != "forum");
  CHECK(kw.keywords.size() == 3);
}

TEST_CASE("an empty vocabulary gives an empty set with a warning") {
  const PostTable t = table_of({post("t1", "p1", "a", day(2024, 1, 1), "the and of is"),
                                post("t2", "p2", "b", day(2024, 1, 1), "real words here")});
  const KeywordSet kw = cluster_keywords(cluster_of({0}, {0}, {0}), KeywordCorpus(t));
  CHECK(kw.keywords.empty());
  CHECK(!kw.warning.empty());
}

TEST_CASE("keywords are lowercase, at least three characters and not stop words") {
  std::mt19937_64 gen(5);
  const std::vector<std::string> vocab = {"The", "Alpha", "beta", "GAMMA", "of", "an", "delta", "it", "Épée", "über", "x1"};
  std::vector<PostRecord> rows;
  for (int j = 0; j < 12; ++j) {
    std::string content;
    for (int w = 0; w < 8; ++w) content += vocab[gen() % vocab.size()] + " ";
    rows.push_back(post("t" + std::to_string(j), "p" + std::to_string(j), "u", day(2024, 1, 1), content));
  }
  const PostTable t = table_of(rows);
  const KeywordCorpus corpus(t);
  const KeywordSet kw = cluster_keywords(cluster_of({0}, {0, 1, 2, 3}, {0}), corpus, 3);
  CHECK(kw.keywords.size() <= 3);
  for (const auto& k : kw.keywords) {
    CHECK(k.term == text::lower(k.term));
    CHECK(text::words(k.term).size() == 1);
    CHECK(!text::is_stop_word(k.term));
    CHECK(k.term.size() >= 3);
  }
  for (std::size_t n = 1; n < kw.keywords.size(); ++n) CHECK(kw.keywords[n - 1].score >= kw.keywords[n].score);
}

TEST_CASE("Jaccard set arithmetic") {
  CHECK(jaccard({"a", "b", "c"}, {"b", "c", "d"}) == 0.5);
  CHECK(jaccard({"a", "b"}, {"a", "b"}) == 1.0);
  CHECK(jaccard({"a"}, {"b"}) == 0.0);
  CHECK(jaccard({}, {"b"}) == 0.0);
}

TEST_CASE("labels") {
  SUBCASE("identical keyword set and bag") {
    const auto classes = normalize_classes({{"A", {"alpha", "beta"}}, {"T", {"gamma"}}});
    const ClusterLabel l = label_cluster(keywords_of({"beta", "alpha"}), classes);
    CHECK(l.label == "A");
    CHECK(l.scores[0].second == 1.0);
    CHECK(!l.is_mix);
  }
  SUBCASE("{a,b,c} against {b,c,d}") {
    const auto classes = normalize_classes({{"A", {"bbb", "ccc", "ddd"}}, {"T", {"zzz"}}});
    const ClusterLabel l = label_cluster(keywords_of({"aaa", "bbb", "ccc"}), classes);
    CHECK(l.scores[0].second == 0.5);
    CHECK(l.scores[1].second == 0.0);
    CHECK(l.label == "A");
  }
  SUBCASE("0.30 against 0.29 is Mix") {
    const auto kw = keywords_of(numbered("kw", 0, 100));
    const auto classes = normalize_classes({bag_for("A", 100, 30, 100, "a"), bag_for("T", 100, 29, 100, "t")});
    const ClusterLabel l = label_cluster(kw, classes);
    CHECK(l.scores[0].second == doctest::Approx(0.30));
    CHECK(l.scores[1].second == doctest::Approx(0.29));
    CHECK(l.is_mix);
    CHECK(l.label == "Mix");
    CHECK(l.tied == std::vector<std::string>{"A", "T"});
  }
  SUBCASE("a difference of exactly 0.02 is Mix") {
    const auto kw = keywords_of(numbered("kw", 0, 10));
    const auto classes = normalize_classes({bag_for("A", 10, 6, 50, "a"), bag_for("T", 10, 5, 50, "t")});
    const ClusterLabel l = label_cluster(kw, classes);
    CHECK(l.scores[0].second == 6.0 / 50.0);
    CHECK(l.scores[1].second == 5.0 / 50.0);
    CHECK(l.label == "Mix");
  }
  SUBCASE("a difference of 0.021 is not Mix") {
    const auto kw = keywords_of(numbered("kw", 0, 200));
    const auto classes = normalize_classes({bag_for("A", 200, 120, 1000, "a"), bag_for("T", 200, 99, 1000, "t")});
    const ClusterLabel l = label_cluster(kw, classes);
    CHECK(l.scores[0].second == 0.120);
    CHECK(l.scores[1].second == 0.099);
    CHECK(l.label == "A");
    CHECK(!l.is_mix);
  }
  SUBCASE("best score exactly at the floor is not G") {
    const auto classes = normalize_classes({bag_for("A", 1, 1, 20, "a"), {"T", {"zzz"}}});
    const ClusterLabel l = label_cluster(keywords_of({"kw0"}), classes);
    CHECK(l.scores[0].second == 0.05);
    CHECK(l.label == "A");
  }
  SUBCASE("best score below the floor is G") {
    const auto classes = normalize_classes({bag_for("A", 1, 1, 21, "a"), {"T", {"zzz"}}});
    const ClusterLabel l = label_cluster(keywords_of({"kw0"}), classes);
    CHECK(l.label == "G");
    CHECK(!l.is_mix);
  }
  SUBCASE("no keywords is G") {
    const auto classes = normalize_classes({{"A", {"x"}}, {"T", {"y"}}});
    CHECK(label_cluster(KeywordSet{}, classes).label == "G");
  }
  SUBCASE("three classes within range are all reported") {
    const auto kw = keywords_of(numbered("kw", 0, 100));
    const auto classes = normalize_classes({bag_for("A", 100, 30, 100, "a"), bag_for("T", 100, 29, 100, "t"),
                                            bag_for("P", 100, 31, 100, "p")});
    const ClusterLabel l = label_cluster(kw, classes);
    CHECK(l.label == "Mix");
    CHECK(l.tied == std::vector<std::string>{"A", "T", "P"});
  }
  SUBCASE("fewer than two classes is rejected") {
    CHECK_THROWS_AS(label_cluster(keywords_of({"a"}), normalize_classes({{"A", {"a"}}})), ValidationError);
  }
}

TEST_CASE("class definitions are normalized and validated") {
  const auto c = normalize_classes({{"A", {"Beta", " alpha ", "beta"}}, {"T", {"x"}}});
  CHECK(c[0].bag == std::vector<std::string>{"alpha", "beta"});
  CHECK_THROWS_AS(normalize_classes({{"A", {"a"}}, {"A", {"b"}}}), ValidationError);
  CHECK_THROWS_AS(normalize_classes({{"A", {}}, {"T", {"b"}}}), ValidationError);
  CHECK_THROWS_AS(normalize_classes({{"G", {"a"}}, {"T", {"b"}}}), ValidationError);
  CHECK_THROWS_AS(normalize_classes({{"Mix", {"a"}}, {"T", {"b"}}}), ValidationError);
  const auto j = nlohmann::json::parse(R"({"classes":[{"label":"A","bag":["x"]},{"label":"B","bag":["y"]}]})");
  CHECK(classes_from_json(j).size() == 2);
  CHECK(classes_from_json(j.at("classes")).size() == 2);
  CHECK_THROWS_AS(classes_from_json(nlohmann::json::parse(R"([{"label":"A"}])")), ValidationError);
  const auto defaults = default_classes();
  REQUIRE(defaults.size() == 3);
  CHECK(defaults[0].label == "A");
  CHECK(defaults[1].label == "T");
  CHECK(defaults[2].label == "P");
}

TEST_CASE("labels do not depend on class order unless scores tie exactly") {
  std::mt19937_64 gen(21);
  const auto pool = numbered("w", 0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClassDefinition> classes;
    for (int c = 0; c < 4; ++c) {
      std::vector<std::string> bag;
      for (const auto& w : pool)
        if (gen() % 4 == 0) bag.push_back(w);
      if (bag.empty()) bag.push_back(pool[gen() % pool.size()]);
      classes.push_back({std::string(1, static_cast<char>('A' + c)), bag});
    }
    classes = normalize_classes(classes);
    std::vector<std::string> kw;
    for (const auto& w : pool)
      if (gen() % 3 == 0) kw.push_back(w);
    const ClusterLabel a = label_cluster(keywords_of(kw), classes);
    std::vector<ClassDefinition> reversed(classes.rbegin(), classes.rend());
    const ClusterLabel b = label_cluster(keywords_of(kw), reversed);
    std::vector<double> scores;
    for (const auto& s : a.scores) {
      CHECK(s.second >= 0.0);
      CHECK(s.second <= 1.0);
      scores.push_back(s.second);
    }
    std::sort(scores.rbegin(), scores.rend());
    if (scores[0] != scores[1]) CHECK(a.label == b.label);
    CHECK(std::set<std::string>(a.tied.begin(), a.tied.end()) == std::set<std::string>(b.tied.begin(), b.tied.end()));
  }
}

TEST_CASE("behavior metrics") {
  SUBCASE("one user, one thread, one post of six tokens") {
    const PostTable t = table_of({post("t1", "p1", "alice", day(2024, 1, 1), "one two three four five six")});
    const TimeIndex time = discretize(t, Granularity::week);
    const Cluster c = cluster_of({0}, {0}, {0});
    const BehaviorProfile p = behavior_profile(c, cluster_activity(c, t, time), t);
    const std::array<double, 10> want = {6, 1, 1, 1, 1, 1, 6, 1, 0, 100};
    for (std::size_t k = 0; k < 10; ++k) CHECK(p.metrics[k] == want[k]);
  }
  SUBCASE("hand-computed two-user fixture") {
    // alice starts t1 (4 tokens) and replies in t2 (2 tokens); bob starts
    // t2 (3 tokens) and replies twice in t1 on a later day (1 token each).
    const PostTable t = table_of({post("t1", "p1", "alice", day(2024, 1, 1), "w w w w"),
                                  post("t2", "p2", "bob", day(2024, 1, 1), "w w w"),
                                  post("t2", "p3", "alice", day(2024, 1, 2), "w w"),
                                  post("t1", "p4", "bob", day(2024, 1, 4), "w"),
                                  post("t1", "p5", "bob", day(2024, 1, 4), "w")});
    const TimeIndex time = discretize(t, Granularity::week);
    const Cluster c = cluster_of({0, 1}, {0, 1}, {0});
    const BehaviorProfile p = behavior_profile(c, cluster_activity(c, t, time), t);
    CHECK(p.metrics[0] == doctest::Approx(((4.0 + 2.0) / 2 + (3.0 + 1 + 1) / 3) / 2));
    CHECK(p.metrics[1] == 1.0);
    CHECK(p.metrics[2] == doctest::Approx((2.0 / 2 + 3.0 / 2) / 2));
    CHECK(p.metrics[3] == 2.5);
    CHECK(p.metrics[4] == 2.5);
    CHECK(p.metrics[5] == doctest::Approx((2.0 + 2.0) / 2));
    CHECK(p.metrics[6] == doctest::Approx((4.0 + 3.0) / 2));
    CHECK(p.metrics[7] == 2.0);
    CHECK(p.metrics[8] == 3.0);
    CHECK(p.metrics[9] == doctest::Approx(100.0 * 3 / 4));
  }
  SUBCASE("a user who only comments adds nothing to m2") {
    const PostTable t = table_of({post("t1", "p1", "alice", day(2024, 1, 1), "start"),
                                  post("t1", "p2", "bob", day(2024, 1, 1), "reply")});
    const TimeIndex time = discretize(t, Granularity::week);
    const Cluster c = cluster_of({0, 1}, {0}, {0});
    const BehaviorProfile p = behavior_profile(c, cluster_activity(c, t, time), t);
    CHECK(p.metrics[1] == 0.5);
  }
  SUBCASE("metrics are nonnegative and m10 is in (0, 100]") {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<PostRecord> rows;
      for (int n = 0; n < 40; ++n) {
        rows.push_back(post("t" + std::to_string(gen() % 5), "p" + std::to_string(n), "u" + std::to_string(gen() % 6),
                            day(2024, 1, 1) + std::chrono::days{gen() % 30}, std::string(gen() % 5, 'x') + " word"));
      }
      const PostTable t = table_of(rows);
      const TimeIndex time = discretize(t, Granularity::week);
      std::vector<int> users(static_cast<std::size_t>(t.user_count())), threads(static_cast<std::size_t>(t.thread_count())),
          weeks(static_cast<std::size_t>(time.slot_count));
      std::iota(users.begin(), users.end(), 0);
      std::iota(threads.begin(), threads.end(), 0);
      std::iota(weeks.begin(), weeks.end(), 0);
      const Cluster c = cluster_of(users, threads, weeks);
      const BehaviorProfile p = behavior_profile(c, cluster_activity(c, t, time), t);
      for (double m : p.metrics) CHECK(m >= 0.0);
      CHECK(p.metrics[9] > 0.0);
      CHECK(p.metrics[9] <= 100.0);
    }
  }
}

TEST_CASE("min-max normalization") {
  const auto run = [](std::vector<double> values) {
    std::vector<BehaviorProfile> ps(values.size());
    for (std::size_t n = 0; n < values.size(); ++n) ps[n].metrics.fill(values[n]);
    normalize_profiles(ps);
    std::vector<double> out;
    for (const auto& p : ps) out.push_back(p.normalized[0]);
    return out;
  };
  CHECK(run({2, 4}) == std::vector<double>{0, 1});
  CHECK(run({1, 2, 3}) == std::vector<double>{0, 0.5, 1});
  CHECK(run({7}) == std::vector<double>{0});
  CHECK(run({3, 3, 3}) == std::vector<double>{0, 0, 0});
  std::vector<BehaviorProfile> empty;
  normalize_profiles(empty);
}

TEST_CASE("DBSCAN anomalies") {
  SUBCASE("five identical rows and one distant row") {
    std::vector<std::vector<double>> rows(5, std::vector<double>(10, 0.2));
    rows.push_back(std::vector<double>(10, 1.0));
    const AnomalyReport r = detect_anomalies(rows, 0.5, 3);
    CHECK(r.anomalous == std::vector<int>{5});
    CHECK(!r.unlabelable);
  }
  SUBCASE("identical rows have no anomalies") {
    CHECK(detect_anomalies(std::vector<std::vector<double>>(4, std::vector<double>(3, 0.5))).anomalous.empty());
  }
  SUBCASE("fewer rows than min_pts are unlabelable") {
    const AnomalyReport r = detect_anomalies({{0.0}, {1.0}}, 0.5, 3);
    CHECK(r.unlabelable);
    CHECK(r.anomalous.empty());
    CHECK(!detect_anomalies({}, 0.5, 3).unlabelable);
  }
  SUBCASE("matches textbook DBSCAN and ignores row order") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 3 + gen() % 20;
      std::vector<std::vector<double>> rows(n, std::vector<double>(3));
      for (auto& r : rows)
        for (auto& v : r) v = uniform01(gen);
      const double eps = 0.2 + 0.3 * uniform01(gen);
      const int min_pts = 2 + static_cast<int>(gen() % 3);
      const AnomalyReport got = detect_anomalies(rows, eps, min_pts);
      if (n < static_cast<std::size_t>(min_pts)) {
        CHECK(got.unlabelable);
        CHECK(got.anomalous.empty());
        continue;
      }
      CHECK(std::set<int>(got.anomalous.begin(), got.anomalous.end()) == reference_dbscan(rows, eps, min_pts));
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), gen);
      std::vector<std::vector<double>> shuffled;
      for (int p : perm) shuffled.push_back(rows[static_cast<std::size_t>(p)]);
      std::set<int> mapped;
      for (int a : detect_anomalies(shuffled, eps, min_pts).anomalous) mapped.insert(perm[static_cast<std::size_t>(a)]);
      CHECK(mapped == std::set<int>(got.anomalous.begin(), got.anomalous.end()));
    }
  }
}

TEST_CASE("scree points are the stored counts") {
  std::vector<ClusterCard> cards(2);
  cards[0].cluster_id = 0;
  cards[0].users.resize(15);
  cards[0].threads.resize(145);
  cards[0].duration_days = 30;
  cards[0].active_percent = 40.0;
  cards[1].cluster_id = 1;
  cards[1].users.resize(3);
  cards[1].threads.resize(2);
  cards[1].duration_days = 0;
  cards[1].active_percent = 100.0;
  std::vector<BehaviorProfile> profiles(2);
  profiles[0].metrics[6] = 12.5;
  std::vector<ClusterLabel> labels(2);
  labels[0].label = "A";
  labels[1].label = "G";
  const auto series = scree_data(cards, profiles, labels, {{"m7", "users"}});
  REQUIRE(series.size() == 3);
  CHECK(series[0].x == "users");
  CHECK(series[0].y == "threads");
  CHECK(series[0].points[0].x == 15);
  CHECK(series[0].points[0].y == 145);
  CHECK(series[0].points[0].label == "A");
  CHECK(series[1].points[1].x == 0);
  CHECK(series[1].points[1].y == 100.0);
  CHECK(series[2].points[0].x == 12.5);
  CHECK(series[2].points[1].y == 3);
  const auto empty = scree_data({}, {}, {});
  REQUIRE(empty.size() == 2);
  CHECK(empty[0].points.empty());
  CHECK_THROWS_AS(scree_data(cards, profiles, labels, {{"bogus", "users"}}), ValidationError);
}
