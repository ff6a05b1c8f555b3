#include "forumcp/profiling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "forumcp/error.hpp"
#include "forumcp/text.hpp"

namespace forumcp {

KeywordCorpus::KeywordCorpus(const PostTable& table) {
  terms_.resize(static_cast<std::size_t>(table.thread_count()));
  for (int j = 0; j < table.thread_count(); ++j) {
    auto& counts = terms_[static_cast<std::size_t>(j)];
    for (auto& t : text::terms(table.first_post_of(j).content)) ++counts[std::move(t)];
    for (const auto& [term, n] : counts) ++df_[term];
  }
}

int KeywordCorpus::document_frequency(const std::string& term) const {
  const auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

KeywordSet cluster_keywords(const Cluster& c, const KeywordCorpus& corpus, int n) {
  if (n < 1) throw ValidationError("keyword count must be >= 1");
  KeywordSet out;
  out.cluster_id = c.cluster_id;
  std::map<std::string, int> tf;
  for (const auto& t : c.threads) {
    for (const auto& [term, count] : corpus.terms(t.index)) tf[term] += count;
  }
  const double docs = corpus.documents();
  for (const auto& [term, count] : tf) {
    const double score = count * std::log(docs / corpus.document_frequency(term));
    if (score > 0.0) out.keywords.push_back({term, score});
  }
  std::sort(out.keywords.begin(), out.keywords.end(), [](const Keyword& a, const Keyword& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  if (out.keywords.size() > static_cast<std::size_t>(n)) out.keywords.resize(static_cast<std::size_t>(n));
  if (out.keywords.empty()) out.warning = "no keyword survived filtering";
  return out;
}

std::vector<ClassDefinition> normalize_classes(std::vector<ClassDefinition> classes) {
  std::set<std::string> labels;
  for (auto& c : classes) {
    if (c.label.empty()) throw ValidationError("class label must not be empty");
    if (c.label == kGeneralLabel || c.label == kMixLabel) {
      throw ValidationError("class label '" + c.label + "' is reserved");
    }
    if (!labels.insert(c.label).second) throw ValidationError("duplicate class label '" + c.label + "'");
    std::vector<std::string> bag;
    for (const auto& w : c.bag) {
      std::string t = text::lower(w);
      const auto b = t.find_first_not_of(" \t\r\n");
      const auto e = t.find_last_not_of(" \t\r\n");
      if (b == std::string::npos) continue;
      bag.push_back(t.substr(b, e - b + 1));
    }
    std::sort(bag.begin(), bag.end());
    bag.erase(std::unique(bag.begin(), bag.end()), bag.end());
    if (bag.empty()) throw ValidationError("class '" + c.label + "' has an empty bag");
    c.bag = std::move(bag);
  }
  return classes;
}

std::vector<ClassDefinition> classes_from_json(const nlohmann::json& j) {
  const nlohmann::json& list = j.is_object() ? j.at("classes") : j;
  if (!list.is_array()) throw ValidationError("classes must be a JSON array");
  std::vector<ClassDefinition> out;
  for (const auto& c : list) {
    if (!c.is_object() || !c.contains("label") || !c.contains("bag")) {
      throw ValidationError("each class needs a label and a bag");
    }
    try {
      out.push_back({c.at("label").get<std::string>(), c.at("bag").get<std::vector<std::string>>()});
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("class label must be a string and bag a list of strings");
    }
  }
  return normalize_classes(std::move(out));
}

nlohmann::ordered_json to_json(const std::vector<ClassDefinition>& classes) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& c : classes) out.push_back({{"label", c.label}, {"bag", c.bag}});
  return out;
}

std::vector<ClassDefinition> default_classes() {
  const char* env = std::getenv("FORUMCP_DATA_DIR");
  const std::string path = std::string(env && *env ? env : FORUMCP_DATA_DIR) + "/classes.json";
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open default classes file " + path);
  try {
    return classes_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (auto i = a.begin(), k = b.begin(); i != a.end() && k != b.end();) {
    if (*i < *k) {
      ++i;
    } else if (*k < *i) {
      ++k;
    } else {
      ++common;
      ++i;
      ++k;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

ClusterLabel label_cluster(const KeywordSet& kw, const std::vector<ClassDefinition>& classes, double mix_range,
                           double g_floor) {
  if (classes.size() < 2) throw ValidationError("labeling needs at least two classes");
  // Scores that differ only by rounding noise count as equal.
  constexpr double kSlack = 1e-9;
  std::vector<std::string> terms;
  for (const auto& k : kw.keywords) terms.push_back(k.term);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  ClusterLabel out;
  out.cluster_id = kw.cluster_id;
  std::size_t best = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    out.scores.emplace_back(classes[c].label, jaccard(terms, classes[c].bag));
    if (out.scores[c].second > out.scores[best].second) best = c;
  }
  const double top = out.scores[best].second;
  if (top < g_floor) {
    out.label = kGeneralLabel;
    return out;
  }
  for (const auto& [label, score] : out.scores) {
    if (top - score <= mix_range + kSlack) out.tied.push_back(label);
  }
  if (out.tied.size() > 1) {
    out.is_mix = true;
    out.label = kMixLabel;
  } else {
    out.tied.clear();
    out.label = out.scores[best].first;
  }
  return out;
}

nlohmann::ordered_json to_json(const KeywordSet& kw) {
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& k : kw.keywords) words.push_back({{"term", k.term}, {"weight", k.score}});
  nlohmann::ordered_json j = {{"cluster_id", kw.cluster_id}, {"keywords", std::move(words)}};
  if (!kw.warning.empty()) j["warning"] = kw.warning;
  return j;
}

KeywordSet keywords_from_json(const nlohmann::json& j) {
  KeywordSet kw;
  kw.cluster_id = j.at("cluster_id").get<int>();
  for (const auto& k : j.at("keywords")) kw.keywords.push_back({k.at("term").get<std::string>(), k.at("weight").get<double>()});
  if (j.contains("warning")) kw.warning = j.at("warning").get<std::string>();
  return kw;
}

nlohmann::ordered_json to_json(const ClusterLabel& label) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (const auto& [name, s] : label.scores) scores[name] = s;
  return {{"cluster_id", label.cluster_id},
          {"label", label.label},
          {"is_mix", label.is_mix},
          {"tied", label.tied},
          {"scores", std::move(scores)}};
}

const std::array<std::string_view, kMetricCount> kMetricNames = {
    "m1_post_length_per_user",     "m2_threads_initiated_per_user", "m3_comment_thread_ratio_per_user",
    "m4_comments_per_user",        "m5_comments_per_thread",        "m6_active_days_per_thread",
    "m7_first_post_length_per_user", "m8_users_per_thread",         "m9_duration_days",
    "m10_active_days_percent"};

BehaviorProfile behavior_profile(const Cluster& c, const ClusterActivity& activity, const PostTable& table) {
  struct UserStats {
    std::size_t posts = 0;
    double tokens = 0;
    std::set<int> threads;
    std::size_t initiated = 0;
    double initiated_tokens = 0;
  };
  struct ThreadStats {
    std::set<Date> days;
    std::set<int> users;
  };
  std::map<int, UserStats> users;
  std::map<int, ThreadStats> threads;
  for (std::size_t r : activity.posts) {
    const int u = table.record_user[r];
    const int j = table.record_thread[r];
    const double tokens = static_cast<double>(text::count_words(table.records[r].content));
    UserStats& us = users[u];
    ++us.posts;
    us.tokens += tokens;
    us.threads.insert(j);
    if (table.first_post[static_cast<std::size_t>(j)] == r) {
      ++us.initiated;
      us.initiated_tokens += tokens;
    }
    ThreadStats& ts = threads[j];
    ts.days.insert(table.records[r].date);
    ts.users.insert(u);
  }

  BehaviorProfile p;
  p.cluster_id = c.cluster_id;
  auto& m = p.metrics;
  if (users.empty()) return p;
  const double nu = static_cast<double>(users.size());
  const double nt = static_cast<double>(threads.size());
  const double posts = static_cast<double>(activity.posts.size());
  double initiators = 0;
  for (const auto& [u, s] : users) {
    m[0] += s.tokens / static_cast<double>(s.posts);
    m[1] += static_cast<double>(s.initiated);
    m[2] += static_cast<double>(s.posts) / static_cast<double>(s.threads.size());
    if (s.initiated > 0) {
      m[6] += s.initiated_tokens / static_cast<double>(s.initiated);
      ++initiators;
    }
  }
  m[0] /= nu;
  m[1] /= nu;
  m[2] /= nu;
  m[3] = posts / nu;
  m[4] = posts / nt;
  for (const auto& [j, s] : threads) {
    m[5] += static_cast<double>(s.days.size());
    m[7] += static_cast<double>(s.users.size());
  }
  m[5] /= nt;
  m[6] = initiators > 0 ? m[6] / initiators : 0.0;
  m[7] /= nt;
  m[8] = static_cast<double>(activity.duration_days);
  m[9] = activity.active_percent;
  return p;
}

void normalize_profiles(std::vector<BehaviorProfile>& profiles) {
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : profiles) {
      lo = std::min(lo, p.metrics[k]);
      hi = std::max(hi, p.metrics[k]);
    }
    for (auto& p : profiles) p.normalized[k] = hi > lo ? (p.metrics[k] - lo) / (hi - lo) : 0.0;
  }
}

AnomalyReport detect_anomalies(const std::vector<std::vector<double>>& rows, double eps, int min_pts) {
  if (!(eps > 0.0)) throw ValidationError("eps must be > 0");
  if (min_pts < 1) throw ValidationError("min_pts must be >= 1");
  AnomalyReport out;
  const std::size_t n = rows.size();
  if (n < static_cast<std::size_t>(min_pts)) {
    out.unlabelable = n > 0;
    return out;
  }
  const auto dist2 = [&](std::size_t a, std::size_t b) {
    if (rows[a].size() != rows[b].size()) throw ValidationError("rows must have equal length");
    double s = 0;
    for (std::size_t k = 0; k < rows[a].size(); ++k) s += (rows[a][k] - rows[b][k]) * (rows[a][k] - rows[b][k]);
    return s;
  };
  const double eps2 = eps * eps;
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (dist2(a, b) <= eps2) neighbors[a].push_back(b);
  std::vector<char> core(n);
  for (std::size_t a = 0; a < n; ++a) core[a] = neighbors[a].size() >= static_cast<std::size_t>(min_pts);
  // Noise: not core and not within eps of any core point.
  for (std::size_t a = 0; a < n; ++a) {
    if (core[a]) continue;
    const bool reached = std::any_of(neighbors[a].begin(), neighbors[a].end(), [&](std::size_t b) { return core[b] != 0; });
    if (!reached) out.anomalous.push_back(static_cast<int>(a));
  }
  return out;
}

double scree_value(const ClusterCard& card, const BehaviorProfile& profile, std::string_view axis) {
  if (axis == "users") return static_cast<double>(card.users.size());
  if (axis == "threads") return static_cast<double>(card.threads.size());
  if (axis == "weeks") return static_cast<double>(card.weeks.size());
  if (axis == "posts") return static_cast<double>(card.posts);
  if (axis == "duration_days") return static_cast<double>(card.duration_days);
  if (axis == "active_days") return static_cast<double>(card.active_days);
  if (axis == "active_percent") return card.active_percent;
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    const std::string_view name = kMetricNames[k];
    if (axis == name || axis == name.substr(0, name.find('_'))) return profile.metrics[k];
  }
  throw ValidationError("unknown scree axis '" + std::string(axis) + "'");
}

std::vector<ScreeSeries> scree_data(const std::vector<ClusterCard>& cards, const std::vector<BehaviorProfile>& profiles,
                                    const std::vector<ClusterLabel>& labels,
                                    const std::vector<std::pair<std::string, std::string>>& extra) {
  if (profiles.size() != cards.size() || labels.size() != cards.size()) {
    throw ValidationError("scree inputs must be parallel");
  }
  std::vector<std::pair<std::string, std::string>> axes = {{"users", "threads"}, {"duration_days", "active_percent"}};
  axes.insert(axes.end(), extra.begin(), extra.end());
  std::vector<ScreeSeries> out;
  for (const auto& [x, y] : axes) {
    ScreeSeries s{x, y, {}};
    for (std::size_t c = 0; c < cards.size(); ++c) {
      s.points.push_back({cards[c].cluster_id, labels[c].label, scree_value(cards[c], profiles[c], x),
                          scree_value(cards[c], profiles[c], y)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json to_json(const std::vector<ScreeSeries>& series) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& s : series) {
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& p : s.points) {
      points.push_back({{"cluster_id", p.cluster_id}, {"label", p.label}, {"x", p.x}, {"y", p.y}});
    }
    out.push_back({{"x", s.x}, {"y", s.y}, {"points", std::move(points)}});
  }
  return out;
}

}  // namespace forumcp
