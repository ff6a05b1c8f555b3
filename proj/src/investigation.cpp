#include "forumcp/investigation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "forumcp/error.hpp"

namespace forumcp {

namespace {

constexpr int kTopicWords = 10;

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t n = 0; n < parts.size(); ++n) {
    if (n) out += sep;
    out += parts[n];
  }
  return out;
}

}  // namespace

std::vector<TopicAssignment> assign_topics(const TopicModel& tm) {
  std::vector<TopicAssignment> out;
  for (Eigen::Index d = 0; d < tm.doc_topic.rows(); ++d) {
    int best = 0;
    for (int t = 1; t < tm.doc_topic.cols(); ++t) {
      if (tm.doc_topic(d, t) > tm.doc_topic(d, best)) best = t;
    }
    const int thread = static_cast<std::size_t>(d) < tm.threads.size() ? tm.threads[static_cast<std::size_t>(d)] : static_cast<int>(d);
    out.push_back({thread, best, tm.doc_topic(d, best)});
  }
  return out;
}

std::vector<TopicShare> dominant_topics(const std::vector<TopicAssignment>& assignments, double th_dom) {
  if (!(th_dom > 0.0 && th_dom <= 1.0)) throw ValidationError("th_dom must be in (0, 1]");
  std::map<int, std::size_t> counts;
  for (const auto& a : assignments) ++counts[a.topic];
  std::vector<TopicShare> ranked;
  const double total = static_cast<double>(assignments.size());
  for (const auto& [topic, n] : counts) ranked.push_back({topic, n, static_cast<double>(n) / total});
  std::stable_sort(ranked.begin(), ranked.end(), [](const TopicShare& a, const TopicShare& b) { return a.threads > b.threads; });
  std::vector<TopicShare> out;
  std::size_t covered = 0;
  for (const auto& t : ranked) {
    // Stop once the covered count reaches th_dom of the total, up to rounding.
    if (static_cast<double>(covered) >= th_dom * total - 1e-9 * total) break;
    out.push_back(t);
    covered += t.threads;
  }
  return out;
}

StorylineData storyline_data(const Cluster& c, const PostTable& table, std::uint64_t seed, int sweeps) {
  StorylineData data;
  data.cluster_id = c.cluster_id;
  TopicModel tm;
  try {
    tm = fit_titles_lda(c, table, seed, sweeps);
  } catch (const Error& e) {
    if (e.code() != "storyline_unavailable") throw;
    data.reason = e.what();
    return data;
  }
  data.available = true;
  data.topic_count = tm.topic_count;
  for (int t = 0; t < tm.topic_count; ++t) data.topic_words.push_back(tm.top_words(t, kTopicWords));
  data.assignments = assign_topics(tm);
  for (const auto& a : data.assignments) {
    data.thread_ids.push_back(table.threads.name(a.thread));
    data.titles.push_back(table.thread_title(a.thread));
    data.dates.push_back(table.first_post_of(a.thread).date);
  }
  return data;
}

StoryLine build_storyline(const StorylineData& data, const std::vector<TopicShare>& t_dom, int r_t) {
  if (r_t < 1) throw ValidationError("r_t must be >= 1");
  StoryLine s;
  s.cluster_id = data.cluster_id;
  s.available = data.available;
  s.reason = data.reason;
  s.r_t = r_t;
  if (!data.available) return s;
  if (t_dom.empty()) throw ValidationError("dominant topic list is empty");
  for (const auto& t : t_dom) {
    s.dominant_topics.push_back({t.topic, data.topic_words.at(static_cast<std::size_t>(t.topic)), t.threads, t.share});
    s.coverage += t.share;
    std::vector<std::size_t> members;
    for (std::size_t n = 0; n < data.assignments.size(); ++n) {
      if (data.assignments[n].topic == t.topic) members.push_back(n);
    }
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = data.assignments[a];
      const auto& y = data.assignments[b];
      return x.score != y.score ? x.score > y.score : data.thread_ids[a] < data.thread_ids[b];
    });
    if (members.size() > static_cast<std::size_t>(r_t)) members.resize(static_cast<std::size_t>(r_t));
    for (std::size_t n : members) {
      const auto& a = data.assignments[n];
      s.entries.push_back({a.thread, data.thread_ids[n], data.titles[n], data.dates[n], a.topic, a.score});
    }
  }
  std::sort(s.entries.begin(), s.entries.end(), [](const StoryEntry& a, const StoryEntry& b) {
    return a.date != b.date ? a.date < b.date : a.thread_id < b.thread_id;
  });
  return s;
}

StoryLine make_storyline(const StorylineData& data, double th_dom, int r_t) {
  StoryLine s = build_storyline(data, data.available ? dominant_topics(data.assignments, th_dom) : std::vector<TopicShare>{}, r_t);
  s.th_dom = th_dom;
  return s;
}

nlohmann::ordered_json to_json(const StorylineData& data) {
  nlohmann::ordered_json j = {{"cluster_id", data.cluster_id}, {"available", data.available}};
  if (!data.available) {
    j["reason"] = data.reason;
    return j;
  }
  j["topic_count"] = data.topic_count;
  j["topic_words"] = data.topic_words;
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < data.assignments.size(); ++n) {
    a.push_back({{"thread", data.assignments[n].thread},
                 {"thread_id", data.thread_ids[n]},
                 {"title", data.titles[n]},
                 {"date", format_date(data.dates[n])},
                 {"topic", data.assignments[n].topic},
                 {"score", data.assignments[n].score}});
  }
  j["assignments"] = std::move(a);
  return j;
}

StorylineData storyline_data_from_json(const nlohmann::json& j) {
  StorylineData data;
  data.cluster_id = j.at("cluster_id").get<int>();
  data.available = j.at("available").get<bool>();
  if (!data.available) {
    data.reason = j.value("reason", "");
    return data;
  }
  data.topic_count = j.at("topic_count").get<int>();
  data.topic_words = j.at("topic_words").get<std::vector<std::vector<std::string>>>();
  for (const auto& a : j.at("assignments")) {
    data.assignments.push_back({a.at("thread").get<int>(), a.at("topic").get<int>(), a.at("score").get<double>()});
    data.thread_ids.push_back(a.at("thread_id").get<std::string>());
    data.titles.push_back(a.at("title").get<std::string>());
    Date d{};
    if (!parse_iso_date(a.at("date").get<std::string>(), d)) throw ValidationError("bad storyline date");
    data.dates.push_back(d);
  }
  return data;
}

nlohmann::ordered_json to_json(const StoryLine& s) {
  nlohmann::ordered_json j = {{"cluster_id", s.cluster_id}, {"available", s.available}};
  if (!s.available) {
    j["reason"] = s.reason;
    return j;
  }
  j["th_dom"] = s.th_dom;
  j["r_t"] = s.r_t;
  j["coverage"] = s.coverage;
  nlohmann::ordered_json topics = nlohmann::ordered_json::array();
  for (const auto& t : s.dominant_topics) {
    topics.push_back({{"topic", t.topic}, {"words", t.words}, {"threads", t.threads}, {"share", t.share}});
  }
  j["dominant_topics"] = std::move(topics);
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : s.entries) {
    entries.push_back({{"thread_id", e.thread_id},
                       {"title", e.title},
                       {"date", format_date(e.date)},
                       {"topic", e.topic},
                       {"score", e.score}});
  }
  j["entries"] = std::move(entries);
  return j;
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string storyline_html(const StoryLine& s) {
  std::ostringstream out;
  out << "<section class=\"storyline\" data-cluster=\"" << s.cluster_id << "\">\n";
  out << "<h2>Cluster " << s.cluster_id << "</h2>\n";
  if (!s.available) {
    out << "<p class=\"unavailable\">" << html_escape(s.reason) << "</p>\n</section>\n";
    return out.str();
  }
  out << "<ul class=\"topics\">\n";
  for (const auto& t : s.dominant_topics) {
    out << "<li data-topic=\"" << t.topic << "\">" << html_escape(join(t.words, ", ")) << " ("
        << t.threads << " threads)</li>\n";
  }
  out << "</ul>\n<ol class=\"timeline\">\n";
  for (const auto& e : s.entries) {
    out << "<li data-thread=\"" << html_escape(e.thread_id) << "\" data-topic=\"" << e.topic << "\"><time>"
        << format_date(e.date) << "</time> " << html_escape(e.title) << "</li>\n";
  }
  out << "</ol>\n</section>\n";
  return out.str();
}

std::vector<TableViewRow> build_tableview(const std::string& forum, const std::vector<ClusterCard>& cards,
                                          const std::vector<ClusterLabel>& labels, const std::vector<StoryLine>& stories,
                                          int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (labels.size() != cards.size() || stories.size() != cards.size()) {
    throw ValidationError("tableview inputs must be parallel");
  }
  const std::size_t kk = static_cast<std::size_t>(k);
  std::vector<TableViewRow> rows;
  for (std::size_t c = 0; c < cards.size(); ++c) {
    const ClusterCard& card = cards[c];
    TableViewRow row;
    row.forum_cid = forum + "-" + std::to_string(card.cluster_id);
    row.n_users = card.users.size();
    row.type = labels[c].label;
    for (std::size_t n = 0; n < std::min(kk, card.threads.size()); ++n) row.top_threads.push_back(card.threads[n].title);
    for (std::size_t n = 0; n < std::min(kk, card.users.size()); ++n) row.top_users.push_back(card.users[n].name);
    for (std::size_t n = 0; n < std::min(kk, card.weeks.size()); ++n) row.top_dates.push_back(card.weeks[n].peak);
    for (const auto& t : stories[c].dominant_topics) {
      row.dominant_topics.push_back(join(std::vector<std::string>(t.words.begin(), t.words.begin() + std::min<std::size_t>(5, t.words.size())), " "));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::ordered_json to_json(const std::vector<TableViewRow>& rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    std::vector<std::string> dates;
    for (Date d : r.top_dates) dates.push_back(format_date(d));
    out.push_back({{"forum_cid", r.forum_cid},
                   {"n_users", r.n_users},
                   {"type", r.type},
                   {"top_threads", r.top_threads},
                   {"top_users", r.top_users},
                   {"top_dates", dates},
                   {"dominant_topics", r.dominant_topics}});
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string tableview_csv(const std::vector<TableViewRow>& rows) {
  std::string out = "forum_cid,n_users,type,top_threads,top_users,top_dates,dominant_topics\n";
  for (const auto& r : rows) {
    std::vector<std::string> dates;
    for (Date d : r.top_dates) dates.push_back(format_date(d));
    out += csv_field(r.forum_cid) + ',' + std::to_string(r.n_users) + ',' + csv_field(r.type) + ',' +
           csv_field(join(r.top_threads, "; ")) + ',' + csv_field(join(r.top_users, "; ")) + ',' +
           csv_field(join(dates, "; ")) + ',' + csv_field(join(r.dominant_topics, "; ")) + '\n';
  }
  return out;
}

}  // namespace forumcp
