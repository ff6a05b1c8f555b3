#include "forumcp/clusters.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "forumcp/error.hpp"

namespace forumcp {

namespace {

std::vector<Member> significant(const Matrix<double>& A, Index col, double epsilon) {
  std::vector<Member> out;
  for (Index n = 0; n < A.rows(); ++n) {
    if (A(n, col) > epsilon) out.push_back({static_cast<int>(n), A(n, col)});
  }
  std::sort(out.begin(), out.end(), [](const Member& a, const Member& b) {
    return a.strength != b.strength ? a.strength > b.strength : a.index < b.index;
  });
  return out;
}

std::vector<char> mask(const std::vector<Member>& members, int size) {
  std::vector<char> m(static_cast<std::size_t>(size), 0);
  for (const auto& e : members) m[static_cast<std::size_t>(e.index)] = 1;
  return m;
}

}  // namespace

std::vector<Cluster> extract_clusters(const CPModel<double>& model, double epsilon, std::vector<std::string>* dropped) {
  std::vector<Cluster> out;
  for (Index r = 0; r < model.rank(); ++r) {
    Cluster c;
    c.component = static_cast<int>(r);
    c.users = significant(model.U, r, epsilon);
    c.threads = significant(model.T, r, epsilon);
    c.weeks = significant(model.W, r, epsilon);
    if (c.users.empty() || c.threads.empty() || c.weeks.empty()) {
      if (dropped) {
        std::string empty;
        for (const auto& [name, list] : {std::pair{"user", &c.users}, {"thread", &c.threads}, {"week", &c.weeks}}) {
          if (list->empty()) empty += empty.empty() ? name : std::string(", ") + name;
        }
        dropped->push_back("component " + std::to_string(r) + " dropped: no significant " + empty + " entries");
      }
      continue;
    }
    c.energy = model.U.col(r).norm() * model.T.col(r).norm() * model.W.col(r).norm();
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.energy > b.energy; });
  for (std::size_t n = 0; n < out.size(); ++n) out[n].cluster_id = static_cast<int>(n);
  return out;
}

ClusterActivity cluster_activity(const Cluster& c, const PostTable& table, const TimeIndex& time) {
  const auto users = mask(c.users, table.user_count());
  const auto threads = mask(c.threads, table.thread_count());
  const auto slots = mask(c.weeks, time.slot_count);
  ClusterActivity a;
  std::set<Date> days;
  for (std::size_t r = 0; r < table.records.size(); ++r) {
    if (!users[static_cast<std::size_t>(table.record_user[r])] || !threads[static_cast<std::size_t>(table.record_thread[r])]) continue;
    const int s = time.slot(table.records[r].date);
    if (s < 0 || s >= time.slot_count || !slots[static_cast<std::size_t>(s)]) continue;
    a.posts.push_back(r);
    days.insert(table.records[r].date);
  }
  if (a.posts.empty()) {
    throw Error("inconsistent_cluster", "cluster " + std::to_string(c.cluster_id) + " (component " +
                                            std::to_string(c.component) + ") selects no posts");
  }
  a.first = *days.begin();
  a.last = *days.rbegin();
  a.duration_days = days_between(a.first, a.last);
  a.active_days = days.size();
  a.active_percent = 100.0 * static_cast<double>(a.active_days) / static_cast<double>(a.duration_days + 1);
  return a;
}

std::vector<std::optional<Date>> slot_peaks(const Cluster& c, const ClusterActivity& activity, const PostTable& table,
                                            const TimeIndex& time) {
  std::map<int, std::map<Date, std::size_t>> per_slot;
  for (std::size_t r : activity.posts) {
    const Date d = table.records[r].date;
    ++per_slot[time.slot(d)][d];
  }
  std::vector<std::optional<Date>> out;
  out.reserve(c.weeks.size());
  for (const auto& w : c.weeks) {
    const auto it = per_slot.find(w.index);
    if (it == per_slot.end()) {
      out.emplace_back();
      continue;
    }
    // Busiest day; the earliest date wins ties.
    std::optional<Date> best;
    std::size_t best_count = 0;
    for (const auto& [d, n] : it->second) {
      if (n > best_count) {
        best = d;
        best_count = n;
      }
    }
    out.push_back(best);
  }
  return out;
}

TopEntities top_entities(const Cluster& c, const PostTable& table, const TimeIndex& time, int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  const auto take = [k](const std::vector<Member>& v) {
    return std::vector<Member>(v.begin(), v.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(v.size())));
  };
  TopEntities t;
  t.users = take(c.users);
  t.threads = take(c.threads);
  t.weeks = take(c.weeks);
  const auto peaks = slot_peaks(c, cluster_activity(c, table, time), table, time);
  for (std::size_t n = 0; n < t.weeks.size(); ++n) t.dates.push_back(peaks[n].value_or(time.slot_start(t.weeks[n].index)));
  return t;
}

ClusterCard make_card(const Cluster& c, const ClusterActivity& activity, const PostTable& table, const TimeIndex& time) {
  ClusterCard card;
  card.cluster_id = c.cluster_id;
  card.component = c.component;
  card.energy = c.energy;
  for (const auto& m : c.users) card.users.push_back({m.index, table.users.name(m.index), "", m.strength});
  for (const auto& m : c.threads) {
    card.threads.push_back({m.index, table.threads.name(m.index), table.thread_title(m.index), m.strength});
  }
  const auto peaks = slot_peaks(c, activity, table, time);
  for (std::size_t n = 0; n < c.weeks.size(); ++n) {
    const Date start = time.slot_start(c.weeks[n].index);
    card.weeks.push_back({c.weeks[n].index, start, c.weeks[n].strength, peaks[n].value_or(start)});
  }
  card.posts = activity.posts.size();
  card.first = activity.first;
  card.last = activity.last;
  card.duration_days = activity.duration_days;
  card.active_days = activity.active_days;
  card.active_percent = activity.active_percent;
  return card;
}

nlohmann::ordered_json to_json(const ClusterCard& card) {
  nlohmann::ordered_json users = nlohmann::ordered_json::array();
  for (const auto& u : card.users) users.push_back({{"index", u.index}, {"name", u.name}, {"strength", u.strength}});
  nlohmann::ordered_json threads = nlohmann::ordered_json::array();
  for (const auto& t : card.threads) {
    threads.push_back({{"index", t.index}, {"id", t.name}, {"title", t.title}, {"strength", t.strength}});
  }
  nlohmann::ordered_json weeks = nlohmann::ordered_json::array();
  for (const auto& w : card.weeks) {
    weeks.push_back({{"slot", w.slot},
                     {"start_date", format_date(w.start)},
                     {"strength", w.strength},
                     {"peak_date", format_date(w.peak)}});
  }
  return {{"cluster_id", card.cluster_id},
          {"component", card.component},
          {"energy", card.energy},
          {"users", std::move(users)},
          {"threads", std::move(threads)},
          {"weeks", std::move(weeks)},
          {"activity",
           {{"posts", card.posts},
            {"first_date", format_date(card.first)},
            {"last_date", format_date(card.last)},
            {"duration_days", card.duration_days},
            {"active_days", card.active_days},
            {"active_percent", card.active_percent}}}};
}

namespace {

Date date_field(const nlohmann::json& j, const char* key) {
  Date d{};
  if (!parse_iso_date(j.at(key).get<std::string>(), d)) throw ValidationError(std::string("bad date in field ") + key);
  return d;
}

}  // namespace

ClusterCard card_from_json(const nlohmann::json& j) {
  ClusterCard card;
  card.cluster_id = j.at("cluster_id").get<int>();
  card.component = j.at("component").get<int>();
  card.energy = j.at("energy").get<double>();
  for (const auto& u : j.at("users")) {
    card.users.push_back({u.at("index").get<int>(), u.at("name").get<std::string>(), "", u.at("strength").get<double>()});
  }
  for (const auto& t : j.at("threads")) {
    card.threads.push_back({t.at("index").get<int>(), t.at("id").get<std::string>(), t.at("title").get<std::string>(),
                            t.at("strength").get<double>()});
  }
  for (const auto& w : j.at("weeks")) {
    card.weeks.push_back({w.at("slot").get<int>(), date_field(w, "start_date"), w.at("strength").get<double>(),
                          date_field(w, "peak_date")});
  }
  const auto& a = j.at("activity");
  card.posts = a.at("posts").get<std::size_t>();
  card.first = date_field(a, "first_date");
  card.last = date_field(a, "last_date");
  card.duration_days = a.at("duration_days").get<long>();
  card.active_days = a.at("active_days").get<std::size_t>();
  card.active_percent = a.at("active_percent").get<double>();
  return card;
}

}  // namespace forumcp
