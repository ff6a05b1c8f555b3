#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forumcp/clusters.hpp"
#include "forumcp/lda.hpp"
#include "forumcp/profiling.hpp"

namespace forumcp {

/// A thread's best topic and its relevance (the topic's share of the title).
struct TopicAssignment {
  int thread = 0;  ///< PostTable thread index
  int topic = 0;
  double score = 0.0;
};

/// Argmax over each document's topic distribution, lower topic on ties.
std::vector<TopicAssignment> assign_topics(const TopicModel& tm);

struct TopicShare {
  int topic = 0;
  std::size_t threads = 0;
  double share = 0.0;
};

/// Topics ordered by assigned thread count (descending, ties by topic id);
/// returns the shortest prefix whose cumulative share reaches `th_dom`.
std::vector<TopicShare> dominant_topics(const std::vector<TopicAssignment>& assignments, double th_dom = 0.70);

struct StoryEntry {
  int thread = 0;
  std::string thread_id;
  std::string title;
  Date date{};  ///< first-post date
  int topic = 0;
  double score = 0.0;
};

struct StoryTopic {
  int topic = 0;
  std::vector<std::string> words;
  std::size_t threads = 0;
  double share = 0.0;
};

/// Everything needed to render a storyline for any r_t and th_dom without
/// refitting: the per-thread assignments and every topic's top words.
struct StorylineData {
  int cluster_id = 0;
  bool available = false;
  std::string reason;  ///< why not available
  int topic_count = 0;
  std::vector<std::vector<std::string>> topic_words;
  std::vector<TopicAssignment> assignments;
  /// Thread id, title and first-post date per assignment (parallel).
  std::vector<std::string> thread_ids;
  std::vector<std::string> titles;
  std::vector<Date> dates;
};

struct StoryLine {
  int cluster_id = 0;
  bool available = false;
  std::string reason;
  double th_dom = 0.70;
  int r_t = 5;
  std::vector<StoryTopic> dominant_topics;
  double coverage = 0.0;
  std::vector<StoryEntry> entries;  ///< first-post date ascending, ties by thread id
};

/// Fits the title topic model of one cluster. A cluster with fewer than two
/// usable titles yields an unavailable record rather than an error.
StorylineData storyline_data(const Cluster& c, const PostTable& table, std::uint64_t seed, int sweeps = 500);

/// Per dominant topic, its `r_t` most relevant threads (ties by thread id),
/// merged and sorted by first-post date.
StoryLine build_storyline(const StorylineData& data, const std::vector<TopicShare>& t_dom, int r_t = 5);

/// dominant_topics + build_storyline.
StoryLine make_storyline(const StorylineData& data, double th_dom = 0.70, int r_t = 5);

nlohmann::ordered_json to_json(const StorylineData& data);
StorylineData storyline_data_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const StoryLine& s);
/// Self-contained HTML fragment: a timeline list of the entries.
std::string storyline_html(const StoryLine& s);

struct TableViewRow {
  std::string forum_cid;
  std::size_t n_users = 0;
  std::string type;
  std::vector<std::string> top_threads;  ///< titles
  std::vector<std::string> top_users;
  std::vector<Date> top_dates;
  std::vector<std::string> dominant_topics;  ///< one word list per topic
};

/// One row per cluster in card order. `labels` and `stories` are parallel to
/// `cards`; a story may be unavailable, leaving the topic column empty.
std::vector<TableViewRow> build_tableview(const std::string& forum, const std::vector<ClusterCard>& cards,
                                          const std::vector<ClusterLabel>& labels, const std::vector<StoryLine>& stories,
                                          int k = 3);

nlohmann::ordered_json to_json(const std::vector<TableViewRow>& rows);
/// Columns forum_cid,n_users,type,top_threads,top_users,top_dates,dominant_topics;
/// list cells are joined with "; ".
std::string tableview_csv(const std::vector<TableViewRow>& rows);

std::string html_escape(std::string_view s);
std::string csv_field(std::string_view s);

}  // namespace forumcp
