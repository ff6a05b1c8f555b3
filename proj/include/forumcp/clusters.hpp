#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forumcp/ingest.hpp"
#include "forumcp/tensor.hpp"

namespace forumcp {

/// An entity (user, thread or time slot index) and its participation
/// strength in one component.
struct Member {
  int index = 0;
  double strength = 0.0;
};

/// One rank-one component after filtering. Member lists are sorted by
/// strength descending, ties by index ascending.
struct Cluster {
  int cluster_id = 0;  ///< position in energy order
  int component = 0;   ///< factor column it came from
  double energy = 0.0;  ///< product of the three column norms
  std::vector<Member> users;
  std::vector<Member> threads;
  std::vector<Member> weeks;
};

/// Keeps entries with strength > epsilon in every component. Components left
/// empty in some mode are dropped, with a note appended to `dropped`.
/// Clusters come back in descending energy order, ties by component.
std::vector<Cluster> extract_clusters(const CPModel<double>& model, double epsilon = 0.0,
                                      std::vector<std::string>* dropped = nullptr);

/// Posts by cluster users in cluster threads during cluster slots.
struct ClusterActivity {
  std::vector<std::size_t> posts;  ///< record indices, ascending
  Date first{};
  Date last{};
  long duration_days = 0;
  std::size_t active_days = 0;
  /// active_days / (duration_days + 1) * 100: the share of calendar days in
  /// the inclusive span that saw a post. A single-day cluster scores 100.
  double active_percent = 0.0;
};

/// Throws Error("inconsistent_cluster") when the cluster selects no posts.
ClusterActivity cluster_activity(const Cluster& c, const PostTable& table, const TimeIndex& time);

/// Per cluster slot (in `c.weeks` order), the calendar day with the most
/// cluster posts, earliest on ties; nullopt for a slot without posts.
std::vector<std::optional<Date>> slot_peaks(const Cluster& c, const ClusterActivity& activity,
                                            const PostTable& table, const TimeIndex& time);

struct TopEntities {
  std::vector<Member> users;
  std::vector<Member> threads;
  std::vector<Member> weeks;
  /// One date per entry of `weeks`: its busiest day, or the slot's first day
  /// when the cluster has no posts in it.
  std::vector<Date> dates;
};

TopEntities top_entities(const Cluster& c, const PostTable& table, const TimeIndex& time, int k = 3);

/// A cluster resolved against its dataset: names, titles and dates instead
/// of indices. This is the persisted and served form.
struct ClusterCard {
  struct Entity {
    int index = 0;
    std::string name;   ///< username or thread id
    std::string title;  ///< thread title (threads only)
    double strength = 0.0;
  };
  struct Slot {
    int slot = 0;
    Date start{};
    double strength = 0.0;
    Date peak{};  ///< busiest day, or `start` when the slot has no cluster posts
  };
  int cluster_id = 0;
  int component = 0;
  double energy = 0.0;
  std::vector<Entity> users;
  std::vector<Entity> threads;
  std::vector<Slot> weeks;
  std::size_t posts = 0;
  Date first{};
  Date last{};
  long duration_days = 0;
  std::size_t active_days = 0;
  double active_percent = 0.0;
};

ClusterCard make_card(const Cluster& c, const ClusterActivity& activity, const PostTable& table, const TimeIndex& time);

nlohmann::ordered_json to_json(const ClusterCard& card);
ClusterCard card_from_json(const nlohmann::json& j);

}  // namespace forumcp
