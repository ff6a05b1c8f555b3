#pragma once

#include <array>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "forumcp/clusters.hpp"
#include "forumcp/ingest.hpp"

namespace forumcp {

// Content profiling

struct Keyword {
  std::string term;
  double score = 0.0;
};

struct KeywordSet {
  int cluster_id = 0;
  std::vector<Keyword> keywords;  ///< score descending, ties alphabetical
  std::string warning;             ///< set when nothing survived filtering
};

/// Term statistics of every thread's first post in a forum: the document
/// universe for keyword IDF.
class KeywordCorpus {
 public:
  explicit KeywordCorpus(const PostTable& table);

  int documents() const { return static_cast<int>(terms_.size()); }
  /// Number of threads whose first post contains `term`.
  int document_frequency(const std::string& term) const;
  /// Term counts of one thread's first post.
  const std::unordered_map<std::string, int>& terms(int thread) const { return terms_.at(static_cast<std::size_t>(thread)); }

 private:
  std::vector<std::unordered_map<std::string, int>> terms_;
  std::unordered_map<std::string, int> df_;
};

/// Top `n` terms of the cluster document (the concatenated first posts of
/// the cluster threads) by tf * ln(D / df). Terms scoring zero are left out.
KeywordSet cluster_keywords(const Cluster& c, const KeywordCorpus& corpus, int n = 50);

struct ClassDefinition {
  std::string label;
  std::vector<std::string> bag;  ///< lowercase, sorted, unique
};

/// Lowercases, sorts and deduplicates the bags and checks that bags are
/// nonempty and labels unique and not reserved (G, Mix).
std::vector<ClassDefinition> normalize_classes(std::vector<ClassDefinition> classes);

/// Accepts `[{"label": ..., "bag": [...]}, ...]` or `{"classes": [...]}`.
std::vector<ClassDefinition> classes_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const std::vector<ClassDefinition>& classes);

/// The editable A/T/P bags shipped in the data directory.
std::vector<ClassDefinition> default_classes();

inline constexpr std::string_view kGeneralLabel = "G";
inline constexpr std::string_view kMixLabel = "Mix";

struct ClusterLabel {
  int cluster_id = 0;
  std::string label;
  /// Jaccard similarity per class, in class order.
  std::vector<std::pair<std::string, double>> scores;
  bool is_mix = false;
  /// Classes whose score lies within the mix range of the best one (only
  /// set for Mix labels), in class order.
  std::vector<std::string> tied;
};

double jaccard(const std::vector<std::string>& a_sorted, const std::vector<std::string>& b_sorted);

/// Jaccard similarity of the keyword terms against every class bag. The best
/// class wins (earlier class on exact ties); when the best score is below
/// `g_floor` the label is G; otherwise, when the runner-up is within
/// `mix_range` of the best, the label is Mix.
ClusterLabel label_cluster(const KeywordSet& kw, const std::vector<ClassDefinition>& classes, double mix_range = 0.02,
                           double g_floor = 0.05);

nlohmann::ordered_json to_json(const KeywordSet& kw);
KeywordSet keywords_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ClusterLabel& label);

// Behavior profiling

inline constexpr std::size_t kMetricCount = 10;

/// Column names m1..m10 of the heat map.
extern const std::array<std::string_view, kMetricCount> kMetricNames;

struct BehaviorProfile {
  int cluster_id = 0;
  std::array<double, kMetricCount> metrics{};
  std::array<double, kMetricCount> normalized{};
};

/// The ten metrics over the cluster's post set. Averages "per user" run over
/// users with a post in the set, "per thread" over threads with a post in it.
/// A thread counts as initiated by a user when its first post is in the set
/// and written by that user.
BehaviorProfile behavior_profile(const Cluster& c, const ClusterActivity& activity, const PostTable& table);

/// Min-max scales every metric across the profiles into [0,1]; a constant
/// metric maps to 0. Fills `normalized` in place.
void normalize_profiles(std::vector<BehaviorProfile>& profiles);

struct AnomalyReport {
  std::vector<int> anomalous;  ///< row positions labeled noise, ascending
  /// Fewer rows than min_pts: DBSCAN cannot label anything.
  bool unlabelable = false;
};

/// DBSCAN noise points under Euclidean distance (neighborhoods include the
/// point itself, distance <= eps).
AnomalyReport detect_anomalies(const std::vector<std::vector<double>>& rows, double eps = 0.5, int min_pts = 3);

struct ScreePoint {
  int cluster_id = 0;
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

struct ScreeSeries {
  std::string x;
  std::string y;
  std::vector<ScreePoint> points;
};

/// Named scree axes: "users", "threads", "posts", "duration_days",
/// "active_days", "active_percent" and the metric names m1..m10.
double scree_value(const ClusterCard& card, const BehaviorProfile& profile, std::string_view axis);

/// Users vs threads and duration vs active percent, then every requested
/// (x, y) pair. `profiles` and `labels` are parallel to `cards`.
std::vector<ScreeSeries> scree_data(const std::vector<ClusterCard>& cards, const std::vector<BehaviorProfile>& profiles,
                                    const std::vector<ClusterLabel>& labels,
                                    const std::vector<std::pair<std::string, std::string>>& extra = {});

nlohmann::ordered_json to_json(const std::vector<ScreeSeries>& series);

}  // namespace forumcp
