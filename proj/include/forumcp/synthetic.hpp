#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forumcp/ingest.hpp"

namespace forumcp {

/// A planted event: a group of users posting in a group of threads during a
/// window of weeks.
struct PlantedBlock {
  int users = 0;
  int threads = 0;
  int week_start = 0;
  int weeks = 1;
  /// Mean posts per (user, thread, week) cell.
  double intensity = 1.0;
  /// Title and post words; empty picks a built-in theme.
  std::vector<std::string> vocabulary;
  /// Explicit thread indices in [0, SyntheticSpec::threads); empty lets the
  /// generator pick.
  std::vector<int> thread_ids;
};

struct SyntheticSpec {
  std::string forum_id = "synth";
  int users = 150;
  int threads = 200;
  int weeks = 20;
  Date origin = std::chrono::sys_days{std::chrono::year{2016} / 1 / 4};
  std::vector<PlantedBlock> blocks;
  /// Expected background posts per user per week.
  double noise_rate = 0.05;
  /// When set, the background post count is chosen so the corpus has exactly
  /// this many posts (noise_rate is then ignored).
  std::optional<long> total_posts;
  std::vector<std::string> background_vocabulary;
  int min_post_words = 5;
  int max_post_words = 30;
  std::uint64_t seed = 0;

  /// Throws ValidationError on overlapping thread sets, windows outside the
  /// horizon, too few entities or intensities not above the noise rate.
  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SyntheticSpec& spec);

/// Ground truth of one planted block, by entity name and week slot.
struct PlantedTruth {
  std::vector<std::string> users;
  std::vector<std::string> threads;
  std::vector<int> weeks;
};

struct SyntheticForum {
  std::vector<PostRecord> posts;
  std::vector<PlantedTruth> truth;
};

/// Deterministic under spec.seed. Block cells draw Poisson(intensity) posts
/// on uniformly random days of their week; background posts go to random
/// users in threads outside every block. The first background posts visit
/// every user and background thread once; the entity counts match the
/// spec whenever there are enough of them. One background post is dated on
/// the origin, which anchors week 0.
SyntheticForum generate_synthetic(const SyntheticSpec& spec);

}  // namespace forumcp
