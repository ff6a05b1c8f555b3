#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forumcp/autoten.hpp"
#include "forumcp/clusters.hpp"
#include "forumcp/ingest.hpp"
#include "forumcp/investigation.hpp"
#include "forumcp/profiling.hpp"

namespace forumcp {

/// Knobs of one run. Defaults: N=50
/// keywords, Th_dom=70%, R_t=5, k=3, weekly slots, lambda=1.
struct RunConfig {
  Granularity granularity = Granularity::week;
  int rank = 0;  ///< 0 selects the rank automatically
  double lambda = 1.0;
  int keywords_n = 50;
  double th_dom = 0.70;
  int r_t = 5;
  int top_k = 3;
  std::uint64_t seed = 0;
  std::vector<ClassDefinition> classes;  ///< empty: default_classes()

  int r_max = 0;  ///< 0: min(50, smallest dimension)
  double consistency_threshold = 50.0;
  int patience = 5;
  int max_sweeps = 200;
  double tolerance = 1e-6;
  double epsilon = 0.0;
  double mix_range = 0.02;
  double g_floor = 0.05;
  double dbscan_eps = 0.5;
  int dbscan_min_pts = 3;
  int lda_sweeps = 500;

  void validate() const;
  SolverOptions solver_options() const;
};

/// Every field, in a fixed order, classes included.
nlohmann::ordered_json to_json(const RunConfig& c);
/// Missing fields keep their defaults; unknown fields are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

/// A pipeline failure with the stage it happened in.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), cause.what()), stage_(std::move(stage)) {}
  StageError(std::string stage, const std::string& code, const std::string& message)
      : Error(code, message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct RunResult {
  std::string forum;
  TimeIndex time;
  std::array<Index, 3> shape{};
  std::size_t nnz = 0;
  double mass = 0.0;
  SolverOptions solver;
  std::optional<RankSelection> selection;
  CPModel<double> model;
  std::vector<std::string> warnings;

  std::vector<Cluster> clusters;
  std::vector<ClusterCard> cards;
  std::vector<KeywordSet> keywords;
  std::vector<ClassDefinition> classes;
  std::vector<ClusterLabel> labels;
  std::vector<BehaviorProfile> profiles;
  AnomalyReport anomalies;
  std::vector<StorylineData> story_data;
  std::vector<StoryLine> storylines;
  std::vector<TableViewRow> tableview;
  std::vector<ScreeSeries> scree;
};

/// Called when a stage starts: ingest, decompose, extract, profile, investigate.
using StageCallback = std::function<void(std::string_view stage)>;

/// Step 1 (discretize, build the tensor, select the rank, fit, extract
/// clusters), step 2 (keywords, labels, behavior metrics, anomalies) and
/// step 3 (storylines, table view). Failures are rethrown as StageError.
RunResult run_pipeline(const PostTable& table, const RunConfig& config, const std::string& forum,
                       const StageCallback& on_stage = {});

std::vector<ClusterLabel> label_clusters(const std::vector<KeywordSet>& keywords, const std::vector<ClassDefinition>& classes,
                                         double mix_range, double g_floor);

/// Rows of the profile matrix, raw or normalized.
std::vector<std::vector<double>> profile_rows(const std::vector<BehaviorProfile>& profiles, bool normalized);

/// The name a dataset's table view rows start with: the shared forum_id, or
/// `fallback` when records come from several forums.
std::string forum_label(const PostTable& table, const std::string& fallback);

}  // namespace forumcp
