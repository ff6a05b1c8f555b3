#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forumcp/ingest.hpp"
#include "forumcp/pipeline.hpp"

namespace forumcp {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Writes through a sibling temporary file renamed into place; readers see
/// either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct DatasetInfo {
  std::string name;
  std::string hash;  ///< FNV-1a of the canonical JSONL
  std::string forum;
  std::size_t posts = 0;
  int users = 0;
  int threads = 0;
  Date min_date{};
  Date max_date{};
};

nlohmann::ordered_json to_json(const DatasetInfo& d);
DatasetInfo dataset_info_from_json(const nlohmann::json& j);

enum class RunState { queued, fitting, profiling, done, failed };

const char* run_state_name(RunState s);
RunState parse_run_state(std::string_view name);

struct RunStatus {
  std::string run_id;
  std::string dataset;
  RunState state = RunState::queued;
  std::string stage;  ///< last stage entered
  std::string error_code;
  std::string error_message;
  /// (state, UTC timestamp) per transition.
  std::vector<std::pair<std::string, std::string>> history;
};

nlohmann::ordered_json to_json(const RunStatus& s);
RunStatus run_status_from_json(const nlohmann::json& j);

/// File-per-run store:
///
///   datasets/<name>/posts.jsonl, dataset.json
///   runs/<id>/manifest.json, config.json, factors.bin, factors.json,
///            clusters.json, keywords.json, classes.json, labels.json,
///            profiles.csv, heatmap.json, scree.json, tableview.json,
///            tableview.csv, storylines/<cid>.data.json, <cid>.json,
///            <cid>.html, status.json
///
/// Only status.json carries timestamps; every other file is a function of
/// the dataset bytes and the run config.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Saves the table as canonical JSONL (records by post_id) under `name`. Re-ingesting identical
  /// content is a no-op; different content under an existing name is a
  /// Conflict.
  DatasetInfo ingest(const std::string& name, const PostTable& table);
  DatasetInfo dataset(const std::string& name) const;
  std::vector<std::string> datasets() const;
  PostTable load_dataset(const std::string& name) const;

  /// Deterministic: hash of the dataset content and the canonical config.
  std::string run_id(const std::string& dataset, const RunConfig& config) const;

  /// Registers a run in the queued state, or returns the id of an existing
  /// run with the same dataset and config that has not failed.
  std::string create_run(const std::string& dataset, const RunConfig& config);
  /// Runs the pipeline for a queued (or failed) run and persists every
  /// artifact. Throws the StageError after recording it in status.json.
  void execute_run(const std::string& run_id);
  /// create_run + execute_run; a finished run is returned as is.
  std::string run(const std::string& dataset, const RunConfig& config);

  bool has_run(const std::string& run_id) const;
  std::vector<std::string> runs() const;
  RunStatus status(const std::string& run_id) const;
  RunConfig config(const std::string& run_id) const;
  std::filesystem::path run_dir(const std::string& run_id) const;

  /// Parsed JSON artifact of a run; NotFound when absent.
  nlohmann::json read_json(const std::string& run_id, const std::string& file) const;
  /// Raw bytes of a run artifact; NotFound when absent.
  std::string read_text(const std::string& run_id, const std::string& file) const;

  /// Recomputes labels, heat map, scree and table view under new classes.
  /// The decomposition files are left untouched. Conflict unless done.
  std::vector<ClusterLabel> relabel(const std::string& run_id, const std::vector<ClassDefinition>& classes);

 private:
  std::filesystem::path dataset_dir(const std::string& name) const;
  void write_status(const RunStatus& s) const;
  void advance(RunStatus& s, RunState next, const std::string& stage) const;
  void persist(const std::string& run_id, const std::string& dataset, const RunConfig& config, const RunResult& run) const;

  std::filesystem::path root_;
};

/// Heat map rows: normalized and raw metrics, label and anomaly flag per
/// cluster.
nlohmann::ordered_json heatmap_json(const std::vector<BehaviorProfile>& profiles, const std::vector<ClusterLabel>& labels,
                                    const AnomalyReport& anomalies);
std::vector<BehaviorProfile> profiles_from_heatmap(const nlohmann::json& j);
std::string profiles_csv(const std::vector<BehaviorProfile>& profiles, const AnomalyReport& anomalies);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace forumcp
