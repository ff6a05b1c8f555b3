#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forumcp/investigation.hpp"
#include "forumcp/store.hpp"

namespace forumcp {

enum class ReportView { storyline, tableview, heatmap, scree };
enum class ReportFormat { json, csv, html };

ReportView parse_report_view(std::string_view name);
const char* report_view_name(ReportView v);
ReportFormat parse_report_format(std::string_view name);
const char* report_format_extension(ReportFormat f);

/// Knob overrides; unset knobs take the run's config values.
struct ViewKnobs {
  std::optional<int> k;
  std::optional<int> r_t;
  std::optional<double> th_dom;
};

/// Views of a finished run, rebuilt from its stored artifacts only.
class RunViews {
 public:
  RunViews(const Store& store, std::string run_id);

  const RunConfig& config() const { return config_; }
  const std::vector<ClusterCard>& cards() const { return cards_; }

  const ClusterCard& card(int cluster_id) const;
  StoryLine storyline(int cluster_id, const ViewKnobs& knobs = {}) const;
  std::vector<StoryLine> storylines(const ViewKnobs& knobs = {}) const;
  std::vector<TableViewRow> tableview(const ViewKnobs& knobs = {}) const;
  nlohmann::json heatmap() const;
  nlohmann::json scree() const;

  /// One view in one format, as file content.
  std::string render(ReportView view, ReportFormat format, const ViewKnobs& knobs = {}) const;

 private:
  StorylineData story_data(int cluster_id) const;

  const Store& store_;
  std::string run_id_;
  RunConfig config_;
  std::string forum_;
  std::vector<ClusterCard> cards_;
};

/// Writes `<view>.<ext>` under `out_dir` and returns its path.
std::string write_report(const Store& store, const std::string& run_id, ReportView view, ReportFormat format,
                         const std::string& out_dir, const ViewKnobs& knobs = {});

}  // namespace forumcp
