#include "forumcp/report.hpp"

#include <filesystem>
#include <sstream>

#include "forumcp/error.hpp"

namespace forumcp {

ReportView parse_report_view(std::string_view name) {
  if (name == "storyline") return ReportView::storyline;
  if (name == "tableview") return ReportView::tableview;
  if (name == "heatmap") return ReportView::heatmap;
  if (name == "scree") return ReportView::scree;
  throw ValidationError("unknown view '" + std::string(name) + "' (expected storyline, tableview, heatmap or scree)");
}

const char* report_view_name(ReportView v) {
  switch (v) {
    case ReportView::storyline: return "storyline";
    case ReportView::tableview: return "tableview";
    case ReportView::heatmap: return "heatmap";
    case ReportView::scree: return "scree";
  }
  return "storyline";
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  if (name == "html") return ReportFormat::html;
  throw ValidationError("unknown format '" + std::string(name) + "' (expected json, csv or html)");
}

const char* report_format_extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::json: return "json";
    case ReportFormat::csv: return "csv";
    case ReportFormat::html: return "html";
  }
  return "json";
}

RunViews::RunViews(const Store& store, std::string run_id) : store_(store), run_id_(std::move(run_id)) {
  const RunStatus s = store_.status(run_id_);
  if (s.state != RunState::done) {
    throw Conflict("run '" + run_id_ + "' is " + std::string(run_state_name(s.state)) + "; views need a done run");
  }
  config_ = store_.config(run_id_);
  forum_ = store_.read_json(run_id_, "manifest.json").at("dataset").at("forum").get<std::string>();
  for (const auto& c : store_.read_json(run_id_, "clusters.json")) cards_.push_back(card_from_json(c));
}

const ClusterCard& RunViews::card(int cluster_id) const {
  for (const auto& c : cards_) {
    if (c.cluster_id == cluster_id) return c;
  }
  throw NotFound("run '" + run_id_ + "' has no cluster " + std::to_string(cluster_id));
}

StorylineData RunViews::story_data(int cluster_id) const {
  card(cluster_id);
  return storyline_data_from_json(store_.read_json(run_id_, "storylines/" + std::to_string(cluster_id) + ".data.json"));
}

StoryLine RunViews::storyline(int cluster_id, const ViewKnobs& knobs) const {
  const int r_t = knobs.r_t.value_or(config_.r_t);
  const double th_dom = knobs.th_dom.value_or(config_.th_dom);
  if (r_t < 1) throw ValidationError("rt must be >= 1");
  if (!(th_dom > 0.0 && th_dom <= 1.0)) throw ValidationError("th_dom must be in (0, 1]");
  return make_storyline(story_data(cluster_id), th_dom, r_t);
}

std::vector<StoryLine> RunViews::storylines(const ViewKnobs& knobs) const {
  std::vector<StoryLine> out;
  for (const auto& c : cards_) out.push_back(storyline(c.cluster_id, knobs));
  return out;
}

std::vector<TableViewRow> RunViews::tableview(const ViewKnobs& knobs) const {
  const int k = knobs.k.value_or(config_.top_k);
  if (k < 1) throw ValidationError("k must be >= 1");
  std::vector<ClusterLabel> labels;
  for (const auto& l : store_.read_json(run_id_, "labels.json")) {
    ClusterLabel label;
    label.cluster_id = l.at("cluster_id").get<int>();
    label.label = l.at("label").get<std::string>();
    labels.push_back(std::move(label));
  }
  ViewKnobs story_knobs;
  story_knobs.r_t = config_.r_t;
  story_knobs.th_dom = config_.th_dom;
  return build_tableview(forum_, cards_, labels, storylines(story_knobs), k);
}

nlohmann::json RunViews::heatmap() const { return store_.read_json(run_id_, "heatmap.json"); }

nlohmann::json RunViews::scree() const { return store_.read_json(run_id_, "scree.json"); }

namespace {

std::string page(const std::string& title, const std::string& body) {
  return "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" + html_escape(title) +
         "</title>\n<style>\nbody{font-family:sans-serif}table{border-collapse:collapse}"
         "td,th{border:1px solid #ccc;padding:2px 6px}tr.anomalous{background:#fdd}\n</style>\n</head>\n<body>\n" +
         body + "</body>\n</html>\n";
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t n = 0; n < parts.size(); ++n) out += (n ? sep : "") + parts[n];
  return out;
}

std::string storyline_csv(const std::vector<StoryLine>& stories) {
  std::string out = "cluster_id,date,thread_id,title,topic,score\n";
  for (const auto& s : stories) {
    for (const auto& e : s.entries) {
      out += std::to_string(s.cluster_id) + ',' + format_date(e.date) + ',' + csv_field(e.thread_id) + ',' +
             csv_field(e.title) + ',' + std::to_string(e.topic) + ',' + format_number(e.score) + '\n';
    }
  }
  return out;
}

std::string tableview_html(const std::vector<TableViewRow>& rows) {
  std::ostringstream out;
  out << "<table class=\"tableview\">\n<tr><th>forum_cid</th><th>n_users</th><th>type</th><th>top_threads</th>"
         "<th>top_users</th><th>top_dates</th><th>dominant_topics</th></tr>\n";
  for (const auto& r : rows) {
    std::vector<std::string> dates;
    for (Date d : r.top_dates) dates.push_back(format_date(d));
    out << "<tr><td>" << html_escape(r.forum_cid) << "</td><td>" << r.n_users << "</td><td>" << html_escape(r.type)
        << "</td><td>" << html_escape(join(r.top_threads, "; ")) << "</td><td>" << html_escape(join(r.top_users, "; "))
        << "</td><td>" << join(dates, "; ") << "</td><td>" << html_escape(join(r.dominant_topics, "; "))
        << "</td></tr>\n";
  }
  out << "</table>\n";
  return out.str();
}

std::string heatmap_csv(const nlohmann::json& heat) {
  std::string out = "cluster_id,label,anomalous";
  for (const auto& m : heat.at("metrics")) out += "," + m.get<std::string>();
  out += '\n';
  for (const auto& row : heat.at("rows")) {
    out += std::to_string(row.at("cluster_id").get<int>()) + ',' + csv_field(row.at("label").get<std::string>()) +
           (row.at("anomalous").get<bool>() ? ",1" : ",0");
    for (const auto& v : row.at("values")) out += "," + format_number(v.get<double>());
    out += '\n';
  }
  return out;
}

std::string heatmap_html(const nlohmann::json& heat) {
  std::ostringstream out;
  out << "<table class=\"heatmap\">\n<tr><th>cluster</th><th>label</th>";
  for (const auto& m : heat.at("metrics")) out << "<th>" << html_escape(m.get<std::string>()) << "</th>";
  out << "</tr>\n";
  for (const auto& row : heat.at("rows")) {
    out << "<tr" << (row.at("anomalous").get<bool>() ? " class=\"anomalous\"" : "") << "><td>"
        << row.at("cluster_id").get<int>() << "</td><td>" << html_escape(row.at("label").get<std::string>()) << "</td>";
    for (const auto& v : row.at("values")) {
      const double x = v.get<double>();
      const int shade = 255 - static_cast<int>(x * 155.0 + 0.5);
      out << "<td style=\"background:rgb(" << shade << ',' << shade << ",255)\">" << format_number(x) << "</td>";
    }
    out << "</tr>\n";
  }
  out << "</table>\n";
  return out.str();
}

std::string scree_csv(const nlohmann::json& scree) {
  std::string out = "x_axis,y_axis,cluster_id,label,x,y\n";
  for (const auto& s : scree) {
    for (const auto& p : s.at("points")) {
      out += csv_field(s.at("x").get<std::string>()) + ',' + csv_field(s.at("y").get<std::string>()) + ',' +
             std::to_string(p.at("cluster_id").get<int>()) + ',' + csv_field(p.at("label").get<std::string>()) + ',' +
             format_number(p.at("x").get<double>()) + ',' + format_number(p.at("y").get<double>()) + '\n';
    }
  }
  return out;
}

std::string scree_html(const nlohmann::json& scree) {
  std::ostringstream out;
  for (const auto& s : scree) {
    const std::string x = s.at("x").get<std::string>(), y = s.at("y").get<std::string>();
    out << "<h2>" << html_escape(y) << " vs " << html_escape(x) << "</h2>\n<table class=\"scree\">\n<tr><th>cluster</th>"
        << "<th>label</th><th>" << html_escape(x) << "</th><th>" << html_escape(y) << "</th></tr>\n";
    for (const auto& p : s.at("points")) {
      out << "<tr><td>" << p.at("cluster_id").get<int>() << "</td><td>" << html_escape(p.at("label").get<std::string>())
          << "</td><td>" << format_number(p.at("x").get<double>()) << "</td><td>"
          << format_number(p.at("y").get<double>()) << "</td></tr>\n";
    }
    out << "</table>\n";
  }
  return out.str();
}

}  // namespace

std::string RunViews::render(ReportView view, ReportFormat format, const ViewKnobs& knobs) const {
  switch (view) {
    case ReportView::storyline: {
      const auto stories = storylines(knobs);
      if (format == ReportFormat::csv) return storyline_csv(stories);
      if (format == ReportFormat::html) {
        std::string body;
        for (const auto& s : stories) body += storyline_html(s);
        return page("StoryLine " + run_id_, body);
      }
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& s : stories) j.push_back(to_json(s));
      return j.dump(2) + "\n";
    }
    case ReportView::tableview: {
      const auto rows = tableview(knobs);
      if (format == ReportFormat::csv) return tableview_csv(rows);
      if (format == ReportFormat::html) return page("TableView " + run_id_, tableview_html(rows));
      return to_json(rows).dump(2) + "\n";
    }
    case ReportView::heatmap: {
      const auto heat = heatmap();
      if (format == ReportFormat::csv) return heatmap_csv(heat);
      if (format == ReportFormat::html) return page("Heat map " + run_id_, heatmap_html(heat));
      return store_.read_text(run_id_, "heatmap.json");
    }
    case ReportView::scree: {
      const auto scree = this->scree();
      if (format == ReportFormat::csv) return scree_csv(scree);
      if (format == ReportFormat::html) return page("Scree " + run_id_, scree_html(scree));
      return store_.read_text(run_id_, "scree.json");
    }
  }
  throw ValidationError("unknown view");
}

std::string write_report(const Store& store, const std::string& run_id, ReportView view, ReportFormat format,
                         const std::string& out_dir, const ViewKnobs& knobs) {
  const RunViews views(store, run_id);
  const std::filesystem::path path =
      std::filesystem::path(out_dir) / (std::string(report_view_name(view)) + "." + report_format_extension(format));
  write_file_atomic(path, views.render(view, format, knobs));
  return path.string();
}

}  // namespace forumcp
