#include "forumcp/store.hpp"

#include <atomic>
#include <charconv>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include "forumcp/error.hpp"
#include "forumcp/factor_io.hpp"

namespace forumcp {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int n = 15; n >= 0; --n, v >>= 4) s[static_cast<std::size_t>(n)] = digits[v & 0xf];
  return s;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp-" << std::this_thread::get_id() << '-' << counter++;
  const fs::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("io_error", "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_dataset_name(const std::string& name) {
  static const std::regex pattern("[A-Za-z0-9][A-Za-z0-9._-]{0,127}");
  if (!std::regex_match(name, pattern)) {
    throw ValidationError("dataset name '" + name + "' must match [A-Za-z0-9][A-Za-z0-9._-]*");
  }
}

bool valid_run_id(const std::string& id) {
  static const std::regex pattern("[0-9a-f]{16}");
  return std::regex_match(id, pattern);
}

Date parse_date_field(const nlohmann::json& j, const char* key) {
  Date d{};
  if (!parse_iso_date(j.at(key).get<std::string>(), d)) throw ValidationError(std::string("bad date in ") + key);
  return d;
}

const char* state_for_stage(std::string_view stage) {
  return (stage == "profile" || stage == "investigate") ? "profiling" : "fitting";
}

}  // namespace

nlohmann::ordered_json to_json(const DatasetInfo& d) {
  return {{"name", d.name},
          {"hash", d.hash},
          {"forum", d.forum},
          {"posts", d.posts},
          {"users", d.users},
          {"threads", d.threads},
          {"min_date", format_date(d.min_date)},
          {"max_date", format_date(d.max_date)}};
}

DatasetInfo dataset_info_from_json(const nlohmann::json& j) {
  DatasetInfo d;
  d.name = j.at("name").get<std::string>();
  d.hash = j.at("hash").get<std::string>();
  d.forum = j.at("forum").get<std::string>();
  d.posts = j.at("posts").get<std::size_t>();
  d.users = j.at("users").get<int>();
  d.threads = j.at("threads").get<int>();
  d.min_date = parse_date_field(j, "min_date");
  d.max_date = parse_date_field(j, "max_date");
  return d;
}

const char* run_state_name(RunState s) {
  switch (s) {
    case RunState::queued: return "queued";
    case RunState::fitting: return "fitting";
    case RunState::profiling: return "profiling";
    case RunState::done: return "done";
    case RunState::failed: return "failed";
  }
  return "failed";
}

RunState parse_run_state(std::string_view name) {
  for (RunState s : {RunState::queued, RunState::fitting, RunState::profiling, RunState::done, RunState::failed}) {
    if (name == run_state_name(s)) return s;
  }
  throw ValidationError("unknown run state '" + std::string(name) + "'");
}

nlohmann::ordered_json to_json(const RunStatus& s) {
  nlohmann::ordered_json j = {{"run_id", s.run_id}, {"dataset", s.dataset}, {"status", run_state_name(s.state)}};
  if (!s.stage.empty()) j["stage"] = s.stage;
  if (s.state == RunState::failed) {
    j["error"] = {{"code", s.error_code}, {"message", s.error_message}, {"stage", s.stage}};
  }
  nlohmann::ordered_json h = nlohmann::ordered_json::array();
  for (const auto& [state, at] : s.history) h.push_back({{"status", state}, {"at", at}});
  j["history"] = std::move(h);
  return j;
}

RunStatus run_status_from_json(const nlohmann::json& j) {
  RunStatus s;
  s.run_id = j.at("run_id").get<std::string>();
  s.dataset = j.at("dataset").get<std::string>();
  s.state = parse_run_state(j.at("status").get<std::string>());
  s.stage = j.value("stage", "");
  if (j.contains("error")) {
    s.error_code = j["error"].value("code", "");
    s.error_message = j["error"].value("message", "");
  }
  for (const auto& h : j.at("history")) s.history.emplace_back(h.at("status").get<std::string>(), h.at("at").get<std::string>());
  return s;
}

nlohmann::ordered_json heatmap_json(const std::vector<BehaviorProfile>& profiles, const std::vector<ClusterLabel>& labels,
                                    const AnomalyReport& anomalies) {
  nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
  for (auto name : kMetricNames) metrics.push_back(std::string(name));
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    const bool anomalous =
        std::find(anomalies.anomalous.begin(), anomalies.anomalous.end(), static_cast<int>(n)) != anomalies.anomalous.end();
    rows.push_back({{"cluster_id", profiles[n].cluster_id},
                    {"label", n < labels.size() ? labels[n].label : std::string()},
                    {"anomalous", anomalous},
                    {"values", profiles[n].normalized},
                    {"raw", profiles[n].metrics}});
  }
  return {{"metrics", std::move(metrics)}, {"unlabelable", anomalies.unlabelable}, {"rows", std::move(rows)}};
}

std::vector<BehaviorProfile> profiles_from_heatmap(const nlohmann::json& j) {
  std::vector<BehaviorProfile> out;
  for (const auto& row : j.at("rows")) {
    BehaviorProfile p;
    p.cluster_id = row.at("cluster_id").get<int>();
    p.metrics = row.at("raw").get<std::array<double, kMetricCount>>();
    p.normalized = row.at("values").get<std::array<double, kMetricCount>>();
    out.push_back(p);
  }
  return out;
}

std::string profiles_csv(const std::vector<BehaviorProfile>& profiles, const AnomalyReport& anomalies) {
  std::string out = "cluster_id";
  for (auto name : kMetricNames) out += "," + std::string(name);
  out += ",anomalous\n";
  for (std::size_t n = 0; n < profiles.size(); ++n) {
    out += std::to_string(profiles[n].cluster_id);
    for (double v : profiles[n].metrics) out += "," + format_number(v);
    const bool anomalous =
        std::find(anomalies.anomalous.begin(), anomalies.anomalous.end(), static_cast<int>(n)) != anomalies.anomalous.end();
    out += anomalous ? ",1\n" : ",0\n";
  }
  return out;
}

Store::Store(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "datasets");
  fs::create_directories(root_ / "runs");
}

fs::path Store::dataset_dir(const std::string& name) const {
  check_dataset_name(name);
  return root_ / "datasets" / name;
}

DatasetInfo Store::ingest(const std::string& name, const PostTable& table) {
  const fs::path dir = dataset_dir(name);
  std::vector<PostRecord> records = table.records;
  std::sort(records.begin(), records.end(), [](const PostRecord& a, const PostRecord& b) { return a.post_id < b.post_id; });
  std::ostringstream body;
  write_posts(body, records, InputFormat::jsonl);
  const std::string content = body.str();

  DatasetInfo info;
  info.name = name;
  info.hash = hex64(fnv1a(content));
  info.forum = forum_label(table, name);
  info.posts = table.records.size();
  info.users = table.user_count();
  info.threads = table.thread_count();
  info.min_date = table.min_date;
  info.max_date = table.max_date;

  if (fs::exists(dir / "dataset.json")) {
    const DatasetInfo existing = dataset(name);
    if (existing.hash != info.hash) {
      throw Conflict("dataset '" + name + "' already exists with different content (hash " + existing.hash + ")");
    }
    return existing;
  }
  write_file_atomic(dir / "posts.jsonl", content);
  write_file_atomic(dir / "dataset.json", dump(to_json(info)));
  return info;
}

DatasetInfo Store::dataset(const std::string& name) const {
  const fs::path file = dataset_dir(name) / "dataset.json";
  if (!fs::exists(file)) throw NotFound("unknown dataset '" + name + "'");
  return dataset_info_from_json(nlohmann::json::parse(read_file(file)));
}

std::vector<std::string> Store::datasets() const {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root_ / "datasets")) {
    if (fs::exists(e.path() / "dataset.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

PostTable Store::load_dataset(const std::string& name) const {
  const DatasetInfo info = dataset(name);
  std::ifstream in(dataset_dir(name) / "posts.jsonl", std::ios::binary);
  if (!in) throw NotFound("dataset '" + name + "' has no posts file");
  return parse_posts(in, InputFormat::jsonl, std::max(info.max_date, today()));
}

std::string Store::run_id(const std::string& dataset_name, const RunConfig& config) const {
  const DatasetInfo info = dataset(dataset_name);
  std::uint64_t h = fnv1a(info.hash);
  h = fnv1a("\n", h);
  h = fnv1a(to_json(config).dump(), h);
  return hex64(h);
}

fs::path Store::run_dir(const std::string& id) const {
  if (!valid_run_id(id)) throw NotFound("unknown run '" + id + "'");
  return root_ / "runs" / id;
}

bool Store::has_run(const std::string& id) const {
  return valid_run_id(id) && fs::exists(root_ / "runs" / id / "status.json");
}

std::vector<std::string> Store::runs() const {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root_ / "runs")) {
    const std::string id = e.path().filename().string();
    if (has_run(id)) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunStatus Store::status(const std::string& id) const {
  const fs::path file = run_dir(id) / "status.json";
  if (!fs::exists(file)) throw NotFound("unknown run '" + id + "'");
  return run_status_from_json(nlohmann::json::parse(read_file(file)));
}

RunConfig Store::config(const std::string& id) const {
  return run_config_from_json(nlohmann::json::parse(read_file(run_dir(id) / "config.json")));
}

nlohmann::json Store::read_json(const std::string& id, const std::string& file) const {
  const fs::path path = run_dir(id) / file;
  if (!fs::exists(path)) throw NotFound("run '" + id + "' has no " + file);
  return nlohmann::json::parse(read_file(path));
}

std::string Store::read_text(const std::string& id, const std::string& file) const {
  const fs::path path = run_dir(id) / file;
  if (!fs::exists(path)) throw NotFound("run '" + id + "' has no " + file);
  return read_file(path);
}

void Store::write_status(const RunStatus& s) const {
  write_file_atomic(run_dir(s.run_id) / "status.json", dump(to_json(s)));
}

void Store::advance(RunStatus& s, RunState next, const std::string& stage) const {
  if (!stage.empty()) s.stage = stage;
  if (next != s.state || s.history.empty()) {
    s.state = next;
    s.history.emplace_back(run_state_name(next), utc_now());
  }
  write_status(s);
}

std::string Store::create_run(const std::string& dataset_name, const RunConfig& requested) {
  RunConfig config = requested;
  if (config.classes.empty()) config.classes = default_classes();
  config.classes = normalize_classes(config.classes);
  config.validate();
  const std::string id = run_id(dataset_name, config);
  if (has_run(id) && status(id).state != RunState::failed) return id;

  const fs::path dir = run_dir(id);
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", dump(to_json(config)));
  RunStatus s;
  s.run_id = id;
  s.dataset = dataset_name;
  advance(s, RunState::queued, "");
  return id;
}

void Store::execute_run(const std::string& id) {
  RunStatus s = status(id);
  if (s.state == RunState::done) return;
  if (s.state != RunState::queued) throw Conflict("run '" + id + "' is " + run_state_name(s.state));
  try {
    const RunConfig config = this->config(id);
    advance(s, RunState::fitting, "ingest");
    PostTable table;
    DatasetInfo info;
    try {
      info = dataset(s.dataset);
      table = load_dataset(s.dataset);
    } catch (const Error& e) {
      throw StageError("ingest", e);
    }
    const RunResult result = run_pipeline(table, config, info.forum, [&](std::string_view stage) {
      advance(s, parse_run_state(state_for_stage(stage)), std::string(stage));
    });
    persist(id, s.dataset, config, result);
    advance(s, RunState::done, "");
  } catch (const StageError& e) {
    s.error_code = e.code();
    s.error_message = e.what();
    advance(s, RunState::failed, e.stage());
    throw;
  } catch (const std::exception& e) {
    StageError wrapped(s.stage.empty() ? "ingest" : s.stage, "internal_error", e.what());
    s.error_code = wrapped.code();
    s.error_message = wrapped.what();
    advance(s, RunState::failed, wrapped.stage());
    throw wrapped;
  }
}

std::string Store::run(const std::string& dataset_name, const RunConfig& config) {
  const std::string id = create_run(dataset_name, config);
  if (status(id).state == RunState::queued) execute_run(id);
  return id;
}

void Store::persist(const std::string& id, const std::string& dataset_name, const RunConfig& config,
                    const RunResult& run) const {
  const fs::path dir = run_dir(id);
  const DatasetInfo info = dataset(dataset_name);

  std::ostringstream factors;
  write_factors(factors, run.model);
  write_file_atomic(dir / "factors.bin", factors.str());
  write_file_atomic(dir / "factors.json",
                    dump(factor_manifest(run.model, run.solver, run.selection ? &*run.selection : nullptr)));

  nlohmann::ordered_json cards = nlohmann::ordered_json::array();
  for (const auto& c : run.cards) cards.push_back(to_json(c));
  write_file_atomic(dir / "clusters.json", dump(cards));

  nlohmann::ordered_json keywords = nlohmann::ordered_json::array();
  for (const auto& k : run.keywords) keywords.push_back(to_json(k));
  write_file_atomic(dir / "keywords.json", dump(keywords));

  write_file_atomic(dir / "classes.json", dump(to_json(run.classes)));
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (const auto& l : run.labels) labels.push_back(to_json(l));
  write_file_atomic(dir / "labels.json", dump(labels));

  write_file_atomic(dir / "profiles.csv", profiles_csv(run.profiles, run.anomalies));
  write_file_atomic(dir / "heatmap.json", dump(heatmap_json(run.profiles, run.labels, run.anomalies)));
  write_file_atomic(dir / "scree.json", dump(to_json(run.scree)));

  for (std::size_t n = 0; n < run.story_data.size(); ++n) {
    const std::string cid = std::to_string(run.story_data[n].cluster_id);
    write_file_atomic(dir / "storylines" / (cid + ".data.json"), dump(to_json(run.story_data[n])));
    write_file_atomic(dir / "storylines" / (cid + ".json"), dump(to_json(run.storylines[n])));
    write_file_atomic(dir / "storylines" / (cid + ".html"), storyline_html(run.storylines[n]));
  }
  write_file_atomic(dir / "tableview.json", dump(to_json(run.tableview)));
  write_file_atomic(dir / "tableview.csv", tableview_csv(run.tableview));

  nlohmann::ordered_json tensor = {{"shape", run.shape},
                                   {"nnz", run.nnz},
                                   {"mass", run.mass},
                                   {"granularity", granularity_name(run.time.granularity)},
                                   {"origin", format_date(run.time.origin)},
                                   {"slots", run.time.slot_count}};
  nlohmann::ordered_json rank = {{"value", run.model.rank()}, {"mode", config.rank == 0 ? "auto" : "fixed"}};
  if (run.selection) {
    rank["als_rank"] = run.selection->als_rank;
    rank["apr_rank"] = run.selection->apr_rank;
    rank["fallback"] = run.selection->fallback;
  }
  nlohmann::ordered_json manifest = {{"run_id", id},
                                     {"dataset", {{"name", info.name}, {"hash", info.hash}, {"forum", info.forum}}},
                                     {"config", to_json(config)},
                                     {"tensor", std::move(tensor)},
                                     {"rank", std::move(rank)},
                                     {"clusters", run.cards.size()},
                                     {"anomalous", run.anomalies.anomalous},
                                     {"warnings", run.warnings}};
  write_file_atomic(dir / "manifest.json", dump(manifest));
}

std::vector<ClusterLabel> Store::relabel(const std::string& id, const std::vector<ClassDefinition>& classes) {
  const RunStatus s = status(id);
  if (s.state != RunState::done) {
    throw Conflict("run '" + id + "' is " + std::string(run_state_name(s.state)) + "; relabel needs a done run");
  }
  const std::vector<ClassDefinition> normalized = normalize_classes(classes);
  if (normalized.size() < 2) throw ValidationError("at least two classes are needed");
  const RunConfig cfg = config(id);
  const fs::path dir = run_dir(id);

  std::vector<KeywordSet> keywords;
  for (const auto& k : read_json(id, "keywords.json")) keywords.push_back(keywords_from_json(k));
  std::vector<ClusterCard> cards;
  for (const auto& c : read_json(id, "clusters.json")) cards.push_back(card_from_json(c));
  const nlohmann::json heat = read_json(id, "heatmap.json");
  const std::vector<BehaviorProfile> profiles = profiles_from_heatmap(heat);
  AnomalyReport anomalies;
  anomalies.unlabelable = heat.at("unlabelable").get<bool>();
  for (std::size_t n = 0; n < heat.at("rows").size(); ++n) {
    if (heat["rows"][n].at("anomalous").get<bool>()) anomalies.anomalous.push_back(static_cast<int>(n));
  }
  std::vector<StoryLine> stories;
  for (const auto& card : cards) {
    const auto data = storyline_data_from_json(read_json(id, "storylines/" + std::to_string(card.cluster_id) + ".data.json"));
    stories.push_back(make_storyline(data, cfg.th_dom, cfg.r_t));
  }

  const std::vector<ClusterLabel> labels = label_clusters(keywords, normalized, cfg.mix_range, cfg.g_floor);
  const std::string forum = read_json(id, "manifest.json").at("dataset").at("forum").get<std::string>();

  write_file_atomic(dir / "classes.json", dump(to_json(normalized)));
  nlohmann::ordered_json lj = nlohmann::ordered_json::array();
  for (const auto& l : labels) lj.push_back(to_json(l));
  write_file_atomic(dir / "labels.json", dump(lj));
  write_file_atomic(dir / "heatmap.json", dump(heatmap_json(profiles, labels, anomalies)));
  write_file_atomic(dir / "scree.json", dump(to_json(scree_data(cards, profiles, labels))));
  const auto rows = build_tableview(forum, cards, labels, stories, cfg.top_k);
  write_file_atomic(dir / "tableview.json", dump(to_json(rows)));
  write_file_atomic(dir / "tableview.csv", tableview_csv(rows));
  return labels;
}

}  // namespace forumcp
