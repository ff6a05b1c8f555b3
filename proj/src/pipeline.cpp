#include "forumcp/pipeline.hpp"

#include <set>

#include "forumcp/error.hpp"

namespace forumcp {

void RunConfig::validate() const {
  if (rank < 0) throw ValidationError("rank must be >= 1, or 0 for automatic selection");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (keywords_n < 1) throw ValidationError("keywords_n must be >= 1");
  if (!(th_dom > 0.0 && th_dom <= 1.0)) throw ValidationError("th_dom must be in (0, 1]");
  if (r_t < 1) throw ValidationError("r_t must be >= 1");
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
  if (r_max < 0) throw ValidationError("r_max must be >= 0");
  if (patience < 0) throw ValidationError("patience must be >= 0");
  if (max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
  if (!(mix_range >= 0.0)) throw ValidationError("mix_range must be >= 0");
  if (!(g_floor >= 0.0)) throw ValidationError("g_floor must be >= 0");
  if (!(dbscan_eps > 0.0)) throw ValidationError("dbscan_eps must be > 0");
  if (dbscan_min_pts < 1) throw ValidationError("dbscan_min_pts must be >= 1");
  if (lda_sweeps < 1) throw ValidationError("lda_sweeps must be >= 1");
  if (!classes.empty() && classes.size() < 2) throw ValidationError("at least two classes are needed");
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.lambda = lambda;
  o.max_sweeps = max_sweeps;
  o.tolerance = tolerance;
  o.seed = seed;
  return o;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  return {{"granularity", granularity_name(c.granularity)},
          {"rank", c.rank == 0 ? nlohmann::ordered_json("auto") : nlohmann::ordered_json(c.rank)},
          {"lambda", c.lambda},
          {"keywords_n", c.keywords_n},
          {"th_dom", c.th_dom},
          {"r_t", c.r_t},
          {"top_k", c.top_k},
          {"seed", c.seed},
          {"classes", to_json(c.classes)},
          {"r_max", c.r_max},
          {"consistency_threshold", c.consistency_threshold},
          {"patience", c.patience},
          {"max_sweeps", c.max_sweeps},
          {"tolerance", c.tolerance},
          {"epsilon", c.epsilon},
          {"mix_range", c.mix_range},
          {"g_floor", c.g_floor},
          {"dbscan_eps", c.dbscan_eps},
          {"dbscan_min_pts", c.dbscan_min_pts},
          {"lda_sweeps", c.lda_sweeps}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  static const std::set<std::string> known = {"granularity", "rank",      "lambda",     "keywords_n",
                                              "th_dom",      "r_t",       "top_k",      "seed",
                                              "classes",     "r_max",     "consistency_threshold", "patience",
                                              "max_sweeps",  "tolerance", "epsilon",    "mix_range",
                                              "g_floor",     "dbscan_eps", "dbscan_min_pts", "lda_sweeps"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown run config field '" + key + "'");
  }
  RunConfig c;
  try {
    if (j.contains("granularity")) c.granularity = parse_granularity(j.at("granularity").get<std::string>());
    if (j.contains("rank")) {
      const auto& r = j.at("rank");
      if (r.is_string()) {
        if (r.get<std::string>() != "auto") throw ValidationError("rank must be 'auto' or an integer");
        c.rank = 0;
      } else {
        c.rank = r.get<int>();
        if (c.rank < 1) throw ValidationError("rank must be >= 1");
      }
    }
    c.lambda = j.value("lambda", c.lambda);
    c.keywords_n = j.value("keywords_n", c.keywords_n);
    c.th_dom = j.value("th_dom", c.th_dom);
    c.r_t = j.value("r_t", c.r_t);
    c.top_k = j.value("top_k", c.top_k);
    c.seed = j.value("seed", c.seed);
    if (j.contains("classes") && !j.at("classes").empty()) c.classes = classes_from_json(j.at("classes"));
    c.r_max = j.value("r_max", c.r_max);
    c.consistency_threshold = j.value("consistency_threshold", c.consistency_threshold);
    c.patience = j.value("patience", c.patience);
    c.max_sweeps = j.value("max_sweeps", c.max_sweeps);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.mix_range = j.value("mix_range", c.mix_range);
    c.g_floor = j.value("g_floor", c.g_floor);
    c.dbscan_eps = j.value("dbscan_eps", c.dbscan_eps);
    c.dbscan_min_pts = j.value("dbscan_min_pts", c.dbscan_min_pts);
    c.lda_sweeps = j.value("lda_sweeps", c.lda_sweeps);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<ClusterLabel> label_clusters(const std::vector<KeywordSet>& keywords, const std::vector<ClassDefinition>& classes,
                                         double mix_range, double g_floor) {
  std::vector<ClusterLabel> out;
  out.reserve(keywords.size());
  for (const auto& kw : keywords) out.push_back(label_cluster(kw, classes, mix_range, g_floor));
  return out;
}

std::vector<std::vector<double>> profile_rows(const std::vector<BehaviorProfile>& profiles, bool normalized) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : profiles) {
    const auto& v = normalized ? p.normalized : p.metrics;
    rows.emplace_back(v.begin(), v.end());
  }
  return rows;
}

std::string forum_label(const PostTable& table, const std::string& fallback) {
  if (table.empty()) return fallback;
  const std::string& first = table.records.front().forum_id;
  for (const auto& r : table.records) {
    if (r.forum_id != first) return fallback;
  }
  return first;
}

namespace {

template <typename Fn>
auto stage(const char* name, const StageCallback& on_stage, Fn&& fn) {
  if (on_stage) on_stage(name);
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, "internal_error", e.what());
  }
}

}  // namespace

RunResult run_pipeline(const PostTable& table, const RunConfig& config, const std::string& forum,
                       const StageCallback& on_stage) {
  config.validate();
  RunResult run;
  run.forum = forum;
  run.solver = config.solver_options();
  run.classes = config.classes.empty() ? default_classes() : normalize_classes(config.classes);

  const SparseTensor3<double> x = stage("ingest", on_stage, [&] {
    run.time = discretize(table, config.granularity);
    return build_tensor(table, run.time);
  });
  run.shape = x.shape();
  run.nnz = x.nnz();
  run.mass = x.sum();

  stage("decompose", on_stage, [&] {
    Index rank = config.rank;
    if (rank == 0) {
      const Index r_max = config.r_max > 0 ? config.r_max : default_max_rank(x.shape());
      run.selection = autoten_rank(x, r_max, run.solver, RankSearch{config.consistency_threshold, config.patience});
      rank = run.selection->rank;
      if (run.selection->fallback) {
        run.warnings.push_back("no candidate rank reached core consistency " +
                               std::to_string(config.consistency_threshold) + "; using best-scoring rank " +
                               std::to_string(rank));
      }
    }
    run.model = cp_als_nn_l1(x, rank, run.solver);
    for (const auto& w : run.model.warnings) run.warnings.push_back(w);
    if (!run.model.converged) {
      run.warnings.push_back("decomposition stopped at max_sweeps=" + std::to_string(config.max_sweeps) +
                             " before converging");
    }
    return 0;
  });

  std::vector<ClusterActivity> activity;
  stage("extract", on_stage, [&] {
    auto clusters = extract_clusters(run.model, config.epsilon, &run.warnings);
    for (auto& c : clusters) {
      try {
        activity.push_back(cluster_activity(c, table, run.time));
      } catch (const Error& e) {
        if (e.code() != "inconsistent_cluster") throw;
        run.warnings.push_back(std::string(e.what()) + "; dropped");
        continue;
      }
      c.cluster_id = static_cast<int>(run.clusters.size());
      run.clusters.push_back(std::move(c));
    }
    for (std::size_t n = 0; n < run.clusters.size(); ++n) {
      run.cards.push_back(make_card(run.clusters[n], activity[n], table, run.time));
    }
    return 0;
  });

  stage("profile", on_stage, [&] {
    const KeywordCorpus corpus(table);
    for (const auto& c : run.clusters) {
      run.keywords.push_back(cluster_keywords(c, corpus, config.keywords_n));
      if (!run.keywords.back().warning.empty()) {
        run.warnings.push_back("cluster " + std::to_string(c.cluster_id) + ": " + run.keywords.back().warning);
      }
    }
    run.labels = label_clusters(run.keywords, run.classes, config.mix_range, config.g_floor);
    for (std::size_t n = 0; n < run.clusters.size(); ++n) {
      run.profiles.push_back(behavior_profile(run.clusters[n], activity[n], table));
    }
    normalize_profiles(run.profiles);
    run.anomalies = detect_anomalies(profile_rows(run.profiles, true), config.dbscan_eps, config.dbscan_min_pts);
    if (run.anomalies.unlabelable) {
      run.warnings.push_back("fewer clusters than dbscan_min_pts; anomaly detection cannot label any cluster");
    }
    run.scree = scree_data(run.cards, run.profiles, run.labels);
    return 0;
  });

  stage("investigate", on_stage, [&] {
    for (const auto& c : run.clusters) {
      run.story_data.push_back(
          storyline_data(c, table, detail::rank_seed(config.seed, c.cluster_id + 1), config.lda_sweeps));
      run.storylines.push_back(make_storyline(run.story_data.back(), config.th_dom, config.r_t));
    }
    run.tableview = build_tableview(run.forum, run.cards, run.labels, run.storylines, config.top_k);
    return 0;
  });
  return run;
}

}  // namespace forumcp
