#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "forumcp/error.hpp"
#include "forumcp/report.hpp"
#include "forumcp/service.hpp"
#include "forumcp/store.hpp"
#include "forumcp/synthetic.hpp"

namespace {

using namespace forumcp;

forumcp::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void print_run(const Store& store, const std::string& id) {
  const RunStatus s = store.status(id);
  std::cout << "run " << id << " " << run_state_name(s.state) << '\n';
  if (s.state != RunState::done) return;
  const auto manifest = store.read_json(id, "manifest.json");
  std::cout << "rank " << manifest.at("rank").at("value").get<int>() << ", clusters "
            << manifest.at("clusters").get<int>() << '\n';
  for (const auto& w : manifest.at("warnings")) std::cout << "warning: " << w.get<std::string>() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event extraction from forum activity by sparse tensor decomposition"};
  app.require_subcommand(1);

  std::string store_dir = std::getenv("FORUMCP_STORE") ? std::getenv("FORUMCP_STORE") : "forumcp-store";
  app.add_option("--store", store_dir, "Store directory (env FORUMCP_STORE)");

  auto* ingest = app.add_subcommand("ingest", "Validate posts and save them as a dataset");
  std::string input, format = "csv", dataset;
  ingest->add_option("--input", input, "CSV or JSONL file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  ingest->add_option("--dataset", dataset, "Dataset name")->required();

  auto* run = app.add_subcommand("run", "Decompose, profile and investigate a dataset");
  std::string rank = "auto", granularity = "week", config_file;
  RunConfig config;
  run->add_option("--dataset", dataset, "Dataset name")->required();
  run->add_option("--config", config_file, "JSON run config; flags override it")->check(CLI::ExistingFile);
  auto* rank_opt = run->add_option("--rank", rank, "auto or a fixed rank");
  auto* lambda_opt = run->add_option("--lambda", config.lambda, "L1 penalty");
  auto* gran_opt = run->add_option("--granularity", granularity, "day, week or month")
                       ->check(CLI::IsMember({"day", "week", "month"}));
  auto* seed_opt = run->add_option("--seed", config.seed, "Random seed");
  auto* kw_opt = run->add_option("--keywords-n", config.keywords_n, "Keywords per cluster");
  auto* th_opt = run->add_option("--th-dom", config.th_dom, "Dominant topic coverage");
  auto* rt_opt = run->add_option("--rt", config.r_t, "Threads per dominant topic");
  auto* k_opt = run->add_option("--k", config.top_k, "Top entities in the table view");

  auto* relabel = app.add_subcommand("relabel", "Relabel a finished run under new classes");
  std::string run_id, classes_file;
  relabel->add_option("--run", run_id, "Run id")->required();
  relabel->add_option("--classes", classes_file, "JSON class definitions")->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Render a view of a finished run");
  std::string view = "tableview", out_dir = ".", report_format = "json";
  ViewKnobs knobs;
  report->add_option("--run", run_id, "Run id")->required();
  report->add_option("--view", view, "storyline, tableview, heatmap or scree")
      ->check(CLI::IsMember({"storyline", "tableview", "heatmap", "scree"}));
  report->add_option("--format", report_format, "json, csv or html")->check(CLI::IsMember({"json", "csv", "html"}));
  report->add_option("--out", out_dir, "Output directory");
  report->add_option("--k", knobs.k, "Top entities in the table view");
  report->add_option("--rt", knobs.r_t, "Threads per dominant topic");
  report->add_option("--th-dom", knobs.th_dom, "Dominant topic coverage");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic forum with planted events");
  std::string spec_file, out_file, truth_file;
  synth->add_option("--spec", spec_file, "JSON synthetic spec")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_file, "Output posts file")->required();
  synth->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  synth->add_option("--truth", truth_file, "Write the planted ground truth as JSON");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Bind address");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const SyntheticSpec spec = synthetic_spec_from_json(read_json_file(spec_file));
      const SyntheticForum forum = generate_synthetic(spec);
      std::ofstream out(out_file, std::ios::binary);
      if (!out) throw Error("io_error", "cannot write " + out_file);
      write_posts(out, forum.posts, parse_input_format(format));
      if (!truth_file.empty()) {
        nlohmann::ordered_json truth = nlohmann::ordered_json::array();
        for (const auto& t : forum.truth) truth.push_back({{"users", t.users}, {"threads", t.threads}, {"weeks", t.weeks}});
        write_file_atomic(truth_file, truth.dump(2) + "\n");
      }
      std::cout << forum.posts.size() << " posts written to " << out_file << '\n';
      return 0;
    }

    Store store(store_dir);
    if (*ingest) {
      std::ifstream in(input, std::ios::binary);
      const PostTable table = parse_posts(in, parse_input_format(format));
      const DatasetInfo info = store.ingest(dataset, table);
      std::cout << "dataset " << info.name << ": " << info.posts << " posts, " << info.users << " users, "
                << info.threads << " threads, " << format_date(info.min_date) << " to " << format_date(info.max_date)
                << " (hash " << info.hash << ")\n";
    } else if (*run) {
      RunConfig effective = config_file.empty() ? RunConfig{} : run_config_from_json(read_json_file(config_file));
      if (*rank_opt) {
        effective.rank = rank == "auto" ? 0 : std::stoi(rank);
        if (rank != "auto" && effective.rank < 1) throw ValidationError("--rank must be auto or >= 1");
      }
      if (*lambda_opt) effective.lambda = config.lambda;
      if (*gran_opt) effective.granularity = parse_granularity(granularity);
      if (*seed_opt) effective.seed = config.seed;
      if (*kw_opt) effective.keywords_n = config.keywords_n;
      if (*th_opt) effective.th_dom = config.th_dom;
      if (*rt_opt) effective.r_t = config.r_t;
      if (*k_opt) effective.top_k = config.top_k;
      const std::string id = store.run(dataset, effective);
      print_run(store, id);
    } else if (*relabel) {
      const auto labels = store.relabel(run_id, classes_from_json(read_json_file(classes_file)));
      for (const auto& l : labels) std::cout << "cluster " << l.cluster_id << ": " << l.label << '\n';
    } else if (*report) {
      std::cout << write_report(store, run_id, parse_report_view(view), parse_report_format(report_format), out_dir, knobs)
                << '\n';
    } else if (*serve) {
      Service service(store);
      service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << host << ':' << port << std::endl;
      service.listen();
      g_service = nullptr;
    }
  } catch (const StageError& e) {
    std::cerr << "error [" << e.code() << "] in stage " << e.stage() << ": " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
