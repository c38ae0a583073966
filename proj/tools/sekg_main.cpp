// sekg: crowd-sourced side-effect knowledge graph pipeline.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sekg/error.hpp"
#include "sekg/log.hpp"
#include "sekg/pipeline.hpp"
#include "sekg/viewer_server.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct Options {
  std::string config;
  std::string log_level = "warn";
  std::vector<std::string> sets;
  std::string input_format;
  bool resume = false;
  std::string host = "127.0.0.1";
  int port = 8000;
  std::string viewer_dir;
  std::string graph;
};

sekg::PipelineConfig load(const Options& o) {
  if (o.config.empty()) throw sekg::ConfigError("--config is required");
  auto sets = o.sets;
  if (!o.input_format.empty()) sets.push_back("input.threads_format=" + o.input_format);
  return sekg::load_config(o.config, sets);
}

int serve(const Options& o) {
  std::filesystem::path graph = o.graph;
  if (graph.empty()) graph = load(o).output_dir / "graph.json";
  std::optional<std::filesystem::path> viewer;
  if (!o.viewer_dir.empty()) viewer = o.viewer_dir;

  sekg::ViewerServer server(graph, viewer);
  const int port = server.start(o.host, o.port);
  std::cout << "serving http://" << o.host << ":" << port << "/ (Ctrl-C to stop)" << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build a medication/side-effect knowledge graph from discussion threads"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config, "Pipeline config file");
  app.add_option("--log-level", o.log_level, "debug, info, warn, error or off")->capture_default_str();
  app.add_option("--set", o.sets, "Override a config value, section.key=value (repeatable)");

  auto* ingest = app.add_subcommand("ingest", "Flatten and filter the thread dump");
  auto* extract = app.add_subcommand("extract", "Extract relations with the completion provider");
  auto* normalize = app.add_subcommand("normalize", "Consolidate side-effect terms");
  auto* graph = app.add_subcommand("build-graph", "Aggregate the graph and export the viewer document");
  auto* compare = app.add_subcommand("compare", "Compare crowd and FAERS frequencies");
  auto* sample = app.add_subcommand("sample-eval", "Draw the annotation sample");
  auto* score = app.add_subcommand("score-eval", "Score the annotation file by majority vote");
  auto* run = app.add_subcommand("run", "Run every stage in order");
  auto* serve_cmd = app.add_subcommand("serve-viewer", "Serve the viewer bundle and graph document");

  for (auto* sub : {ingest, run}) {
    sub->add_option("--input-format", o.input_format, "threads (nested trees) or items (pre-flattened)")
        ->check(CLI::IsMember({"threads", "items"}));
  }
  run->add_flag("--resume", o.resume, "Skip leading stages whose artifacts exist");
  serve_cmd->add_option("--host", o.host)->capture_default_str();
  serve_cmd->add_option("--port", o.port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--viewer-dir", o.viewer_dir, "Built viewer bundle");
  serve_cmd->add_option("--graph", o.graph, "Graph document (default: <output_dir>/graph.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sekg::exit_code(sekg::ErrorKind::Argument);
  }

  try {
    sekg::log::configure(o.log_level);
    if (serve_cmd->parsed()) return serve(o);

    sekg::Pipeline pipeline(load(o));
    using sekg::Stage;
    if (ingest->parsed()) pipeline.run_stage(Stage::Ingest);
    if (extract->parsed()) pipeline.run_stage(Stage::Extract);
    if (normalize->parsed()) pipeline.run_stage(Stage::Normalize);
    if (graph->parsed()) pipeline.run_stage(Stage::Graph);
    if (compare->parsed()) pipeline.run_stage(Stage::Stats);
    if (sample->parsed()) {
      std::cout << "sampled " << pipeline.sample_eval() << " records into "
                << pipeline.artifact("eval_sample.csv").string() << "\n";
    }
    if (score->parsed()) {
      const auto s = pipeline.score_eval();
      std::cout << "side_effect_accuracy=" << s.side_effect_accuracy << " severity_accuracy=" << s.severity_accuracy
                << " relations=" << s.relations << "\n";
    }
    if (run->parsed()) {
      const auto bundle = pipeline.run(o.resume);
      std::cout << "bundle written to " << bundle.output_dir.string() << " (" << bundle.executed.size()
                << " stages run, " << bundle.skipped.size() << " skipped)\n";
    }
    return 0;
  } catch (const sekg::Error& e) {
    std::cerr << "sekg: " << sekg::to_string(e.kind()) << " error: " << e.what() << "\n";
    return sekg::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "sekg: internal error: " << e.what() << "\n";
    return 1;
  }
}
