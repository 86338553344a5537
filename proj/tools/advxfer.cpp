// advxfer: command-line driver for patch campaigns.

#include <fmt/core.h>

#include <csignal>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "advxfer/campaign.hpp"
#include "advxfer/config.hpp"
#include "advxfer/error.hpp"
#include "advxfer/http.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/reference_server.hpp"
#include "advxfer/report.hpp"
#include "advxfer/synthetic.hpp"

namespace fs = std::filesystem;
using namespace advxfer;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

CampaignConfig load(const Globals& g) {
  if (g.config.empty()) fail(ErrorKind::kInvalidInput, "--config is required");
  CampaignConfig c = load_config(g.config);
  if (g.seed) c.master_seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

fs::path results_dir(const Globals& g) {
  if (!g.out.empty()) return g.out;
  if (!g.config.empty()) return load_config(g.config).output_dir;
  fail(ErrorKind::kInvalidInput, "--out or --config is required");
}

void print_status(const PhaseStatus& s) {
  std::size_t total = 0;
  for (const auto& [id, n] : s.queries) total += n;
  fmt::print("{}: {} oracle queries", s.phase, total);
  if (!s.excluded.empty()) fmt::print(", {} trials excluded", s.excluded.size());
  fmt::print("\n");
  for (const auto& w : s.warnings) fmt::print(stderr, "warning: {}\n", w);
}

void print_matrix(const fs::path& root) {
  const ResultsLayout layout{root};
  for (const auto& sid : rebuild_matrices(root)) {
    const AsrTable asr = read_asr_csv(layout.matrix_dir() / (sid + "_asr.csv"));
    fmt::print("{}\n{}\n", sid, format_transfer_table_csv(asr));
  }
}

ReferenceServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box adversarial patch campaigns against driving VLM oracles"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "campaign config (JSON)");
  app.add_option("--seed", g.seed, "master seed override");
  app.add_option("--out", g.out, "output / results directory");

  auto* baseline = app.add_subcommand("baseline", "patch-free trials on every oracle");
  auto* optimize = app.add_subcommand("optimize", "optimize one patch per oracle and scenario, then self-attack trials");
  std::vector<std::string> opt_oracles;
  std::string opt_scenario;
  std::string opt_patch;
  std::string opt_trace;
  optimize->add_option("--oracle", opt_oracles, "optimize a single patch against these oracle ids");
  optimize->add_option("--scenario", opt_scenario, "scenario manifest for single-patch mode");
  optimize->add_option("--out", opt_patch, "patch PNG (single-patch mode)");
  optimize->add_option("--trace", opt_trace, "trace JSONL (single-patch mode)");
  auto* transfer = app.add_subcommand("transfer", "evaluate every patch on every other oracle");
  auto* universal = app.add_subcommand("universal", "optimize one patch against all oracles");
  auto* run = app.add_subcommand("run", "all phases, then the report");
  auto* matrix = app.add_subcommand("matrix", "rebuild and print the ASR/TR tables from logs");
  auto* report = app.add_subcommand("report", "render CSV/SVG/JSON report from a results directory");
  bool verify = false;
  report->add_flag("--verify", verify, "check report/summary.json against the raw logs");

  auto* gen = app.add_subcommand("gen-scenario", "write a synthetic scenario (frames + manifest)");
  std::string kind = "crosswalk";
  std::string scenario_id;
  SyntheticOptions synth;
  gen->add_option("--kind", kind, "crosswalk|highway")->check(CLI::IsMember({"crosswalk", "highway"}));
  gen->add_option("--id", scenario_id, "scenario id (defaults to the kind)");
  gen->add_option("--frames", synth.frames, "frame count");
  gen->add_option("--width", synth.width, "frame width");
  gen->add_option("--height", synth.height, "frame height");
  gen->add_option("--patch-size", synth.patch_width, "patch side in pixels");

  auto* serve = app.add_subcommand("serve", "run the reference protocol server (scripted backends)");
  std::string serve_oracle = "scripted:patch-sensitive";
  EmbeddingRef serve_embedding;
  int serve_port = 8080;
  std::string serve_host = "127.0.0.1";
  serve->add_option("--oracle", serve_oracle, "scripted oracle endpoint");
  serve->add_option("--embedding", serve_embedding.endpoint, "scripted embedder endpoint");
  serve->add_option("--dim", serve_embedding.dimension, "embedding dimension");
  serve->add_option("--host", serve_host, "bind address");
  serve->add_option("--port", serve_port, "port");

  auto* conformance = app.add_subcommand("conformance", "replay golden protocol cases against a server");
  std::string conf_url;
  std::string conf_cases;
  std::string conf_write;
  conformance->add_option("--url", conf_url, "server base URL");
  conformance->add_option("--cases", conf_cases, "directory of case_*.json files");
  conformance->add_option("--write-golden", conf_write, "regenerate golden cases into this directory");
  conformance->add_option("--oracle", serve_oracle, "scripted oracle behind the golden cases");
  conformance->add_option("--embedding", serve_embedding.endpoint, "scripted embedder behind the golden cases");
  conformance->add_option("--dim", serve_embedding.dimension, "embedding dimension of the golden cases");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*baseline) {
      print_status(Campaign(load(g)).run_baseline());
    } else if (*optimize && !opt_oracles.empty()) {
      if (opt_scenario.empty() || opt_patch.empty()) {
        fail(ErrorKind::kInvalidInput, "--scenario and --out are required with --oracle");
      }
      const auto manifest = load_manifest(opt_scenario);
      const fs::path checkpoint = fs::path(opt_patch).replace_extension(".checkpoint.json");
      const auto result = optimize_patch(load(g), opt_oracles, manifest, checkpoint);
      write_patch_png(opt_patch, result.patch);
      if (!opt_trace.empty()) write_trace_jsonl(opt_trace, result.trace);
      fs::remove(checkpoint);
      if (!result.trace.empty()) {
        const auto& first = result.trace.front();
        const auto& last = result.trace.back();
        fmt::print("loss {:.4f} -> {:.4f}, {} objective evaluations, {} oracle calls\n", first.loss,
                   last.loss, last.queries, last.oracle_queries);
      }
    } else if (*optimize) {
      print_status(Campaign(load(g)).run_self_attack());
    } else if (*transfer) {
      Campaign c(load(g));
      print_status(c.run_transfer());
      print_matrix(c.layout().root);
    } else if (*universal) {
      print_status(Campaign(load(g)).run_universal());
    } else if (*run) {
      Campaign c(load(g));
      print_status(c.run_baseline());
      print_status(c.run_self_attack());
      print_status(c.run_transfer());
      if (c.config().universal) print_status(c.run_universal());
      const auto bundle = render_report(c.layout().root);
      fmt::print("report: {} files in {}\n", bundle.files.size(), c.layout().report_dir().string());
    } else if (*matrix) {
      print_matrix(results_dir(g));
    } else if (*report) {
      const fs::path root = results_dir(g);
      if (verify) {
        std::string diff;
        if (!verify_report(root, &diff)) {
          fmt::print(stderr, "summary differs from the logs:\n{}\n", diff);
          return 1;
        }
        fmt::print("summary matches the logs\n");
      } else {
        const auto bundle = render_report(root);
        for (const auto& f : bundle.files) fmt::print("{}\n", f.string());
      }
    } else if (*gen) {
      SyntheticOptions o = default_synthetic(parse_scene_kind(kind));
      o.frames = synth.frames;
      o.width = synth.width;
      o.height = synth.height;
      o.patch_width = o.patch_height = synth.patch_width;
      o.scenario_id = scenario_id.empty() ? kind : scenario_id;
      const fs::path dir = g.out.empty() ? fs::path(o.scenario_id) : fs::path(g.out);
      const auto m = generate_scenario(dir, o);
      for (const auto& w : m.validate()) fmt::print(stderr, "warning: {}\n", w);
      fmt::print("{}\n", (dir / "manifest.json").string());
    } else if (*serve) {
      ReferenceServer server({serve_oracle, serve_embedding, "advxfer-reference", "1", 16 << 20});
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      fmt::print("serving {} on http://{}:{}\n", serve_oracle, serve_host, serve_port);
      std::fflush(stdout);
      server.listen(serve_host, serve_port);
    } else if (*conformance) {
      if (!conf_write.empty()) {
        write_conformance_cases(conf_write, build_golden_cases(serve_oracle, serve_embedding));
        fmt::print("golden cases written to {}\n", conf_write);
        if (conf_url.empty()) return 0;
      }
      if (conf_url.empty() || conf_cases.empty()) {
        fail(ErrorKind::kInvalidInput, "--url and --cases are required");
      }
      int failed = 0;
      for (const auto& r : run_conformance(conf_url, load_conformance_cases(conf_cases))) {
        fmt::print("{} {}{}\n", r.passed ? "PASS" : "FAIL", r.name,
                   r.detail.empty() ? "" : " (" + r.detail + ")");
        failed += r.passed ? 0 : 1;
      }
      return failed == 0 ? 0 : 1;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", to_string(e.kind()), e.what());
    return 2;
  }
  return 0;
}
