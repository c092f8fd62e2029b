// stabq: Monte Carlo experiments on quantiles of stabilizing geometric
// scores. Subcommands map one-to-one onto the experiment drivers; every run
// writes CSVs plus a manifest into the output directory.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stabq/config.hpp"
#include "stabq/csv.hpp"
#include "stabq/experiments.hpp"
#include "stabq/svg.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunContext {
  stabq::ExperimentConfig cfg;
  std::vector<std::string> warnings;
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;
};

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_tables(RunContext& ctx, const stabq::Report& report) {
  for (const auto& table : report.tables) {
    const auto path = ctx.out_dir / (table.name + ".csv");
    stabq::emit_csv(table, path);
    ctx.outputs.push_back(path.string());
  }
  const auto spath = ctx.out_dir / (report.experiment + "_summary.csv");
  stabq::emit_summary_csv(report, spath);
  ctx.outputs.push_back(spath.string());
}

void maybe_write_svg(RunContext& ctx, const stabq::Report& report) {
  if (!ctx.cfg.svg) return;
  if (report.experiment == "bahadur") {
    std::vector<double> ns, means;
    for (const auto& t : report.tables) {
      if (t.name != "bahadur_mean_sup") continue;
      for (const auto& row : t.rows) {
        ns.push_back(row[0]);
        means.push_back(row[1]);
      }
    }
    stabq::RateFit fit;
    for (const auto& t : report.tables) {
      if (t.name != "bahadur_fit" || t.rows.empty()) continue;
      fit.slope = t.rows[0][1];
      fit.intercept = t.rows[0][2];
      fit.stderr_slope = t.rows[0][3];
      fit.r2 = t.rows[0][4];
    }
    if (!ns.empty()) {
      const auto path = ctx.out_dir / "bahadur_fit.svg";
      stabq::emit_svg_ratefit(path, ns, means, fit);
      ctx.outputs.push_back(path.string());
    }
  }
  if (report.experiment == "density-check") {
    for (const auto& t : report.tables) {
      if (t.name != "density_scores" || t.rows.size() < 16) continue;
      std::vector<double> scores;
      scores.reserve(t.rows.size());
      for (const auto& row : t.rows) scores.push_back(row[2]);
      const int k = ctx.cfg.k;
      const int d = ctx.cfg.dimension;
      const auto path = ctx.out_dir / "density_hist.svg";
      stabq::emit_svg_histogram(path, scores, 40,
                                [k, d](double s) { return stabq::knn_kth_pdf(s, k, d); });
      ctx.outputs.push_back(path.string());
    }
  }
  if (report.experiment == "clt") {
    for (const auto& t : report.tables) {
      if (t.name != "clt") continue;
      std::vector<double> stats;
      const double n_last = t.rows.empty() ? 0.0 : t.rows.back()[0];
      for (const auto& row : t.rows) {
        if (row[0] == n_last) stats.push_back(row[3]);
      }
      if (stats.size() >= 16) {
        const auto path = ctx.out_dir / "clt_hist.svg";
        stabq::emit_svg_histogram(path, stats, 24);
        ctx.outputs.push_back(path.string());
      }
    }
  }
}

void write_manifest(const RunContext& ctx, bool pass) {
  nlohmann::json m;
  m["artifact_version"] = kVersion;
  m["config"] = stabq::config_to_json(ctx.cfg);
  m["config_hash"] = stabq::config_hash(ctx.cfg);
  m["base_seed"] = ctx.cfg.seed;
  m["created_utc"] = timestamp_utc();
  m["outputs"] = ctx.outputs;
  m["warnings"] = ctx.warnings;
  m["result"] = pass ? "PASS" : "FAIL";
  std::ofstream out(ctx.out_dir / "manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
}

int run_experiments(RunContext& ctx, const std::vector<std::string>& which) {
  bool all_pass = true;
  for (const auto& name : which) {
    stabq::Report report;
    if (name == "sample") report = stabq::run_sample(ctx.cfg);
    else if (name == "density-check") report = stabq::run_density_check(ctx.cfg);
    else if (name == "bahadur") report = stabq::run_bahadur_rate(ctx.cfg);
    else if (name == "clt") report = stabq::run_clt(ctx.cfg);
    else if (name == "lil") report = stabq::run_lil(ctx.cfg);
    else if (name == "means") report = stabq::run_means(ctx.cfg);
    else if (name == "sigma") report = stabq::run_sigma(ctx.cfg);
    else throw std::invalid_argument("unknown subcommand '" + name + "'");
    write_tables(ctx, report);
    maybe_write_svg(ctx, report);
    std::printf("[%s] %s\n", report.pass ? "PASS" : "FAIL", report.experiment.c_str());
    all_pass = all_pass && report.pass;
  }
  write_manifest(ctx, all_pass);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile estimation experiments for stabilizing geometric scores"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false, svg_set = false;

  const std::vector<std::string> names = {"sample", "density-check", "bahadur", "clt",
                                          "lil",    "means",         "sigma",   "all"};
  std::string chosen;
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--seed", seed_override, "override the base seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_override, "override the output directory");
    sub->add_flag("--svg", svg_set, "emit SVG plots");
    sub->callback([&, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit clean, usage errors exit 2
  }

  try {
    stabq::ParsedConfig parsed = stabq::parse_config(config_path);
    RunContext ctx;
    ctx.cfg = parsed.cfg;
    ctx.warnings = parsed.warnings;
    if (seed_set) ctx.cfg.seed = seed_override;
    if (!out_override.empty()) ctx.cfg.out_dir = out_override;
    if (svg_set) ctx.cfg.svg = true;
    ctx.out_dir = ctx.cfg.out_dir;
    std::filesystem::create_directories(ctx.out_dir);
    for (const auto& w : ctx.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    std::vector<std::string> which;
    if (chosen == "all")
      which = {"sample", "density-check", "bahadur", "clt", "lil", "means", "sigma"};
    else
      which = {chosen};
    return run_experiments(ctx, which);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
