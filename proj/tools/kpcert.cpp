// kpcert: command-line front end.
//
// Exit codes: 0 robust / success, 1 unknown (counterexample found), 2
// inconclusive, 64 input error, 70 internal error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kpcert/encode.hpp"
#include "kpcert/error.hpp"
#include "kpcert/io.hpp"
#include "kpcert/oracle.hpp"
#include "kpcert/reach.hpp"
#include "kpcert/verify.hpp"

namespace fs = std::filesystem;
using namespace kpcert;

namespace {

constexpr int kExitRobust = 0;
constexpr int kExitUnknown = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitInput = 64;
constexpr int kExitInternal = 70;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("kpcert");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("KPCERT_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    save_text(out, text);
  }
}

ParseMode parse_mode(bool lenient) {
  return lenient ? ParseMode::kLenient : ParseMode::kStrict;
}

ProblemInstance load_logged(const std::string& path, bool lenient) {
  std::vector<std::string> warnings;
  auto inst = load_instance(path, parse_mode(lenient), &warnings);
  for (const auto& w : warnings) spdlog::warn("{}: {}", path, w);
  return inst;
}

OracleMethod oracle_method(const std::string& name) {
  if (name == "enum") return OracleMethod::kEnumeration;
  if (name == "sample") return OracleMethod::kSampling;
  return OracleMethod::kAlphaGrid;
}

OracleReport run_oracle(const ProblemInstance& inst, OracleMethod method,
                        std::size_t samples, std::uint64_t seed, double step) {
  switch (method) {
    case OracleMethod::kEnumeration: return enumerate_falsify(inst);
    case OracleMethod::kSampling: return sample_falsify(inst, samples, seed);
    case OracleMethod::kAlphaGrid: return grid_falsify(inst, step);
  }
  return {};
}

int exit_code(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::kRobust: return kExitRobust;
    case VerdictStatus::kUnknown: return kExitUnknown;
    case VerdictStatus::kInconclusive: return kExitInconclusive;
  }
  return kExitInternal;
}

struct VerifyArgs {
  std::string instance;
  bool no_prune = false;
  bool loose_big_m = false;
  std::string oracle;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  double step = 1e-3;
  std::string out;
  bool lenient = false;
};

int cmd_verify(const VerifyArgs& a) {
  ProblemInstance inst = load_logged(a.instance, a.lenient);
  VerifyOptions opt;
  opt.pruning = !a.no_prune;
  opt.tight_big_m = !a.loose_big_m;
  Verdict v = verify(inst, opt);
  spdlog::info("{}: {} ({} nodes, {:.3f} s)", a.instance, to_string(v.status),
               v.stats.nodes, v.stats.wall_time_s);

  ReportContext ctx;
  ctx.instance = a.instance;
  ctx.grid_width = inst.width;
  ctx.pruning = opt.pruning;
  if (!a.oracle.empty()) {
    const auto method = oracle_method(a.oracle);
    ctx.oracle = run_oracle(inst, method, a.samples, a.seed, a.step);
    if (method == OracleMethod::kSampling) ctx.seed = a.seed;
  }
  emit(verdict_report(v, ctx), a.out);
  return exit_code(v.status);
}

struct BatchArgs {
  std::string dir;
  std::size_t jobs = 1;
  std::size_t empirical_n = 100;
  std::uint64_t seed = 0;
  bool no_prune = false;
  std::string out;
  bool lenient = false;
};

struct BatchEntry {
  std::string file;
  std::optional<std::string> error;
  bool acceptable = false;
  std::optional<Verdict> verdict;
  bool empirical_clean = false;
};

int cmd_batch(const BatchArgs& a) {
  if (!fs::is_directory(a.dir)) throw InputError(a.dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError(a.dir + " contains no .json instance files");
  if (a.empirical_n == 0) throw InputError("--empirical-n must be at least 1");

  std::vector<BatchEntry> entries(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t n = next++; n < files.size(); n = next++) {
      BatchEntry& e = entries[n];
      e.file = files[n].filename().string();
      try {
        ProblemInstance inst = load_logged(files[n].string(), a.lenient);
        const Grid clean = inst.seed_heatmap.value_or(inst.reach_set.center());
        e.acceptable = !validate_heatmaps(inst, clean, 0.0).violates;
        VerifyOptions opt;
        opt.pruning = !a.no_prune;
        e.verdict = verify(inst, opt);
        auto s = sample_falsify(inst, a.empirical_n, derive_seed(a.seed, n));
        e.empirical_clean = s.outcome == OracleOutcome::kNoneFound;
      } catch (const std::exception& ex) {
        e.error = ex.what();
        spdlog::error("{}: {}", e.file, ex.what());
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(a.jobs, files.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  using nlohmann::json;
  json rows = json::array();
  std::size_t acceptable = 0, robust = 0, clean = 0, failed = 0;
  std::vector<double> times;
  for (const auto& e : entries) {
    json row = {{"file", e.file}};
    if (e.error) {
      ++failed;
      row["error"] = *e.error;
      rows.push_back(std::move(row));
      continue;
    }
    row["acceptable_seed"] = e.acceptable;
    row["status"] = to_string(e.verdict->status);
    if (e.verdict->status == VerdictStatus::kInconclusive) {
      row["reason"] = to_string(e.verdict->reason);
    }
    row["wall_time_s"] = e.verdict->stats.wall_time_s;
    row["empirical_violation_found"] = !e.empirical_clean;
    times.push_back(e.verdict->stats.wall_time_s);
    if (e.acceptable) {
      ++acceptable;
      robust += e.verdict->status == VerdictStatus::kRobust;
      clean += e.empirical_clean;
    }
    rows.push_back(std::move(row));
  }
  if (failed == entries.size()) throw InputError("no instance in " + a.dir + " could be read");

  double mean = 0.0, var = 0.0;
  for (double t : times) mean += t;
  mean /= double(times.size());
  for (double t : times) var += (t - mean) * (t - mean);
  const double stdev = std::sqrt(var / double(times.size()));
  json summary = {{"instances", entries.size()},
                  {"errors", failed},
                  {"acceptable", acceptable},
                  {"robust", robust},
                  {"verified_rate", acceptable ? double(robust) / double(acceptable) : 0.0},
                  {"empirical_verified_rate",
                   acceptable ? double(clean) / double(acceptable) : 0.0},
                  {"empirical_samples", a.empirical_n},
                  {"seed", a.seed},
                  {"time_mean_s", mean},
                  {"time_std_s", stdev}};
  json doc = {{"schema_version", kReportSchemaVersion},
              {"tool", "kpcert"},
              {"tool_version", kToolVersion},
              {"summary", summary},
              {"instances", rows}};
  emit(pretty_json(doc.dump()), a.out);
  spdlog::info("verified {}/{} acceptable instances", robust, acceptable);
  return 0;
}

struct MakeArgs {
  std::string network;
  std::string spec;
  std::vector<std::string> images;
  std::string out;
  bool lenient = false;
};

int cmd_make_instance(const MakeArgs& a) {
  std::vector<std::string> warnings;
  const auto mode = parse_mode(a.lenient);
  Network net = load_network(a.network, mode, &warnings);
  DeviationSpec spec = load_deviation_spec(a.spec, mode, &warnings);
  std::vector<Image> images;
  for (const auto& p : a.images) images.push_back(load_image(p, mode, &warnings));
  for (const auto& w : warnings) spdlog::warn("{}", w);

  const Image& seed = images.front();
  std::vector<Grid> perturbed;
  for (std::size_t n = 1; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.height != seed.height || img.width != seed.width ||
        img.pixels.cols() != seed.pixels.cols()) {
      throw InputError(a.images[n] + " is " + std::to_string(img.height) + "x" +
                       std::to_string(img.width) + "x" + std::to_string(img.pixels.cols()) +
                       " but the seed image is " + std::to_string(seed.height) + "x" +
                       std::to_string(seed.width) + "x" + std::to_string(seed.pixels.cols()));
    }
    perturbed.push_back(img.pixels);
  }
  ImageSetSpec is;
  is.height = seed.height;
  is.width = seed.width;
  is.ground_truth = spec.ground_truth;
  is.deviation_polytope = spec.polytope;
  is.epsilon = spec.epsilon;
  is.hull = spec.hull;
  is.relu = spec.relu;
  const Shape out = net.output_shape({seed.height, seed.width, seed.pixels.cols()});
  if (2 * out.c != spec.ground_truth.size()) {
    throw InputError("network produces " + std::to_string(out.h) + "x" +
                     std::to_string(out.w) + "x" + std::to_string(out.c) +
                     " heatmaps but the deviation spec lists " +
                     std::to_string(spec.ground_truth.size() / 2) + " keypoints");
  }
  ProblemInstance inst = instance_from_images(net, seed.pixels, perturbed, is);
  inst.limits = spec.limits;
  emit(serialize_instance(inst), a.out);
  return 0;
}

struct OracleArgs {
  std::string instance;
  std::string method = "enum";
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  double step = 1e-3;
  std::string out;
  bool lenient = false;
};

int cmd_oracle(const OracleArgs& a) {
  ProblemInstance inst = load_logged(a.instance, a.lenient);
  auto r = run_oracle(inst, oracle_method(a.method), a.samples, a.seed, a.step);
  emit(oracle_report(r, a.instance), a.out);
  return r.outcome == OracleOutcome::kCounterexampleFound ? kExitUnknown : kExitRobust;
}

struct ExportArgs {
  std::string instance;
  bool no_prune = false;
  std::string out;
  bool lenient = false;
};

int cmd_export_lp(const ExportArgs& a) {
  ProblemInstance inst = load_logged(a.instance, a.lenient);
  VerifyOptions opt;
  opt.pruning = !a.no_prune;
  emit(export_lp(prepare_model(inst, opt).model), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Coupled robustness verification for heatmap keypoint detectors"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  const std::vector<std::string> oracles{"enum", "sample", "grid"};

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "Verify one instance file");
  verify_cmd->add_option("instance", va.instance, "Instance JSON")->required();
  verify_cmd->add_flag("--no-prune", va.no_prune, "Disable dominance pruning");
  verify_cmd->add_flag("--loose-big-m", va.loose_big_m,
                       "Use the instance's big_m instead of per-facet constants");
  verify_cmd->add_option("--oracle", va.oracle, "Cross-check with an oracle")
      ->check(CLI::IsMember(oracles));
  verify_cmd->add_option("--samples", va.samples, "Samples for --oracle sample");
  verify_cmd->add_option("--seed", va.seed, "Seed for stochastic oracles");
  verify_cmd->add_option("--step", va.step, "Alpha step for --oracle grid");
  verify_cmd->add_option("--out", va.out, "Report path (default stdout)");
  verify_cmd->add_flag("--lenient", va.lenient, "Warn on unknown keys instead of failing");

  BatchArgs ba;
  auto* batch_cmd = app.add_subcommand("batch", "Verify every instance in a directory");
  batch_cmd->add_option("dir", ba.dir, "Directory of instance JSON files")->required();
  batch_cmd->add_option("--jobs", ba.jobs, "Parallel workers");
  batch_cmd->add_option("--empirical-n", ba.empirical_n, "Samples per instance");
  batch_cmd->add_option("--seed", ba.seed, "Base seed");
  batch_cmd->add_flag("--no-prune", ba.no_prune, "Disable dominance pruning");
  batch_cmd->add_option("--out", ba.out, "Summary path (default stdout)");
  batch_cmd->add_flag("--lenient", ba.lenient, "Warn on unknown keys instead of failing");

  MakeArgs ma;
  auto* make_cmd = app.add_subcommand("make-instance", "Build an instance from a network");
  make_cmd->add_option("--network", ma.network, "Network JSON")->required();
  make_cmd->add_option("--spec", ma.spec, "Deviation spec JSON")->required();
  make_cmd->add_option("images", ma.images, "Seed image followed by perturbed images")
      ->required();
  make_cmd->add_option("--out", ma.out, "Instance path (default stdout)");
  make_cmd->add_flag("--lenient", ma.lenient, "Warn on unknown keys instead of failing");

  OracleArgs oa;
  auto* oracle_cmd = app.add_subcommand("oracle", "Run a brute-force falsifier");
  oracle_cmd->add_option("instance", oa.instance, "Instance JSON")->required();
  oracle_cmd->add_option("--method", oa.method, "Falsifier")->check(CLI::IsMember(oracles));
  oracle_cmd->add_option("--samples", oa.samples, "Samples for --method sample");
  oracle_cmd->add_option("--seed", oa.seed, "Sampling seed");
  oracle_cmd->add_option("--step", oa.step, "Alpha step for --method grid");
  oracle_cmd->add_option("--out", oa.out, "Report path (default stdout)");
  oracle_cmd->add_flag("--lenient", oa.lenient, "Warn on unknown keys instead of failing");

  ExportArgs ea;
  auto* export_cmd = app.add_subcommand("export-lp", "Write the MILP in LP format");
  export_cmd->add_option("instance", ea.instance, "Instance JSON")->required();
  export_cmd->add_flag("--no-prune", ea.no_prune, "Disable dominance pruning");
  export_cmd->add_option("--out", ea.out, "LP path (default stdout)");
  export_cmd->add_flag("--lenient", ea.lenient, "Warn on unknown keys instead of failing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*verify_cmd) return cmd_verify(va);
    if (*batch_cmd) return cmd_batch(ba);
    if (*make_cmd) return cmd_make_instance(ma);
    if (*oracle_cmd) return cmd_oracle(oa);
    if (*export_cmd) return cmd_export_lp(ea);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
