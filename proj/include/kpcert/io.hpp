#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kpcert/geometry.hpp"
#include "kpcert/instance.hpp"
#include "kpcert/oracle.hpp"
#include "kpcert/reach.hpp"
#include "kpcert/verify.hpp"

namespace kpcert {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

// Strict parsing rejects unknown keys; lenient parsing reports them in
// `warnings` and carries on.
enum class ParseMode { kStrict, kLenient };

// All parse/load functions throw InputError. Syntax errors name the line and
// column; schema errors name the JSON path of the offending value.

// Instance file:
//   {"h": H, "w": W, "k": K, "ground_truth": [r1, c1, ..., rK, cK],
//    "zonotope": {"center": [[K values] x HW],
//                 "generators": [[[K values] x HW] x m]},
//    "polytope": {"p": [[2K values] x F], "b": [F values]},
//    "epsilon": 1e-6, "limits": {"nodes": N, "time_s": T},
//    "seed": [[K values] x HW], "big_m": 1e6}
// Pixel rows follow the flattened index j = (h - 1) W + w. "epsilon",
// "limits", "seed" and "big_m" are optional.
ProblemInstance parse_instance(std::string_view text, ParseMode mode = ParseMode::kStrict,
                               std::vector<std::string>* warnings = nullptr);
ProblemInstance load_instance(const std::filesystem::path& path,
                              ParseMode mode = ParseMode::kStrict,
                              std::vector<std::string>* warnings = nullptr);
std::string serialize_instance(const ProblemInstance& inst);
void save_text(const std::filesystem::path& path, const std::string& text);

// Network file: {"layers": [{"type": "dense", "weights": [[in] x out],
// "bias": [out]}, {"type": "relu"}, {"type": "flatten"},
// {"type": "conv2d", "kernel": [out][in][kh][kw], "bias": [out],
// "stride": s, "pad": p}, {"type": "reshape", "h": H, "w": W, "k": K}]}
Network parse_network(std::string_view text, ParseMode mode = ParseMode::kStrict,
                      std::vector<std::string>* warnings = nullptr);
Network load_network(const std::filesystem::path& path,
                     ParseMode mode = ParseMode::kStrict,
                     std::vector<std::string>* warnings = nullptr);

// Image file: {"h": H, "w": W, "c": C, "pixels": [[C values] x HW]}.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  Grid pixels;
};
Image parse_image(std::string_view text, ParseMode mode = ParseMode::kStrict,
                  std::vector<std::string>* warnings = nullptr);
Image load_image(const std::filesystem::path& path, ParseMode mode = ParseMode::kStrict,
                 std::vector<std::string>* warnings = nullptr);

// Deviation spec for make-instance: {"ground_truth": [...],
// "polytope": {"p": ..., "b": ...}, "epsilon": 1e-6,
// "limits": {...}, "hull": "base-vertex" | "interval",
// "relu": "deepz" | "interval"}.
struct DeviationSpec {
  std::vector<int> ground_truth;
  HPolytope polytope;
  double epsilon = 1e-6;
  SolverLimits limits;
  HullMethod hull = HullMethod::kBaseVertex;
  ReluMode relu = ReluMode::kDeepZ;
};
DeviationSpec parse_deviation_spec(std::string_view text,
                                   ParseMode mode = ParseMode::kStrict,
                                   std::vector<std::string>* warnings = nullptr);
DeviationSpec load_deviation_spec(const std::filesystem::path& path,
                                  ParseMode mode = ParseMode::kStrict,
                                  std::vector<std::string>* warnings = nullptr);

struct ReportContext {
  std::string instance;
  std::size_t grid_width = 1;  // for (row, col) in the argmax table
  bool pruning = true;
  std::optional<std::uint64_t> seed;
  std::optional<OracleReport> oracle;
};

// Machine-readable verdict report (JSON text, trailing newline).
std::string verdict_report(const Verdict& verdict, const ReportContext& ctx);

// Re-indents JSON text in the layout used by every file this tool writes.
std::string pretty_json(std::string_view text);

// JSON rendering of an oracle run on its own.
std::string oracle_report(const OracleReport& report, const std::string& instance);

}  // namespace kpcert
