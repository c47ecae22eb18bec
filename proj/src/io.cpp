#include "kpcert/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kpcert/error.hpp"

namespace kpcert {
namespace {

using nlohmann::json;

// Wraps a JSON value with its path so schema errors can point at it.
class Node {
 public:
  Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

  const json& raw() const { return value_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("at " + (path_.empty() ? std::string("/") : path_) + ": " + what);
  }

  bool has(const char* key) const { return value_.contains(key); }

  Node at(const char* key) const {
    if (!value_.is_object()) fail("expected an object");
    auto it = value_.find(key);
    if (it == value_.end()) fail(std::string("missing key \"") + key + "\"");
    return Node(*it, path_ + "/" + key);
  }

  Node at(std::size_t index) const {
    return Node(value_.at(index), path_ + "/" + std::to_string(index));
  }

  std::size_t array_size() const {
    if (!value_.is_array()) fail("expected an array");
    return value_.size();
  }

  double number() const {
    if (!value_.is_number()) fail("expected a number");
    double v = value_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  long long integer() const {
    if (value_.is_number_integer()) return value_.get<long long>();
    if (value_.is_number_float()) {
      double v = value_.get<double>();
      if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long long>(v);
    }
    fail("expected an integer");
  }

  std::size_t count() const {
    long long v = integer();
    if (v < 0) fail("expected a nonnegative integer");
    return static_cast<std::size_t>(v);
  }

  std::string string() const {
    if (!value_.is_string()) fail("expected a string");
    return value_.get<std::string>();
  }

  std::vector<double> numbers(std::optional<std::size_t> expect = std::nullopt) const {
    const std::size_t n = array_size();
    if (expect && n != *expect) {
      fail("expected " + std::to_string(*expect) + " values, got " + std::to_string(n));
    }
    std::vector<double> out;
    for (std::size_t e = 0; e < n; ++e) out.push_back(at(e).number());
    return out;
  }

  // rows x cols matrix given as an array of rows.
  Grid grid(std::size_t rows, std::size_t cols) const {
    if (array_size() != rows) {
      fail("expected " + std::to_string(rows) + " rows, got " +
           std::to_string(array_size()));
    }
    Grid g(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = at(r).numbers(cols);
      for (std::size_t c = 0; c < cols; ++c) g(r, c) = row[c];
    }
    return g;
  }

  void check_keys(std::initializer_list<const char*> allowed, ParseMode mode,
                  std::vector<std::string>* warnings) const {
    if (!value_.is_object()) fail("expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : value_.items()) {
      if (ok.count(key)) continue;
      const std::string msg =
          "unknown key \"" + key + "\" at " + (path_.empty() ? std::string("/") : path_);
      if (mode == ParseMode::kStrict) throw InputError(msg);
      if (warnings) warnings->push_back(msg);
    }
  }

 private:
  const json& value_;
  std::string path_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line and column.
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t p = 0; p < stop; ++p) {
      if (text[p] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    auto colon = what.rfind(": ");
    if (colon != std::string::npos) what = what.substr(colon + 2);
    throw InputError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                     ": " + what);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
auto with_path(const std::filesystem::path& path, F&& f) {
  try {
    return f(read_file(path));
  } catch (const InputError& e) {
    const std::string what = e.what();
    if (what.rfind("cannot open", 0) == 0) throw;
    throw InputError(path.string() + ": " + what);
  }
}

HPolytope read_polytope(const Node& node, std::size_t dim, ParseMode mode,
                        std::vector<std::string>* warnings) {
  node.check_keys({"p", "b"}, mode, warnings);
  Node p = node.at("p");
  const std::size_t facets = p.array_size();
  if (facets == 0) p.fail("polytope needs at least one facet");
  std::vector<std::vector<double>> a;
  for (std::size_t f = 0; f < facets; ++f) a.push_back(p.at(f).numbers(dim));
  return HPolytope(dim, std::move(a), node.at("b").numbers(facets));
}

std::vector<int> read_ground_truth(const Node& node) {
  std::vector<int> out;
  for (std::size_t t = 0; t < node.array_size(); ++t) {
    out.push_back(static_cast<int>(node.at(t).integer()));
  }
  return out;
}

SolverLimits read_limits(const Node& node, ParseMode mode,
                         std::vector<std::string>* warnings) {
  node.check_keys({"nodes", "time_s"}, mode, warnings);
  SolverLimits lim;
  if (node.has("nodes")) lim.max_nodes = node.at("nodes").count();
  if (node.has("time_s")) {
    lim.time_budget_s = node.at("time_s").number();
    if (lim.time_budget_s <= 0.0) node.at("time_s").fail("time budget must be positive");
  }
  return lim;
}

json grid_json(const Grid& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < g.cols(); ++c) row.push_back(g(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Objects and nested arrays one entry per line; arrays of scalars inline.
void pretty(const json& j, std::size_t indent, std::string& out) {
  const std::string pad(indent, ' ');
  const std::string inner(indent + 2, ' ');
  const bool flat = j.is_array() && std::none_of(j.begin(), j.end(), [](const json& e) {
    return e.is_structured();
  });
  if (j.is_primitive() || flat || j.empty()) {
    out += j.dump();
    return;
  }
  const bool object = j.is_object();
  out += object ? "{\n" : "[\n";
  std::size_t n = 0;
  for (auto it = j.begin(); it != j.end(); ++it, ++n) {
    out += inner;
    if (object) out += json(it.key()).dump() + ": ";
    pretty(*it, indent + 2, out);
    out += n + 1 < j.size() ? ",\n" : "\n";
  }
  out += pad + (object ? "}" : "]");
}

std::string pretty(const json& j) {
  std::string out;
  pretty(j, 0, out);
  return out + "\n";
}

json polytope_json(const HPolytope& p) {
  return {{"p", p.a()}, {"b", p.b()}};
}

json argmax_json(const ValidationReport& v, std::size_t width) {
  json table = json::array();
  for (std::size_t i = 0; i < v.channels.size(); ++i) {
    json pixels = json::array();
    for (int j : v.channels[i].argmax) {
      auto [r, c] = pixel_of(j, width);
      pixels.push_back({{"index", j}, {"row", r}, {"col", c}});
    }
    table.push_back(
        {{"channel", i + 1}, {"max_value", v.channels[i].max_value}, {"argmax", pixels}});
  }
  return table;
}

json oracle_json(const OracleReport& r) {
  json j = {{"method", to_string(r.method)},
            {"outcome", to_string(r.outcome)},
            {"assignments_tried", r.assignments_tried},
            {"samples_drawn", r.samples_drawn},
            {"lp_calls", r.lp_calls}};
  if (r.method == OracleMethod::kSampling) j["seed"] = r.seed;
  if (r.witness) {
    j["witness"] = {{"alpha", r.witness->alpha}, {"deviation", r.witness->deviation}};
  }
  return j;
}

}  // namespace

ProblemInstance parse_instance(std::string_view text, ParseMode mode,
                               std::vector<std::string>* warnings) {
  const json doc = parse_json(text);
  Node root(doc, "");
  root.check_keys({"h", "w", "k", "ground_truth", "zonotope", "polytope", "epsilon",
                   "limits", "seed", "big_m"},
                  mode, warnings);
  ProblemInstance inst;
  inst.height = root.at("h").count();
  inst.width = root.at("w").count();
  inst.keypoints = root.at("k").count();
  if (inst.height == 0 || inst.width == 0 || inst.keypoints == 0) {
    root.fail("h, w and k must be positive");
  }
  const std::size_t hw = inst.pixels();
  const std::size_t k = inst.keypoints;
  inst.ground_truth = read_ground_truth(root.at("ground_truth"));

  Node zono = root.at("zonotope");
  zono.check_keys({"center", "generators"}, mode, warnings);
  Grid center = zono.at("center").grid(hw, k);
  std::vector<Grid> gens;
  if (zono.has("generators")) {
    Node g = zono.at("generators");
    for (std::size_t n = 0; n < g.array_size(); ++n) gens.push_back(g.at(n).grid(hw, k));
  }
  inst.reach_set = Zonotope(inst.height, inst.width, std::move(center), std::move(gens));
  inst.deviation_polytope = read_polytope(root.at("polytope"), 2 * k, mode, warnings);
  if (root.has("epsilon")) {
    inst.epsilon = root.at("epsilon").number();
    if (inst.epsilon <= 0.0) root.at("epsilon").fail("epsilon must be positive");
  }
  if (root.has("big_m")) inst.big_m_fallback = root.at("big_m").number();
  if (root.has("limits")) inst.limits = read_limits(root.at("limits"), mode, warnings);
  if (root.has("seed")) inst.seed_heatmap = root.at("seed").grid(hw, k);
  inst.validate();
  return inst;
}

ProblemInstance load_instance(const std::filesystem::path& path, ParseMode mode,
                              std::vector<std::string>* warnings) {
  return with_path(path, [&](const std::string& text) {
    return parse_instance(text, mode, warnings);
  });
}

std::string serialize_instance(const ProblemInstance& inst) {
  json gens = json::array();
  for (const auto& g : inst.reach_set.generators()) gens.push_back(grid_json(g));
  json doc = {{"h", inst.height},
              {"w", inst.width},
              {"k", inst.keypoints},
              {"ground_truth", inst.ground_truth},
              {"zonotope", {{"center", grid_json(inst.reach_set.center())},
                            {"generators", gens}}},
              {"polytope", polytope_json(inst.deviation_polytope)},
              {"epsilon", inst.epsilon},
              {"big_m", inst.big_m_fallback},
              {"limits", {{"nodes", inst.limits.max_nodes},
                          {"time_s", inst.limits.time_budget_s}}}};
  if (inst.seed_heatmap) doc["seed"] = grid_json(*inst.seed_heatmap);
  return pretty(doc);
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

Network parse_network(std::string_view text, ParseMode mode,
                      std::vector<std::string>* warnings) {
  const json doc = parse_json(text);
  Node root(doc, "");
  root.check_keys({"layers"}, mode, warnings);
  Node layers = root.at("layers");
  std::vector<Layer> out;
  for (std::size_t l = 0; l < layers.array_size(); ++l) {
    Node node = layers.at(l);
    const std::string type = node.at("type").string();
    if (type == "dense") {
      node.check_keys({"type", "weights", "bias"}, mode, warnings);
      DenseLayer d;
      Node w = node.at("weights");
      for (std::size_t o = 0; o < w.array_size(); ++o) d.weights.push_back(w.at(o).numbers());
      d.bias = node.at("bias").numbers(d.weights.size());
      out.push_back(std::move(d));
    } else if (type == "conv2d") {
      node.check_keys({"type", "kernel", "bias", "stride", "pad"}, mode, warnings);
      Conv2DLayer c;
      Node k = node.at("kernel");
      for (std::size_t o = 0; o < k.array_size(); ++o) {
        Node ko = k.at(o);
        std::vector<std::vector<std::vector<double>>> per_in;
        for (std::size_t i = 0; i < ko.array_size(); ++i) {
          Node ki = ko.at(i);
          std::vector<std::vector<double>> rows;
          for (std::size_t y = 0; y < ki.array_size(); ++y) rows.push_back(ki.at(y).numbers());
          per_in.push_back(std::move(rows));
        }
        c.kernel.push_back(std::move(per_in));
      }
      c.bias = node.at("bias").numbers(c.kernel.size());
      if (node.has("stride")) c.stride = node.at("stride").count();
      if (node.has("pad")) c.pad = node.at("pad").count();
      out.push_back(std::move(c));
    } else if (type == "relu") {
      node.check_keys({"type"}, mode, warnings);
      out.push_back(ReluLayer{});
    } else if (type == "flatten") {
      node.check_keys({"type"}, mode, warnings);
      out.push_back(FlattenLayer{});
    } else if (type == "reshape") {
      node.check_keys({"type", "h", "w", "k"}, mode, warnings);
      out.push_back(ReshapeLayer{
          {node.at("h").count(), node.at("w").count(), node.at("k").count()}});
    } else {
      node.at("type").fail("unknown layer type \"" + type + "\"");
    }
  }
  try {
    return Network(std::move(out));
  } catch (const InputError& e) {
    throw InputError(std::string("at /layers: ") + e.what());
  }
}

Network load_network(const std::filesystem::path& path, ParseMode mode,
                     std::vector<std::string>* warnings) {
  return with_path(path, [&](const std::string& text) {
    return parse_network(text, mode, warnings);
  });
}

Image parse_image(std::string_view text, ParseMode mode,
                  std::vector<std::string>* warnings) {
  const json doc = parse_json(text);
  Node root(doc, "");
  root.check_keys({"h", "w", "c", "pixels"}, mode, warnings);
  Image img;
  img.height = root.at("h").count();
  img.width = root.at("w").count();
  const std::size_t c = root.at("c").count();
  if (img.height == 0 || img.width == 0 || c == 0) root.fail("h, w and c must be positive");
  img.pixels = root.at("pixels").grid(img.height * img.width, c);
  return img;
}

Image load_image(const std::filesystem::path& path, ParseMode mode,
                 std::vector<std::string>* warnings) {
  return with_path(path, [&](const std::string& text) {
    return parse_image(text, mode, warnings);
  });
}

DeviationSpec parse_deviation_spec(std::string_view text, ParseMode mode,
                                   std::vector<std::string>* warnings) {
  const json doc = parse_json(text);
  Node root(doc, "");
  root.check_keys({"ground_truth", "polytope", "epsilon", "limits", "hull", "relu"}, mode,
                  warnings);
  DeviationSpec spec;
  spec.ground_truth = read_ground_truth(root.at("ground_truth"));
  if (spec.ground_truth.empty() || spec.ground_truth.size() % 2 != 0) {
    root.at("ground_truth").fail("expected 2K coordinates");
  }
  spec.polytope = read_polytope(root.at("polytope"), spec.ground_truth.size(), mode, warnings);
  if (root.has("epsilon")) spec.epsilon = root.at("epsilon").number();
  if (root.has("limits")) spec.limits = read_limits(root.at("limits"), mode, warnings);
  if (root.has("hull")) {
    const std::string h = root.at("hull").string();
    if (h == "base-vertex") spec.hull = HullMethod::kBaseVertex;
    else if (h == "interval") spec.hull = HullMethod::kInterval;
    else root.at("hull").fail("expected \"base-vertex\" or \"interval\"");
  }
  if (root.has("relu")) {
    const std::string r = root.at("relu").string();
    if (r == "deepz") spec.relu = ReluMode::kDeepZ;
    else if (r == "interval") spec.relu = ReluMode::kInterval;
    else root.at("relu").fail("expected \"deepz\" or \"interval\"");
  }
  return spec;
}

DeviationSpec load_deviation_spec(const std::filesystem::path& path, ParseMode mode,
                                  std::vector<std::string>* warnings) {
  return with_path(path, [&](const std::string& text) {
    return parse_deviation_spec(text, mode, warnings);
  });
}

std::string verdict_report(const Verdict& verdict, const ReportContext& ctx) {
  json doc = {{"schema_version", kReportSchemaVersion},
              {"tool", "kpcert"},
              {"tool_version", kToolVersion},
              {"instance", ctx.instance},
              {"status", to_string(verdict.status)},
              {"pruning", ctx.pruning}};
  if (verdict.status == VerdictStatus::kInconclusive) {
    doc["reason"] = to_string(verdict.reason);
    doc["detail"] = verdict.detail;
  }
  doc["stats"] = {{"nodes", verdict.stats.nodes},
                  {"lp_calls", verdict.stats.lp_calls},
                  {"max_depth", verdict.stats.max_depth},
                  {"wall_time_s", verdict.stats.wall_time_s},
                  {"model_variables", verdict.model_variables},
                  {"model_constraints", verdict.model_constraints}};
  if (verdict.counterexample) {
    const Counterexample& c = *verdict.counterexample;
    json perturbed = json::array();
    for (auto [r, col] : c.perturbed) perturbed.push_back({r, col});
    doc["counterexample"] = {{"alpha", c.alpha},
                             {"deviation", c.deviation},
                             {"perturbed", perturbed},
                             {"facet_flags", c.facet_flags},
                             {"violated_facets", c.report.violated_facets},
                             {"validated", c.validated},
                             {"argmax", argmax_json(c.report, ctx.grid_width)}};
  }
  if (verdict.rejected_witness) {
    doc["rejected_witness"] = {
        {"violates", verdict.rejected_witness->violates},
        {"argmax", argmax_json(*verdict.rejected_witness, ctx.grid_width)}};
  }
  if (ctx.oracle) {
    json o = oracle_json(*ctx.oracle);
    if (verdict.status != VerdictStatus::kInconclusive) {
      const bool found = ctx.oracle->outcome == OracleOutcome::kCounterexampleFound;
      // A sampled/grid violation contradicts Robust; enumeration must match
      // exactly.
      bool agrees = verdict.status == VerdictStatus::kUnknown ? true : !found;
      if (ctx.oracle->method == OracleMethod::kEnumeration) {
        agrees = found == (verdict.status == VerdictStatus::kUnknown);
      }
      o["agrees"] = agrees;
    }
    doc["oracle"] = std::move(o);
  }
  if (ctx.seed) doc["seed"] = *ctx.seed;
  return pretty(doc);
}

std::string pretty_json(std::string_view text) { return pretty(parse_json(text)); }

std::string oracle_report(const OracleReport& report, const std::string& instance) {
  json doc = {{"schema_version", kReportSchemaVersion},
              {"tool", "kpcert"},
              {"tool_version", kToolVersion},
              {"instance", instance},
              {"oracle", oracle_json(report)}};
  return pretty(doc);
}

}  // namespace kpcert
