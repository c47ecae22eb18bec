#include "kpcert/encode.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kpcert/error.hpp"

namespace kpcert {
namespace {

using lp::Relation;
using lp::Term;

const char* role_prefix(Role role) {
  switch (role) {
    case Role::kAlpha: return "alpha";
    case Role::kHeatmap: return "Z";
    case Role::kDeviation: return "dv";
    case Role::kFacetFlag: return "r";
    case Role::kIndicator: return "Delta";
    case Role::kSelected: return "Zhat";
    case Role::kExtracted: return "z";
  }
  return "?";
}

bool has_pixel_index(Role role) {
  return role == Role::kHeatmap || role == Role::kIndicator ||
         role == Role::kSelected;
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Shortest text that reads back to the same double.
std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t MilpModel::add_variable(VarKind kind, double lower, double upper,
                                    VarRole role) {
  if (kind == VarKind::kBinary) {
    lower = std::max(lower, 0.0);
    upper = std::min(upper, 1.0);
  }
  auto key = std::make_tuple(role.role, role.j, role.i);
  if (registry_.contains(key)) {
    throw std::logic_error("duplicate model variable " +
                           std::string(role_prefix(role.role)));
  }
  registry_.emplace(key, variables_.size());
  variables_.push_back(Variable{kind, lower, upper, role});
  return variables_.size() - 1;
}

void MilpModel::add_constraint(std::vector<Term> terms, Relation relation,
                               double rhs, std::string label) {
  for (const auto& t : terms) {
    if (t.var >= variables_.size()) {
      throw std::logic_error("constraint " + label + " references an undeclared variable");
    }
  }
  constraints_.push_back(Constraint{std::move(terms), relation, rhs, std::move(label)});
}

std::optional<std::size_t> MilpModel::find(Role role, int j, int i) const {
  auto it = registry_.find(std::make_tuple(role, j, i));
  if (it == registry_.end()) return std::nullopt;
  return it->second;
}

std::size_t MilpModel::at(Role role, int j, int i) const {
  auto v = find(role, j, i);
  if (!v) {
    throw std::out_of_range(std::string("no model variable ") + role_prefix(role) +
                            "_" + std::to_string(j) + "_" + std::to_string(i));
  }
  return *v;
}

std::string MilpModel::name(std::size_t var) const {
  const VarRole& r = variables_[var].role;
  std::string s = role_prefix(r.role);
  if (r.role == Role::kExtracted) return s + "_" + std::to_string(r.i);
  s += "_" + std::to_string(r.j);
  if (has_pixel_index(r.role)) s += "_" + std::to_string(r.i);
  return s;
}

lp::LpProblem MilpModel::relaxation() const {
  std::vector<double> lo;
  std::vector<double> hi;
  for (const auto& v : variables_) {
    lo.push_back(v.lower);
    hi.push_back(v.upper);
  }
  return relaxation(lo, hi);
}

lp::LpProblem MilpModel::relaxation(std::span<const double> lower,
                                    std::span<const double> upper) const {
  lp::LpProblem p;
  p.lower.assign(lower.begin(), lower.end());
  p.upper.assign(upper.begin(), upper.end());
  p.rows.reserve(constraints_.size());
  for (const auto& c : constraints_) p.add_row(c.terms, c.relation, c.rhs);
  return p;
}

double MilpModel::max_violation(std::span<const double> x) const {
  double worst = lp::max_violation(relaxation(), x);
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    if (variables_[v].kind != VarKind::kContinuous) {
      worst = std::max(worst, std::abs(x[v] - std::round(x[v])));
    }
  }
  return worst;
}

MilpModel build_milp(const ProblemInstance& inst, const IndexSets& sets,
                     const BoundsMatrix& bounds, std::span<const double> big_m,
                     const BuildOptions& options) {
  const auto& poly = inst.deviation_polytope;
  const auto& z = inst.reach_set;
  const std::size_t k = inst.keypoints;
  const int hw = static_cast<int>(inst.pixels());
  const int width = static_cast<int>(inst.width);

  if (sets.size() != k) {
    throw InputError("index sets cover " + std::to_string(sets.size()) +
                     " keypoints, instance has " + std::to_string(k));
  }
  if (big_m.size() != poly.num_facets()) {
    throw InputError("Big-M vector has " + std::to_string(big_m.size()) +
                     " entries, polytope has " +
                     std::to_string(poly.num_facets()) + " facets");
  }
  auto check_range = [&](const std::vector<int>& s, const char* what) {
    for (int j : s) {
      if (j < 1 || j > hw) {
        throw InputError(std::string(what) + " index " + std::to_string(j) +
                         " outside 1.." + std::to_string(hw));
      }
    }
  };
  for (const auto& s : sets) {
    if (s.in_bound.empty()) throw InputError("empty in-bound index set");
    check_range(s.in_bound, "in-bound");
    if (options.pruning) {
      if (s.pruned_in.empty() || s.pruned_out.empty()) {
        throw InputError("pruned index sets are not populated");
      }
      check_range(s.pruned_in, "pruned in-bound");
      check_range(s.pruned_out, "pruned out-of-bound");
    }
  }

  std::vector<int> all_pixels(hw);
  for (int j = 1; j <= hw; ++j) all_pixels[j - 1] = j;

  MilpModel model;

  // alpha_k in [-1, 1]
  std::vector<std::size_t> alpha;
  for (std::size_t g = 0; g < z.num_generators(); ++g) {
    alpha.push_back(model.add_variable(VarKind::kContinuous, -1.0, 1.0,
                                       {Role::kAlpha, int(g) + 1, 0}));
  }

  // Integer deviations confined to the image.
  IntegerBox box = deviation_box(inst);
  std::vector<std::size_t> dv;
  for (std::size_t t = 0; t < 2 * k; ++t) {
    dv.push_back(model.add_variable(VarKind::kInteger, box.lower[t], box.upper[t],
                                    {Role::kDeviation, int(t) + 1, 0}));
  }

  // Out-of-polytope disjunction.
  std::vector<std::size_t> r;
  for (std::size_t f = 0; f < poly.num_facets(); ++f) {
    r.push_back(model.add_variable(VarKind::kBinary, 0.0, 1.0,
                                   {Role::kFacetFlag, int(f) + 1, 0}));
  }
  {
    std::vector<Term> terms;
    for (auto v : r) terms.push_back({v, 1.0});
    model.add_constraint(std::move(terms), Relation::kGreaterEqual, 1.0, "facet_any");
  }
  for (std::size_t f = 0; f < poly.num_facets(); ++f) {
    // P_f dv - M_f r_f >= b_f + eps - M_f
    std::vector<Term> terms;
    for (std::size_t t = 0; t < 2 * k; ++t) {
      if (poly.a()[f][t] != 0.0) terms.push_back({dv[t], poly.a()[f][t]});
    }
    terms.push_back({r[f], -big_m[f]});
    model.add_constraint(std::move(terms), Relation::kGreaterEqual,
                         poly.b()[f] + inst.epsilon - big_m[f],
                         "facet_" + std::to_string(f + 1));
  }

  for (std::size_t i = 0; i < k; ++i) {
    const auto& s = sets[i];
    const int ch = int(i) + 1;
    const std::vector<int>& in_set = options.pruning ? s.pruned_in : s.in_bound;
    const std::vector<int>& out_set = options.pruning ? s.pruned_out : all_pixels;
    const std::vector<int> retained =
        options.pruning ? sorted_union(s.pruned_in, s.pruned_out) : all_pixels;

    // Z_{j,i} = C_{j,i} + sum_k alpha_k G_{k,j,i} on retained pixels.
    for (int j : retained) {
      std::size_t zv = model.add_variable(VarKind::kContinuous,
                                          bounds.lower(j - 1, i),
                                          bounds.upper(j - 1, i),
                                          {Role::kHeatmap, j, ch});
      std::vector<Term> terms{{zv, 1.0}};
      for (std::size_t g = 0; g < alpha.size(); ++g) {
        double coef = z.generator(g)(j - 1, i);
        if (coef != 0.0) terms.push_back({alpha[g], -coef});
      }
      model.add_constraint(std::move(terms), Relation::kEqual, z.center()(j - 1, i),
                           "zonotope_" + std::to_string(j) + "_" + std::to_string(ch));
    }

    // Dynamic indexing over the out-candidate pixels.
    double z_lo = std::numeric_limits<double>::infinity();
    double z_hi = -z_lo;
    std::vector<std::size_t> delta;
    std::vector<std::size_t> zhat;
    for (int j : out_set) {
      const double lo = bounds.lower(j - 1, i);
      const double hi = bounds.upper(j - 1, i);
      z_lo = std::min(z_lo, lo);
      z_hi = std::max(z_hi, hi);
      delta.push_back(model.add_variable(VarKind::kBinary, 0.0, 1.0,
                                         {Role::kIndicator, j, ch}));
      zhat.push_back(model.add_variable(VarKind::kContinuous, std::min(0.0, lo),
                                        std::max(0.0, hi),
                                        {Role::kSelected, j, ch}));
    }
    {
      std::vector<Term> one;
      std::vector<Term> link;
      for (std::size_t n = 0; n < delta.size(); ++n) {
        one.push_back({delta[n], 1.0});
        link.push_back({delta[n], -double(out_set[n])});
      }
      model.add_constraint(std::move(one), Relation::kEqual, 1.0,
                           "onehot_" + std::to_string(ch));
      // (v_r + dv_r - 1) W + (v_c + dv_c) = sum_j j Delta_{j,i}
      link.push_back({dv[2 * i], double(width)});
      link.push_back({dv[2 * i + 1], 1.0});
      const int base = flat_index(inst.ground_truth[2 * i],
                                  inst.ground_truth[2 * i + 1], inst.width);
      model.add_constraint(std::move(link), Relation::kEqual, -double(base),
                           "index_" + std::to_string(ch));
    }

    // Zhat_{j,i} = Delta_{j,i} ? Z_{j,i} : 0.
    for (std::size_t n = 0; n < out_set.size(); ++n) {
      const int j = out_set[n];
      const double lo = bounds.lower(j - 1, i);
      const double hi = bounds.upper(j - 1, i);
      const std::size_t zv = model.at(Role::kHeatmap, j, ch);
      const std::string tag = std::to_string(j) + "_" + std::to_string(ch);
      model.add_constraint({{zhat[n], 1.0}, {delta[n], -lo}},
                           Relation::kGreaterEqual, 0.0, "select_lo_" + tag);
      model.add_constraint({{zhat[n], 1.0}, {delta[n], -hi}},
                           Relation::kLessEqual, 0.0, "select_hi_" + tag);
      model.add_constraint({{zhat[n], 1.0}, {zv, -1.0}, {delta[n], -lo}},
                           Relation::kLessEqual, -lo, "link_lo_" + tag);
      model.add_constraint({{zhat[n], 1.0}, {zv, -1.0}, {delta[n], -hi}},
                           Relation::kGreaterEqual, -hi, "link_hi_" + tag);
    }

    // z_i = sum_j Zhat_{j,i}, and z_i dominates every in-bound location.
    std::size_t zi = model.add_variable(VarKind::kContinuous, z_lo, z_hi,
                                        {Role::kExtracted, 0, ch});
    {
      std::vector<Term> terms{{zi, 1.0}};
      for (auto v : zhat) terms.push_back({v, -1.0});
      model.add_constraint(std::move(terms), Relation::kEqual, 0.0,
                           "extract_" + std::to_string(ch));
    }
    for (int j : in_set) {
      const std::size_t zv = model.at(Role::kHeatmap, j, ch);
      model.add_constraint({{zi, 1.0}, {zv, -1.0}}, Relation::kGreaterEqual, 0.0,
                           "max_" + std::to_string(j) + "_" + std::to_string(ch));
    }
  }
  return model;
}

ValidationReport validate_heatmaps(const ProblemInstance& inst,
                                   const Grid& heatmaps, double tie_tol) {
  ValidationReport report;
  const std::size_t k = inst.keypoints;
  const int hw = static_cast<int>(inst.pixels());
  for (std::size_t i = 0; i < k; ++i) {
    ChannelArgmax ch;
    ch.max_value = heatmaps(0, i);
    for (int j = 2; j <= hw; ++j) ch.max_value = std::max(ch.max_value, heatmaps(j - 1, i));
    for (int j = 1; j <= hw; ++j) {
      if (heatmaps(j - 1, i) >= ch.max_value - tie_tol) ch.argmax.push_back(j);
    }
    report.channels.push_back(std::move(ch));
  }

  // Odometer over the argmax selections, lexicographic in channel order.
  std::vector<std::size_t> pick(k, 0);
  std::vector<int> dv(2 * k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) {
      auto [row, col] = pixel_of(report.channels[i].argmax[pick[i]], inst.width);
      dv[2 * i] = row - inst.ground_truth[2 * i];
      dv[2 * i + 1] = col - inst.ground_truth[2 * i + 1];
    }
    auto violated = inst.deviation_polytope.violated_facets(dv);
    if (!violated.empty()) {
      report.violates = true;
      report.deviation = dv;
      for (auto f : violated) report.violated_facets.push_back(f + 1);
      return report;
    }
    std::size_t c = k;
    while (c > 0) {
      --c;
      if (++pick[c] < report.channels[c].argmax.size()) break;
      pick[c] = 0;
      if (c == 0) return report;
    }
    if (k == 0) return report;
  }
}

ValidationReport validate_counterexample(const ProblemInstance& inst,
                                         const Counterexample& cex) {
  return validate_heatmaps(inst, cex.heatmaps, kAssignmentTol);
}

Counterexample decode_counterexample(const ProblemInstance& inst,
                                     const MilpModel& model,
                                     std::span<const double> assignment) {
  if (assignment.size() != model.num_variables()) {
    throw NumericalError("assignment length does not match the model");
  }
  double viol = model.max_violation(assignment);
  if (viol > kAssignmentTol) {
    throw NumericalError("assignment violates the model by " + std::to_string(viol));
  }
  Counterexample cex;
  for (std::size_t g = 0; g < inst.reach_set.num_generators(); ++g) {
    double a = assignment[model.at(Role::kAlpha, int(g) + 1)];
    cex.alpha.push_back(std::clamp(a, -1.0, 1.0));
  }
  for (std::size_t t = 0; t < 2 * inst.keypoints; ++t) {
    cex.deviation.push_back(
        static_cast<int>(std::lround(assignment[model.at(Role::kDeviation, int(t) + 1)])));
  }
  for (std::size_t f = 0; f < inst.deviation_polytope.num_facets(); ++f) {
    cex.facet_flags.push_back(
        static_cast<int>(std::lround(assignment[model.at(Role::kFacetFlag, int(f) + 1)])));
  }
  for (std::size_t i = 0; i < inst.keypoints; ++i) {
    cex.perturbed.emplace_back(inst.ground_truth[2 * i] + cex.deviation[2 * i],
                               inst.ground_truth[2 * i + 1] + cex.deviation[2 * i + 1]);
  }
  cex.heatmaps = sample_zonotope(inst.reach_set, cex.alpha);
  cex.report = validate_counterexample(inst, cex);
  cex.validated = cex.report.violates;
  return cex;
}

std::string export_lp(const MilpModel& model) {
  std::ostringstream os;
  const auto& vars = model.variables();
  auto term_text = [&](const Term& t, bool first) {
    std::string s;
    if (t.coef < 0) s = first ? "-" : " - ";
    else if (!first) s = " + ";
    s += format_number(std::abs(t.coef)) + " " + model.name(t.var);
    return s;
  };

  os << "\\ keypoint falsification model: " << vars.size() << " variables, "
     << model.constraints().size() << " constraints\n";
  os << "Minimize\n obj: 0\nSubject To\n";
  for (const auto& c : model.constraints()) {
    os << " " << c.label << ":";
    if (c.terms.empty()) os << " 0";
    for (std::size_t n = 0; n < c.terms.size(); ++n) {
      os << (n == 0 ? " " : "") << term_text(c.terms[n], n == 0);
    }
    switch (c.relation) {
      case Relation::kLessEqual: os << " <= "; break;
      case Relation::kGreaterEqual: os << " >= "; break;
      case Relation::kEqual: os << " = "; break;
    }
    os << format_number(c.rhs) << "\n";
  }
  os << "Bounds\n";
  for (std::size_t v = 0; v < vars.size(); ++v) {
    if (vars[v].kind == VarKind::kBinary) continue;
    os << " " << format_number(vars[v].lower) << " <= " << model.name(v)
       << " <= " << format_number(vars[v].upper) << "\n";
  }
  auto section = [&](const char* title, VarKind kind) {
    bool any = false;
    for (std::size_t v = 0; v < vars.size(); ++v) {
      if (vars[v].kind != kind) continue;
      if (!any) os << title << "\n";
      any = true;
      os << " " << model.name(v) << "\n";
    }
  };
  section("Generals", VarKind::kInteger);
  section("Binaries", VarKind::kBinary);
  os << "End\n";
  return os.str();
}

}  // namespace kpcert
