// patchbif — batch front end for the annular-patch bifurcation library.
//
// Subcommands:
//   bifpoints  radii b*_m where the m-fold stationary branch leaves the annulus
//   spectrum   per-mode dump of the linearized mode matrices at a fixed radius
//   branch     Newton continuation of the nontrivial branch, with contours
//   verify     named cross-module invariant checks with measured margins
//
// Every command writes one JSON document plus CSV side-files into the output
// directory; rows carry the config hash and module versions.  Identical
// configurations produce bit-identical files.
//
// Exit codes: 0 success, 1 invariant failure, 2 usage error, 3 non-convergence.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "patchbif/bifurcation.hpp"
#include "patchbif/continuation.hpp"
#include "patchbif/errors.hpp"
#include "patchbif/functional.hpp"
#include "patchbif/linops.hpp"
#include "patchbif/specfun.hpp"
#include "patchbif/version.hpp"

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace patchbif;

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNonconvergence = 3;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  double alpha = 0.5;
  std::vector<int> m_list{2, 3, 4, 5, 6, 7, 8};
  int J = 16;          // Fourier truncation of each boundary perturbation
  int depth = 10;      // graded-quadrature subdivision depth
  double newton_tol = 1e-10;
  double quad_tol = 1e-10;  // target quadrature accuracy; caps the depth
  std::string output_dir = "patchbif_out";
  std::uint64_t seed = 20260822ULL;
};

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::domain_error("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::domain_error("config file " + path + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw std::domain_error("config file " + path + ": expected a flat JSON object");
  }
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "m_list") cfg.m_list = value.get<std::vector<int>>();
      else if (key == "J") cfg.J = value.get<int>();
      else if (key == "depth") cfg.depth = value.get<int>();
      else if (key == "newton_tol") cfg.newton_tol = value.get<double>();
      else if (key == "quad_tol") cfg.quad_tol = value.get<double>();
      else if (key == "output_dir") cfg.output_dir = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw std::domain_error("config file " + path + ": unknown key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw std::domain_error("config file " + path + ": " + e.what());
  }
}

void validate_config(const RunConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 2.0)) {
    throw std::domain_error("config invariant violated: alpha must lie in (0,2), got " +
                            fmt_sci(cfg.alpha));
  }
  for (int m : cfg.m_list) {
    if (m < 2) {
      throw std::domain_error("config invariant violated: every m must be >= 2, got " +
                              std::to_string(m));
    }
  }
  if (cfg.J < 8) {
    throw std::domain_error("config invariant violated: J must be >= 8, got " +
                            std::to_string(cfg.J));
  }
  if (cfg.depth < 2 || cfg.depth > 14) {
    throw std::domain_error("config invariant violated: depth must lie in [2,14], got " +
                            std::to_string(cfg.depth));
  }
  if (!(cfg.newton_tol > 0.0)) {
    throw std::domain_error("config invariant violated: newton_tol must be > 0");
  }
  if (!(cfg.quad_tol > 0.0)) {
    throw std::domain_error("config invariant violated: quad_tol must be > 0");
  }
  if (cfg.output_dir.empty()) {
    throw std::domain_error("config invariant violated: output_dir must be nonempty");
  }
}

// quad_tol is a target quadrature accuracy: it sets the dyadic depth of the
// graded rule, the Gauss order per panel (the accuracy carrier: panels are
// sized in periods assuming order 16), and the trapezoid count. The default
// 1e-10 reproduces depth 10, order 16, 512 trapezoid nodes.
int effective_depth(const RunConfig& cfg) {
  const int from_tol =
      std::clamp(static_cast<int>(std::lround(-std::log10(cfg.quad_tol))), 2, 14);
  return std::min(cfg.depth, from_tol);
}

int effective_q(const RunConfig& cfg) {
  return std::clamp(
      static_cast<int>(std::lround(-1.6 * std::log10(cfg.quad_tol))), 4, 24);
}

int effective_trap(const RunConfig& cfg) {
  return std::max(
      64, static_cast<int>(std::lround(-51.2 * std::log10(cfg.quad_tol))));
}

// Full-precision, locale-independent decimal rendering for CSV cells.
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// FNV-1a over the numeric configuration (output location excluded: it does
// not affect any computed value).
std::string config_hash(const RunConfig& cfg) {
  std::string canon = "alpha=" + fmt17(cfg.alpha) + ";m=[";
  for (std::size_t i = 0; i < cfg.m_list.size(); ++i) {
    if (i) canon += ',';
    canon += std::to_string(cfg.m_list[i]);
  }
  canon += "];J=" + std::to_string(cfg.J) + ";depth=" + std::to_string(cfg.depth) +
           ";newton_tol=" + fmt17(cfg.newton_tol) + ";quad_tol=" + fmt17(cfg.quad_tol) +
           ";seed=" + std::to_string(cfg.seed);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// The output location is omitted: emitted documents are location-independent
// so identical numeric configurations produce bit-identical files.
json config_json(const RunConfig& cfg) {
  return json{{"alpha", cfg.alpha},      {"m_list", cfg.m_list},
              {"J", cfg.J},              {"depth", cfg.depth},
              {"newton_tol", cfg.newton_tol}, {"quad_tol", cfg.quad_tol},
              {"seed", cfg.seed}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct OutputSink {
  fs::path dir;
  explicit OutputSink(const RunConfig& cfg) : dir(cfg.output_dir) {
    fs::create_directories(dir);
  }
  void json_doc(const std::string& name, const json& doc, bool to_stdout) const {
    const std::string text = doc.dump(2) + "\n";
    write_text(dir / (name + ".json"), text);
    if (to_stdout) std::cout << text;
  }
  void csv(const std::string& name, const std::string& text) const {
    write_text(dir / (name + ".csv"), text);
  }
};

// ---------------------------------------------------------------------------
// bifpoints
// ---------------------------------------------------------------------------

int cmd_bifpoints(const RunConfig& cfg, bool to_stdout) {
  const std::string hash = config_hash(cfg);
  const std::string versions = module_versions();
  json rows = json::array();
  std::string csv = "m,alpha,b_star,residual,cert1,cert2,cert3,status,cfg_hash,versions\n";
  bool all_ok = true;

  for (int m : cfg.m_list) {
    json row{{"m", m}, {"alpha", cfg.alpha}};
    std::string line = std::to_string(m) + "," + fmt17(cfg.alpha) + ",";
    try {
      const BifurcationPoint bp = find_b_star(m, cfg.alpha);
      const bool certs = bp.certificate[0] && bp.certificate[1] && bp.certificate[2];
      row["b_star"] = bp.b_star;
      row["residual"] = bp.residual;
      row["bracket"] = json::array({bp.bracket_lo, bp.bracket_hi});
      row["kernel"] = json::array({bp.kernel[0], bp.kernel[1]});
      row["certificate"] = json::array(
          {bp.certificate[0], bp.certificate[1], bp.certificate[2]});
      row["status"] = certs ? "OK" : "CERT-FAIL";
      all_ok = all_ok && certs;
      line += fmt17(bp.b_star) + "," + fmt17(bp.residual) + "," +
              (bp.certificate[0] ? "1" : "0") + "," +
              (bp.certificate[1] ? "1" : "0") + "," +
              (bp.certificate[2] ? "1" : "0") + "," +
              (certs ? "OK" : "CERT-FAIL");
    } catch (const invariant_failure& e) {
      row["status"] = "NO-ROOT";
      row["note"] = e.what();
      all_ok = false;
      line += ",,,,,NO-ROOT";
    }
    rows.push_back(row);
    csv += line + "," + hash + "," + versions + "\n";
  }

  const json doc{{"command", "bifpoints"},
                 {"library_version", kLibraryVersion},
                 {"cfg_hash", hash},
                 {"versions", versions},
                 {"config", config_json(cfg)},
                 {"rows", rows}};
  const OutputSink sink(cfg);
  sink.json_doc("bifpoints", doc, to_stdout);
  sink.csv("bifpoints", csv);

  if (!to_stdout) {
    for (const auto& row : rows) {
      std::cout << "m=" << row["m"].get<int>() << "  status=" <<
          row["status"].get<std::string>();
      if (row.contains("b_star")) {
        std::cout << "  b*=" << fmt17(row["b_star"].get<double>());
      }
      std::cout << "\n";
    }
    std::cout << "bifpoints: " << rows.size() << " rows -> "
              << (sink.dir / "bifpoints.json").string() << "\n";
  }
  return all_ok ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

int cmd_spectrum(const RunConfig& cfg, double b, int nmax, bool to_stdout) {
  if (nmax < 1) throw std::domain_error("spectrum: --nmax must be >= 1");
  const Params p(cfg.alpha, b);
  const std::string hash = config_hash(cfg);
  const std::string versions = module_versions();

  json rows = json::array();
  std::string csv =
      "n,alpha,b,lambda_n,theta_n,m11,m12,m21,m22,det,delta,cfg_hash,versions\n";
  for (int n = 1; n <= nmax; ++n) {
    const double ln = lambda_n(n, p);
    const double th = theta_n(n, cfg.alpha);
    const ModeMatrix M = mode_matrix(n, p);
    const double dl = delta(n, p);
    rows.push_back(json{{"n", n},
                        {"lambda_n", ln},
                        {"theta_n", th},
                        {"m11", M.m11},
                        {"m12", M.m12},
                        {"m21", M.m21},
                        {"m22", M.m22},
                        {"det", M.det},
                        {"delta", dl}});
    csv += std::to_string(n) + "," + fmt17(cfg.alpha) + "," + fmt17(b) + "," +
           fmt17(ln) + "," + fmt17(th) + "," + fmt17(M.m11) + "," + fmt17(M.m12) +
           "," + fmt17(M.m21) + "," + fmt17(M.m22) + "," + fmt17(M.det) + "," +
           fmt17(dl) + "," + hash + "," + versions + "\n";
  }

  const json doc{{"command", "spectrum"},
                 {"library_version", kLibraryVersion},
                 {"cfg_hash", hash},
                 {"versions", versions},
                 {"config", config_json(cfg)},
                 {"b", b},
                 {"rows", rows}};
  const OutputSink sink(cfg);
  sink.json_doc("spectrum", doc, to_stdout);
  sink.csv("spectrum", csv);
  if (!to_stdout) {
    std::cout << "spectrum: " << nmax << " modes at alpha=" << fmt17(cfg.alpha)
              << " b=" << fmt17(b) << " -> "
              << (sink.dir / "spectrum.json").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// branch
// ---------------------------------------------------------------------------

int cmd_branch(const RunConfig& cfg, double s_max, int steps, bool to_stdout) {
  if (cfg.m_list.empty()) {
    throw std::domain_error("branch: no symmetry selected (empty m_list and no --m)");
  }
  if (!(s_max > 0.0)) throw std::domain_error("branch: --smax must be > 0");
  if (steps < 1) throw std::domain_error("branch: --steps must be >= 1");
  const int m = cfg.m_list.front();

  std::vector<double> svals(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    svals[static_cast<std::size_t>(k - 1)] = s_max * k / steps;
  }
  EvalGrid g = make_eval_grid(cfg.alpha, m, cfg.J, 0, effective_trap(cfg),
                              effective_depth(cfg), effective_q(cfg));
  NewtonSettings settings;
  settings.tol = cfg.newton_tol;
  const Branch br = trace_branch(m, cfg.alpha, svals, g, settings);

  const std::string hash = config_hash(cfg);
  const std::string versions = module_versions();
  json points = json::array();
  std::string csv = "m,alpha,s,b,newton_iters,residual,tail,cfg_hash,versions\n";
  const OutputSink sink(cfg);
  for (std::size_t i = 0; i < br.points.size(); ++i) {
    const BranchPoint& pt = br.points[i];
    points.push_back(json{{"s", pt.amplitude},
                          {"b", pt.state.b},
                          {"newton_iters", pt.newton_iters},
                          {"residual", pt.residual},
                          {"tail", pt.tail},
                          {"A", pt.state.R_pert.coeffs},
                          {"a", pt.state.r_pert.coeffs}});
    csv += std::to_string(m) + "," + fmt17(cfg.alpha) + "," + fmt17(pt.amplitude) +
           "," + fmt17(pt.state.b) + "," + std::to_string(pt.newton_iters) + "," +
           fmt17(pt.residual) + "," + fmt17(pt.tail) + "," + hash + "," + versions +
           "\n";

    // Contour samples for plotting: x, outer radius, inner radius.
    std::string contour = "x,outer_radius,inner_radius\n";
    const int nsamp = 256;
    for (int k = 0; k < nsamp; ++k) {
      const double x = 2.0 * kPi * k / nsamp;
      contour += fmt17(x) + "," + fmt17(pt.state.outer(x)) + "," +
                 fmt17(pt.state.inner(x)) + "\n";
    }
    char name[40];
    std::snprintf(name, sizeof name, "branch_contour_%03zu", i + 1);
    sink.csv(name, contour);
  }

  const json doc{{"command", "branch"},
                 {"library_version", kLibraryVersion},
                 {"cfg_hash", hash},
                 {"versions", versions},
                 {"config", config_json(cfg)},
                 {"m", m},
                 {"alpha", cfg.alpha},
                 {"origin",
                  json{{"b_star", br.origin.b_star},
                       {"residual", br.origin.residual},
                       {"bracket", json::array({br.origin.bracket_lo,
                                                br.origin.bracket_hi})},
                       {"kernel", json::array({br.origin.kernel[0],
                                               br.origin.kernel[1]})}}},
                 {"points", points},
                 {"warning", br.warning}};
  sink.json_doc("branch", doc, to_stdout);
  sink.csv("branch_points", csv);

  if (!to_stdout) {
    for (const BranchPoint& pt : br.points) {
      std::cout << "s=" << fmt17(pt.amplitude) << "  b=" << fmt17(pt.state.b)
                << "  iters=" << pt.newton_iters
                << "  residual=" << fmt_sci(pt.residual) << "\n";
    }
    std::cout << "branch: " << br.points.size() << " points -> "
              << (sink.dir / "branch.json").string() << "\n";
    if (!br.warning.empty()) std::cout << "warning: " << br.warning << "\n";
  }
  return br.warning.empty() ? kExitOk : kExitNonconvergence;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass;
  double margin;  // measured extremal quantity; NaN when the check threw
  double budget;
  std::string detail;
};

// Uniform draws rebuilt from raw engine bits so the stream depends only on
// the standardized mt19937_64 sequence.
double draw_unit(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}
double draw_symmetric(std::mt19937_64& eng) { return 2.0 * draw_unit(eng) - 1.0; }

int cmd_verify(const RunConfig& cfg, bool to_stdout) {
  std::vector<CheckResult> results;
  const int m0 = cfg.m_list.empty() ? 2 : cfg.m_list.front();
  const int depth = effective_depth(cfg);
  const int q = effective_q(cfg);
  const int trap = effective_trap(cfg);

  auto run_check = [&](const std::string& name, double budget, auto&& body) {
    CheckResult r{name, false, std::numeric_limits<double>::quiet_NaN(), budget, ""};
    try {
      body(r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = e.what();
    }
    results.push_back(std::move(r));
  };

  // Positivity of the mode multipliers and strict decay in the index.
  run_check("lambda-positive-decreasing", 0.0, [&](CheckResult& r) {
    double margin = std::numeric_limits<double>::infinity();
    for (double b : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Params p(cfg.alpha, b);
      double prev = lambda_n(1, p);
      margin = std::min(margin, prev);
      for (int n = 2; n <= 32; ++n) {
        const double cur = lambda_n(n, p);
        margin = std::min(margin, std::min(cur, prev - cur));
        prev = cur;
      }
    }
    r.margin = margin;
    r.pass = margin > 0.0;
  });

  // The angular multiplier at alpha = 1 against its odd harmonic sum.
  run_check("theta-harmonic-sum", 1e-12, [&](CheckResult& r) {
    double worst = 0.0;
    double sum = 0.0;
    for (int n = 2; n <= 64; ++n) {
      sum += 1.0 / (2.0 * n - 1.0);
      worst = std::max(worst, std::abs(theta_n(n, 1.0) - 2.0 / kPi * sum));
    }
    r.margin = worst;
    r.pass = worst <= r.budget;
  });

  // The n = 1 mode matrix is singular at every radius.
  run_check("mode-one-degenerate", 1e-13, [&](CheckResult& r) {
    double worst = 0.0;
    for (double b : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Params p(cfg.alpha, b);
      const double l1 = lambda_n(1, p);
      worst = std::max(worst,
                       std::abs(mode_matrix(1, p).det) / (b * b * b * l1 * l1));
    }
    r.margin = worst;
    r.pass = worst <= r.budget;
  });

  // Expanded determinant against the cofactor route.
  run_check("determinant-route-agreement", 1e-12, [&](CheckResult& r) {
    double worst = 0.0;
    for (int n : {2, 3, 5, 8, 13, 21}) {
      for (double b : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const Params p(cfg.alpha, b);
        const double expanded = delta(n, p);
        const double cofactor = mode_matrix(n, p).det;
        const double scale = std::max(std::abs(expanded), 1e-300);
        worst = std::max(worst, std::abs(expanded - cofactor) / scale);
      }
    }
    r.margin = worst;
    r.pass = worst <= r.budget;
  });

  // Certified roots for every requested symmetry.
  std::vector<BifurcationPoint> roots;
  run_check("bifurcation-roots-certified", 1e-12, [&](CheckResult& r) {
    double worst = 0.0;
    bool certs = true;
    for (int m : cfg.m_list) {
      const BifurcationPoint bp = find_b_star(m, cfg.alpha);
      const Params p(cfg.alpha, bp.b_star);
      const double scale =
          theta_n(m, cfg.alpha) * std::max(lambda_n(1, p), 1.0);
      worst = std::max(worst, bp.residual / std::max(scale, 1e-300));
      certs = certs && bp.certificate[0] && bp.certificate[1] && bp.certificate[2];
      roots.push_back(bp);
    }
    r.margin = worst;
    r.pass = certs && worst <= r.budget;
    if (!certs) r.detail = "certificate chain failed";
  });

  // The radii increase strictly with the symmetry.
  run_check("bifurcation-radii-increasing", 0.0, [&](CheckResult& r) {
    if (roots.size() != cfg.m_list.size()) {
      throw invariant_failure("roots unavailable");
    }
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < roots.size(); ++i) {
      margin = std::min(margin, roots[i].b_star - roots[i - 1].b_star);
    }
    r.margin = margin;
    r.pass = roots.size() < 2 || margin > 0.0;
    if (roots.size() < 2) r.margin = 0.0;
  });

  // Crossing derivative misses the range of the singular matrix.
  run_check("transversality-nondegenerate", 1e-6, [&](CheckResult& r) {
    if (roots.empty()) throw invariant_failure("roots unavailable");
    double margin = std::numeric_limits<double>::infinity();
    for (const BifurcationPoint& bp : roots) {
      const TransversalityData td = transversality(bp.m, bp.b_star, cfg.alpha);
      const double num = std::abs(td.w[0] * td.w1[0] + td.w[1] * td.w1[1]);
      const double den = std::hypot(td.w[0], td.w[1]) *
                         std::hypot(td.w1[0], td.w1[1]);
      margin = std::min(margin, num / den);
    }
    r.margin = margin;
    r.pass = margin > r.budget;
  });

  // The unperturbed annulus is stationary.
  run_check("annulus-stationarity", 1e-10, [&](CheckResult& r) {
    double worst = 0.0;
    for (double b : {0.3, 0.6}) {
      EvalGrid g = make_eval_grid(cfg.alpha, m0, cfg.J, 0, trap, depth, q);
      const PatchState a(cfg.alpha, b, FourierCosine(m0, {}),
                         FourierCosine(m0, {}));
      const FPair f = eval_F(a, g);
      worst = std::max(worst, std::max(f.F1.sup_residual, f.F2.sup_residual));
    }
    r.margin = worst;
    r.pass = worst <= r.budget;
  });

  // Explicit boundary linearization against central differences at random
  // admissible states. Differentiation commutes exactly with quadrature on a
  // shared rule, so the finite-difference route runs on a refined grid: the
  // comparison then certifies the quadrature accuracy of the explicit route,
  // and a degraded quad_tol makes this check fail.
  run_check("linearization-agreement", 1e-6, [&](CheckResult& r) {
    std::mt19937_64 eng(cfg.seed);
    const int J = 4;
    EvalGrid g = make_eval_grid(cfg.alpha, m0, J, 0, trap, depth, q);
    EvalGrid g_ref = make_eval_grid(cfg.alpha, m0, J, 0, std::max(1024, 2 * trap),
                                    std::min(depth + 2, 14), std::min(q + 8, 32));
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const double b = 0.35 + 0.2 * draw_unit(eng);
      std::vector<double> A(J), a(J), H(J), h(J);
      for (int j = 0; j < J; ++j) {
        const double sc = 1e-3 / ((j + 1.0) * (j + 1.0));
        A[static_cast<std::size_t>(j)] = sc * draw_symmetric(eng);
        a[static_cast<std::size_t>(j)] = sc * draw_symmetric(eng);
        H[static_cast<std::size_t>(j)] = draw_symmetric(eng) / ((j + 1.0) * (j + 1.0));
        h[static_cast<std::size_t>(j)] = draw_symmetric(eng) / ((j + 1.0) * (j + 1.0));
      }
      const PatchState s(cfg.alpha, b, FourierCosine(m0, A), FourierCosine(m0, a));
      const FPair expl = eval_DF(s, FourierCosine(m0, H), FourierCosine(m0, h), g);
      const double step = 1e-5;
      auto shifted = [&](double t) {
        std::vector<double> Ap(A), ap(a);
        for (int j = 0; j < J; ++j) {
          Ap[static_cast<std::size_t>(j)] += t * H[static_cast<std::size_t>(j)];
          ap[static_cast<std::size_t>(j)] += t * h[static_cast<std::size_t>(j)];
        }
        return eval_F(PatchState(cfg.alpha, b, FourierCosine(m0, Ap),
                                 FourierCosine(m0, ap)), g_ref);
      };
      const FPair fp = shifted(step);
      const FPair fm = shifted(-step);
      double scale = 1e-10;
      for (double v : expl.F1.coeffs) scale = std::max(scale, std::abs(v));
      for (double v : expl.F2.coeffs) scale = std::max(scale, std::abs(v));
      for (std::size_t i = 0; i < expl.F1.coeffs.size(); ++i) {
        const double fd = (fp.F1.coeffs[i] - fm.F1.coeffs[i]) / (2.0 * step);
        worst = std::max(worst, std::abs(fd - expl.F1.coeffs[i]) / scale);
      }
      for (std::size_t i = 0; i < expl.F2.coeffs.size(); ++i) {
        const double fd = (fp.F2.coeffs[i] - fm.F2.coeffs[i]) / (2.0 * step);
        worst = std::max(worst, std::abs(fd - expl.F2.coeffs[i]) / scale);
      }
    }
    r.margin = worst;
    r.pass = worst <= r.budget;
  });

  // One short pinned solve hangs together with its bifurcation point.
  run_check("branch-root-consistency", 1e-9, [&](CheckResult& r) {
    const BifurcationPoint bp = find_b_star(m0, cfg.alpha);
    EvalGrid g = make_eval_grid(cfg.alpha, m0, cfg.J, 0, trap, depth, q);
    NewtonSettings settings;
    settings.tol = cfg.newton_tol;
    const BranchPoint pt =
        newton_solve(initial_guess(bp, 1e-4, cfg.J), 1e-4, g, settings);
    r.margin = pt.residual;
    // The admissible drift of b off b* at s = 1e-4 is bounded by the branch
    // curvature; the strongest observed bending (alpha = 0.5, m = 2) moves b
    // by ~8e-4.
    r.pass = pt.residual < r.budget && std::abs(pt.state.b - bp.b_star) < 1e-2;
    r.detail = "b drift " + fmt_sci(std::abs(pt.state.b - bp.b_star));
  });

  // Report.
  const std::string hash = config_hash(cfg);
  const std::string versions = module_versions();
  json checks = json::array();
  std::string csv = "name,pass,margin,budget,cfg_hash,versions\n";
  bool all_pass = true;
  for (const CheckResult& r : results) {
    all_pass = all_pass && r.pass;
    json row{{"name", r.name}, {"pass", r.pass}, {"margin", r.margin},
             {"budget", r.budget}};
    if (!r.detail.empty()) row["detail"] = r.detail;
    checks.push_back(row);
    csv += r.name + "," + (r.pass ? "1" : "0") + "," + fmt17(r.margin) + "," +
           fmt17(r.budget) + "," + hash + "," + versions + "\n";
  }
  const json doc{{"command", "verify"},
                 {"library_version", kLibraryVersion},
                 {"cfg_hash", hash},
                 {"versions", versions},
                 {"config", config_json(cfg)},
                 {"checks", checks},
                 {"all_pass", all_pass}};
  const OutputSink sink(cfg);
  sink.json_doc("verify", doc, to_stdout);
  sink.csv("verify", csv);

  if (!to_stdout) {
    for (const CheckResult& r : results) {
      std::cout << (r.pass ? "PASS " : "FAIL ") << r.name
                << "  margin=" << fmt_sci(r.margin)
                << "  budget=" << fmt_sci(r.budget);
      if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
      std::cout << "\n";
    }
    std::cout << "verify: " << (all_pass ? "all checks passed" : "FAILURES present")
              << " -> " << (sink.dir / "verify.json").string() << "\n";
  }
  return all_pass ? kExitOk : kExitInvariant;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{
      "patchbif: bifurcation radii, mode spectra, and nontrivial stationary "
      "branches of m-fold annular patches"};
  app.require_subcommand(1);
  app.footer(
      "Config file: flat JSON with keys alpha, m_list, J, depth, newton_tol,\n"
      "quad_tol, output_dir, seed; command-line flags override file values.\n"
      "Environment: PATCHBIF_OUT overrides the output directory (flags win).\n"
      "Exit codes: 0 success, 1 invariant failure, 2 usage error,\n"
      "3 numerical non-convergence.");

  std::string config_path;
  double alpha_flag = 0.0;
  std::vector<int> m_flag;
  std::string out_flag;
  double tol_flag = 0.0;
  bool json_flag = false;

  auto* opt_config = app.add_option("--config", config_path,
                                    "Flat JSON configuration file");
  auto* opt_alpha = app.add_option("--alpha", alpha_flag,
                                   "Transport exponent in (0,2)");
  auto* opt_m = app.add_option("--m", m_flag,
                               "Symmetry list override (repeatable or comma-"
                               "separated)")->delimiter(',');
  auto* opt_out = app.add_option("--out", out_flag, "Output directory");
  auto* opt_tol = app.add_option("--tol", tol_flag,
                                 "Newton convergence tolerance override");
  app.add_flag("--json", json_flag,
               "Print the command's JSON document to stdout");

  auto* sc_bif = app.add_subcommand(
      "bifpoints", "Certified bifurcation radii b*_m for each symmetry");
  sc_bif->fallthrough();

  double b_flag = 0.0;
  int nmax_flag = 64;
  auto* sc_spec = app.add_subcommand(
      "spectrum", "Per-mode multipliers, mode matrices, and determinants");
  sc_spec->fallthrough();
  sc_spec->add_option("--b", b_flag, "Interior radius in (0,1)")->required();
  sc_spec->add_option("--nmax", nmax_flag, "Highest mode index")
      ->capture_default_str();

  double smax_flag = 1e-3;
  int steps_flag = 10;
  auto* sc_branch = app.add_subcommand(
      "branch", "Newton continuation of the nontrivial branch off the annulus");
  sc_branch->fallthrough();
  sc_branch->add_option("--smax", smax_flag, "Largest pinned amplitude")
      ->capture_default_str();
  sc_branch->add_option("--steps", steps_flag, "Number of amplitude steps")
      ->capture_default_str();

  auto* sc_verify = app.add_subcommand(
      "verify", "Cross-module invariant checks with measured margins");
  sc_verify->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (*opt_config) load_config_file(cfg, config_path);
    if (*opt_alpha) cfg.alpha = alpha_flag;
    if (*opt_m) cfg.m_list = m_flag;
    if (*opt_tol) cfg.newton_tol = tol_flag;
    if (*opt_out) {
      cfg.output_dir = out_flag;
    } else if (const char* env = std::getenv("PATCHBIF_OUT"); env && *env) {
      cfg.output_dir = env;
    }
    validate_config(cfg);

    if (sc_bif->parsed()) return cmd_bifpoints(cfg, json_flag);
    if (sc_spec->parsed()) return cmd_spectrum(cfg, b_flag, nmax_flag, json_flag);
    if (sc_branch->parsed()) return cmd_branch(cfg, smax_flag, steps_flag, json_flag);
    if (sc_verify->parsed()) return cmd_verify(cfg, json_flag);
    std::cerr << "error: no subcommand selected\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nonconvergence_error& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return kExitNonconvergence;
  } catch (const invariant_failure& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const accuracy_error& e) {
    std::cerr << "accuracy failure: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
}
