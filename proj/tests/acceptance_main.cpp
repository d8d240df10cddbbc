// Acceptance suite: ten criteria covering the annulus fixed point, the
// mode-matrix linearization, certified bifurcation radii, the planar-vortex
// limit, spectral monotonicity, determinant asymptotics, transversality,
// the hypergeometric identity battery, and branch continuation.  Prints one
// pass/fail line per criterion with the measured margin and the pinned
// budget; exits 0 only if every criterion passes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "patchbif/bifurcation.hpp"
#include "patchbif/continuation.hpp"
#include "patchbif/functional.hpp"
#include "patchbif/linops.hpp"
#include "patchbif/specfun.hpp"
#include "reference_values.hpp"

using namespace patchbif;

namespace {

constexpr std::uint64_t kSeed = 20260822ULL;

struct Outcome {
  double measured = 0.0;  // worst observed value of the criterion's quantity
  double budget = 0.0;    // pinned acceptance bound on that quantity
  bool pass = false;
  std::string note;
};

double uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1p-53;
}

// Least-squares slope of log|y| against log(x).
double log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(xs.size());
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(xs[i]), ly = std::log(std::abs(ys[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> stack_coeffs(const FPair& f) {
  std::vector<double> out = f.F1.coeffs;
  out.insert(out.end(), f.F2.coeffs.begin(), f.F2.coeffs.end());
  return out;
}

// base + t * dir, zero-padded to len coefficients.
std::vector<double> padded(const std::vector<double>& base,
                           const std::vector<double>& dir, double t,
                           std::size_t len) {
  std::vector<double> out(len, 0.0);
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i];
  for (std::size_t i = 0; i < dir.size(); ++i) out[i] += t * dir[i];
  return out;
}

PatchState annulus(double alpha, double b, int m) {
  return PatchState(alpha, b, FourierCosine(m, {}), FourierCosine(m, {}));
}

// --------------------------------------------------------------------------
// 1. The unperturbed annulus is stationary at every admissible radius.
Outcome annulus_stationarity() {
  Outcome out;
  out.budget = 1e-10;
  for (double alpha : {0.25, 0.5, 1.0, 1.5, 1.75}) {
    const EvalGrid g = make_eval_grid(alpha, 2, 8);
    for (int i = 1; i <= 9; ++i) {
      const double b = 0.1 * i;
      const FPair f = eval_F(annulus(alpha, b, 2), g);
      out.measured = std::max(
          out.measured, std::max(f.F1.sup_residual, f.F2.sup_residual));
    }
  }
  out.pass = out.measured < out.budget;
  out.note = "sup|F| over 5 exponents x 9 radii";
  return out;
}

// --------------------------------------------------------------------------
// 2. The linearization at the annulus acts mode-by-mode as -n * M_n.
Outcome mode_matrix_linearization() {
  Outcome out;
  out.budget = 1e-8;
  const struct {
    double b, alpha;
  } pts[] = {{0.3, 0.25}, {0.5, 0.5},  {0.7, 0.75}, {0.2, 1.0},  {0.382, 1.0},
             {0.6, 1.0},  {0.456, 1.5}, {0.6, 1.75}, {0.3, 1.25}};
  const int J = 16;
  const int modes[] = {2, 3, 4, 8, 16};
  for (const auto& pt : pts) {
    const EvalGrid g = make_eval_grid(pt.alpha, 1, J);
    const PatchState s = annulus(pt.alpha, pt.b, 1);
    for (int n : modes) {
      std::vector<double> e(static_cast<std::size_t>(n), 0.0);
      e.back() = 1.0;
      const ModeMatrix mm = mode_matrix(n, Params(pt.alpha, pt.b));
      const FPair dH = eval_DF(s, FourierCosine(1, e), FourierCosine(1, {}), g);
      const FPair dh = eval_DF(s, FourierCosine(1, {}), FourierCosine(1, e), g);
      for (int i = 1; i <= J; ++i) {
        const std::size_t r = static_cast<std::size_t>(i - 1);
        const double w11 = (i == n) ? -n * mm.m11 : 0.0;
        const double w21 = (i == n) ? -n * mm.m21 : 0.0;
        const double w12 = (i == n) ? -n * mm.m12 : 0.0;
        const double w22 = (i == n) ? -n * mm.m22 : 0.0;
        out.measured = std::max(
            {out.measured, std::abs(dH.F1.coeffs[r] - w11),
             std::abs(dH.F2.coeffs[r] - w21), std::abs(dh.F1.coeffs[r] - w12),
             std::abs(dh.F2.coeffs[r] - w22)});
      }
    }
  }
  out.pass = out.measured < out.budget;
  out.note = "9 pinned (b,alpha) x modes {2,3,4,8,16}";
  return out;
}

// --------------------------------------------------------------------------
// 3. The explicit derivative matches Richardson-extrapolated differences at
//    randomized admissible states.
Outcome derivative_vs_differences() {
  Outcome out;
  out.budget = 1e-6;
  std::mt19937_64 eng(kSeed);
  const int J = 4;
  const std::size_t len = static_cast<std::size_t>(J);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = 0.25 + 1.5 * uniform(eng);
    const double b = 0.3 + 0.35 * uniform(eng);
    const int m = 2 + static_cast<int>(2.0 * uniform(eng)) % 2;
    auto draw = [&](double scale) {
      std::vector<double> v(len);
      for (std::size_t j = 0; j < len; ++j) {
        v[j] = scale * (2.0 * uniform(eng) - 1.0) /
               static_cast<double>((j + 1) * (j + 1));
      }
      return v;
    };
    const std::vector<double> A = draw(1e-3), a = draw(1e-3);
    const std::vector<double> H = draw(1e-3), h = draw(1e-3);
    const EvalGrid g = make_eval_grid(alpha, m, J);
    const PatchState s(alpha, b, FourierCosine(m, padded(A, {}, 0, len)),
                       FourierCosine(m, padded(a, {}, 0, len)));
    const std::vector<double> got = stack_coeffs(
        eval_DF(s, FourierCosine(m, padded(H, {}, 0, len)),
                FourierCosine(m, padded(h, {}, 0, len)), g));

    auto f_at = [&](double t) {
      const PatchState st(alpha, b, FourierCosine(m, padded(A, H, t, len)),
                          FourierCosine(m, padded(a, h, t, len)));
      return stack_coeffs(eval_F(st, g));
    };
    auto central = [&](double t) {
      const std::vector<double> p = f_at(t), q = f_at(-t);
      std::vector<double> d(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) d[i] = (p[i] - q[i]) / (2 * t);
      return d;
    };
    const double t0 = 1e-5;
    const std::vector<double> d1 = central(t0), d2 = central(0.5 * t0);
    double scale = 1e-10;
    for (double v : got) scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double fd = (4.0 * d2[i] - d1[i]) / 3.0;
      worst = std::max(worst, std::abs(got[i] - fd));
    }
    out.measured = std::max(out.measured, worst / scale);
  }
  out.pass = out.measured < out.budget;
  out.note = "20 seeded random states, relative sup";
  return out;
}

// --------------------------------------------------------------------------
// 4. Certified bifurcation radii across the full symmetry/exponent matrix.
Outcome bifurcation_radii_table() {
  Outcome out;
  out.budget = 1e-10;
  for (int i = 0; i < 5; ++i) {
    const double al = refvals::kAlphas[i];
    double prev = 0.0;
    for (int j = 0; j < 7; ++j) {
      const int m = j + 2;
      const BifurcationPoint bp = find_b_star(m, al, 1e-12);
      out.measured =
          std::max(out.measured, std::abs(bp.b_star - refvals::kBStar[i][j]));
      const double scale = theta_n(m, al) * lambda_n(1, Params(al, bp.b_star));
      if (!(bp.certificate[0] && bp.certificate[1] && bp.certificate[2]) ||
          bp.residual > 1e-12 * scale || bp.bracket_hi - bp.bracket_lo > 1e-12 ||
          std::abs(std::hypot(bp.kernel[0], bp.kernel[1]) - 1.0) > 1e-14 ||
          !(bp.kernel[0] * bp.kernel[1] < 0.0) || !(bp.b_star > prev)) {
        out.pass = false;
        out.note = "certificate chain broken at m=" + std::to_string(m) +
                   ", alpha=" + std::to_string(al);
        return out;
      }
      prev = bp.b_star;

      // The scan sees exactly one crossing of the upper branch.
      const BifurcationScan scan = scan_determinant(m, al, 400);
      int crossings = 0;
      for (std::size_t k = 1; k < scan.grid_b.size(); ++k) {
        const double g0 = scan.theta_m - scan.q_plus[k - 1];
        const double g1 = scan.theta_m - scan.q_plus[k];
        if (g0 * g1 < 0.0) ++crossings;
      }
      if (crossings != 1) {
        out.pass = false;
        out.note = "crossing count " + std::to_string(crossings) +
                   " at m=" + std::to_string(m) + ", alpha=" + std::to_string(al);
        return out;
      }
    }
  }
  out.pass = out.measured < out.budget;
  out.note = "35 roots vs frozen references; certificates + single crossing";
  return out;
}

// --------------------------------------------------------------------------
// 5. The planar-vortex limit: closed-form determinant, positivity, no roots.
Outcome planar_vortex_limit() {
  Outcome out;
  out.budget = 1e-4;
  for (int m = 2; m <= 8; ++m) {
    bool threw = false;
    try {
      find_b_star(m, 1e-6);
    } catch (const invariant_failure&) {
      threw = true;
    }
    if (!threw) {
      out.pass = false;
      out.note = "root reported at vanishing exponent for m=" + std::to_string(m);
      return out;
    }
  }
  double det_err = 0.0;
  for (int m = 2; m <= 8; ++m) {
    for (int i = 1; i <= 9; ++i) {
      const double b = 0.1 * i;
      const ModeMatrix lim = euler_matrix(m, b);
      double tail = 0.0;
      for (int k = 0; k < m; ++k) tail += std::pow(b, 2 * k) - 1.0;
      const double closed = b * (b * b - 1.0) / (4.0 * m * m) * tail;
      det_err = std::max(det_err, std::abs(lim.det - closed));
      if (!(lim.det > 0.0)) {
        out.pass = false;
        out.note = "limit determinant not positive at m=" + std::to_string(m);
        return out;
      }
    }
  }
  if (det_err > 1e-12 ||
      std::abs(euler_matrix(2, 0.5).det - 0.017578125) > 1e-12) {
    out.pass = false;
    out.note = "closed-form determinant mismatch " + std::to_string(det_err);
    return out;
  }
  // Entrywise convergence of the mode matrices to the limit.
  for (int n : {2, 3, 5}) {
    for (double b : {0.3, 0.5, 0.7}) {
      const ModeMatrix lim = euler_matrix(n, b);
      const ModeMatrix M = mode_matrix(n, Params(1e-6, b));
      out.measured = std::max({out.measured, std::abs(M.m11 - lim.m11),
                               std::abs(M.m12 - lim.m12),
                               std::abs(M.m21 - lim.m21),
                               std::abs(M.m22 - lim.m22)});
    }
  }
  out.pass = out.measured < out.budget;
  out.note = "rootless for m=2..8; entrywise limit agreement";
  return out;
}

// --------------------------------------------------------------------------
// 6. Spectral monotonicity: positive decreasing multipliers, a single upper-
//    branch crossing, an increasing scaled branch, lower branch below theta.
Outcome spectral_monotonicity() {
  Outcome out;
  out.budget = 0.0;
  out.measured = 1e300;  // smallest margin among the strict inequalities
  for (double al : {0.25, 0.5, 1.0, 1.5, 1.75}) {
    for (double b : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Params p(al, b);
      double prev = lambda_n(1, p);
      if (!(prev > 0.0)) { out.pass = false; out.note = "multiplier sign"; return out; }
      for (int n = 2; n <= 32; ++n) {
        const double cur = lambda_n(n, p);
        out.measured = std::min(out.measured, prev - cur);
        if (!(cur > 0.0) || !(cur < prev)) {
          out.pass = false;
          out.note = "multiplier order fails at n=" + std::to_string(n);
          return out;
        }
        prev = cur;
      }
    }
  }
  for (double al : {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75}) {
    for (int m = 2; m <= 10; ++m) {
      const double th = theta_n(m, al);
      int sign_changes = 0;
      double prev_g = 0.0, prev_qt = -1e300;
      for (int i = 0; i < 200; ++i) {
        const double b = 0.001 + (0.999 - 0.001) * i / 199.0;
        const Params p(al, b);
        const QBranches q = q_branches(m, p);
        const double g = th - q.q_plus;
        if (i > 0 && g * prev_g < 0.0) ++sign_changes;
        prev_g = g;
        const double qt = q.q_plus / (lambda_n(1, p) * std::pow(b, al));
        if (qt < prev_qt - 1e-12 * std::max(1.0, std::abs(qt))) {
          out.pass = false;
          out.note = "scaled upper branch not increasing";
          return out;
        }
        prev_qt = qt;
        if (!(q.q_minus < th)) {
          out.pass = false;
          out.note = "lower branch reaches theta";
          return out;
        }
      }
      if (sign_changes != 1) {
        out.pass = false;
        out.note = "crossing count " + std::to_string(sign_changes);
        return out;
      }
    }
  }
  out.pass = out.measured > out.budget;
  out.note = "min multiplier gap; crossings and branch order hold";
  return out;
}

// --------------------------------------------------------------------------
// 7. Determinant asymptotics in the three exponent regimes.
Outcome determinant_asymptotics() {
  Outcome out;
  out.budget = 0.15;  // worst of the three relative agreements
  {
    const Params p(0.5, 0.5);
    const AsymptoticCoefficients a = delta_asymptotics(p);
    std::vector<double> ns, devs;
    for (int n : {64, 128, 256, 512}) {
      ns.push_back(n);
      devs.push_back(std::abs(delta(n, p) - a.mu));
    }
    const double slope = -log_slope(ns, devs);
    if (!(slope > 0.35 && slope < 0.65)) {
      out.pass = false;
      out.note = "subcritical deviation slope " + std::to_string(slope);
      return out;
    }
  }
  {
    const Params p(1.5, 0.1);
    const AsymptoticCoefficients a = delta_asymptotics(p);
    const double ratio = delta(512, p) * std::pow(512.0, 2.0 - 2.0 * a.alpha);
    const double rel = std::abs(ratio - a.p) / std::abs(a.p);
    out.measured = std::max(out.measured, rel);
    if (rel > 0.10) {
      out.pass = false;
      out.note = "supercritical power law off by " + std::to_string(rel);
      return out;
    }
  }
  {
    const Params p(1.0, 0.2);
    const AsymptoticCoefficients a = delta_asymptotics(p);
    const double ratio = delta(512, p) / std::pow(std::log(512.0), 2);
    const double rel = std::abs(ratio - a.mu) / std::abs(a.mu);
    out.measured = std::max(out.measured, rel);
    if (rel > 0.15) {
      out.pass = false;
      out.note = "critical log-squared law off by " + std::to_string(rel);
      return out;
    }
  }
  out.pass = true;
  out.note = "decay slope, power law, log-squared law";
  return out;
}

// --------------------------------------------------------------------------
// 8. Transversality holds at every certified root.
Outcome transversality_at_roots() {
  Outcome out;
  out.budget = 1e-6;
  out.measured = 1e300;  // smallest |cos| between w and w1
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) {
      const TransversalityData t =
          transversality(j + 2, refvals::kBStar[i][j], refvals::kAlphas[i]);
      const double dot = t.w[0] * t.w1[0] + t.w[1] * t.w1[1];
      const double cosine =
          std::abs(dot) / (std::hypot(t.w[0], t.w[1]) *
                           std::hypot(t.w1[0], t.w1[1]));
      out.measured = std::min(out.measured, cosine);
    }
  }
  out.pass = out.measured > out.budget;
  out.note = "min |cos(w, w1)| over all 35 roots";
  return out;
}

// --------------------------------------------------------------------------
// 9. Hypergeometric identity battery at production argument patterns.
Outcome hypergeometric_identities() {
  Outcome out;
  out.budget = 1e-8;
  std::mt19937_64 eng(kSeed);
  for (int trial = 0; trial < 1000; ++trial) {
    const double alpha = 0.05 + 1.9 * uniform(eng);
    const int n = 1 + static_cast<int>(64.0 * uniform(eng));
    const double b = 0.05 + 0.9 * uniform(eng);
    const IdentityReport rep =
        identity_suite(alpha / 2.0, n + alpha / 2.0, n + 1.0, b * b);
    out.measured = std::max(out.measured, rep.max_residual);
  }
  out.pass = out.measured < out.budget;
  out.note = "1000 seeded draws of the multiplier argument pattern";
  return out;
}

// --------------------------------------------------------------------------
// 10. Nontrivial branches: gates, tangency at small amplitude, and refined-
//     grid stationarity.
Outcome branch_continuation() {
  Outcome out;
  out.budget = 1e-8;  // refined-grid stationarity bound
  const struct {
    int m;
    double alpha;
  } runs[] = {{2, 1.0}, {3, 0.5}, {2, 1.5}};
  const int J = 16;
  std::vector<double> svals(10);
  for (int k = 1; k <= 10; ++k) svals[static_cast<std::size_t>(k - 1)] = 1e-4 * k;
  double worst_tangency = 0.0;
  for (const auto& run : runs) {
    const EvalGrid g = make_eval_grid(run.alpha, run.m, J);
    const Branch br = trace_branch(run.m, run.alpha, svals, g);
    if (!br.warning.empty() || br.points.size() != svals.size()) {
      out.pass = false;
      out.note = "trace stopped early: " + br.warning;
      return out;
    }
    for (const BranchPoint& pt : br.points) {
      if (!(pt.residual < 1e-9) ||
          !(pt.tail <= 1e-8 * std::abs(pt.amplitude))) {
        out.pass = false;
        out.note = "point gates fail at s=" + std::to_string(pt.amplitude);
        return out;
      }
      out.measured = std::max(out.measured, stationarity_check(pt, g));
    }
    // At the smallest amplitude the state follows the kernel direction:
    // normalized cross product of (A_1, a_1) with the kernel, i.e. the sine
    // of the angle between them (scale-free even for near-vertical kernels).
    const BranchPoint& first = br.points.front();
    const double A1 = first.state.R_pert.coeffs[0];
    const double a1 = first.state.r_pert.coeffs[0];
    const double tangency =
        std::abs(A1 * br.origin.kernel[1] - a1 * br.origin.kernel[0]) /
        (std::hypot(A1, a1) * std::hypot(br.origin.kernel[0],
                                         br.origin.kernel[1]));
    worst_tangency = std::max(worst_tangency, tangency);
  }
  if (worst_tangency > 1e-3) {
    out.pass = false;
    out.note = "tangency deviation " + std::to_string(worst_tangency);
    return out;
  }
  out.pass = out.measured < out.budget;
  char buf[64];
  std::snprintf(buf, sizeof buf, "refined sup|F|; tangency %.2e", worst_tangency);
  out.note = buf;
  return out;
}

}  // namespace

int main() {
  const struct {
    const char* name;
    Outcome (*fn)();
  } criteria[] = {
      {"annulus-stationarity", annulus_stationarity},
      {"mode-matrix-linearization", mode_matrix_linearization},
      {"derivative-vs-differences", derivative_vs_differences},
      {"bifurcation-radii-table", bifurcation_radii_table},
      {"planar-vortex-limit", planar_vortex_limit},
      {"spectral-monotonicity", spectral_monotonicity},
      {"determinant-asymptotics", determinant_asymptotics},
      {"transversality-at-roots", transversality_at_roots},
      {"hypergeometric-identities", hypergeometric_identities},
      {"branch-continuation", branch_continuation},
  };

  int passed = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome r;
    const auto start = std::chrono::steady_clock::now();
    try {
      r = c.fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.note = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    passed += r.pass ? 1 : 0;
    std::printf("[%s] %2d %-27s measured %-12.3e budget %-9.1e (%6.1fs)  %s\n",
                r.pass ? "PASS" : "FAIL", index, c.name, r.measured, r.budget,
                secs, r.note.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/10 criteria passed\n", passed);
  return passed == 10 ? 0 : 1;
}
