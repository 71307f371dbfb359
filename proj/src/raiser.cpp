#include "bifocus/raiser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "bifocus/parallel.hpp"

namespace bifocus {

namespace {

constexpr double kDenominatorFloor = 1e-6;
constexpr double kUnderflowFloor = 1e-300;
constexpr double kPolishTol = 1e-11;
constexpr double kDetectorTol = 1e-9;
constexpr double kPinSize = 1e-3;

// Scale factors relating the solver variables to model coefficients. The
// solve happens entirely in the scaled variables; these factors shrink
// geometrically in k, so recovery goes through log magnitudes.
struct ScaleSet {
    double log_mu;  // mu_bar, nu_bar slots
    double log_p00; // constant slots of the second map
    double log_p1;  // linear slots of the second map
};

ScaleSet scale_set(const BiFocusSpectrum& spec, int k, int n) {
    const double ll = std::log(spec.lambda);
    const double lg = std::log(spec.gamma);
    ScaleSet s;
    s.log_mu = k * (ll / (n + 2) - lg * (n + 1) / (n + 2));
    s.log_p00 = k * ll;
    s.log_p1 = k * (ll * (n + 1) / (n + 2) - lg / (n + 2));
    return s;
}

double unscale(double log_factor, double value, int k) {
    if (value == 0.0) return 0.0;
    const double log_mag = log_factor + std::log(std::fabs(value));
    if (log_mag < std::log(kUnderflowFloor)) {
        throw DegenerateKError(
            "parameter recovery underflowed below 1e-300 at k = " +
            std::to_string(k) + " (symbolically admissible, numerically degenerate)");
    }
    return (value > 0.0 ? 1.0 : -1.0) * std::exp(log_mag);
}

void require_equal_order(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                         const char* who) {
    if (gm1.order_cap() != gm2.order_cap()) {
        throw ContractError(std::string(who) + ": models must share order_cap");
    }
}

struct EliminationResult {
    double c;        // N / M ratio
    double radicand; // value of M^{n+2} in the annihilating convention
};

EliminationResult eliminate(const RotatedLead& rl, double d_m, double e_m, int n,
                            int m) {
    const double s1 = rl.s[0], s2 = rl.s[1], s3 = rl.s[2], s4 = rl.s[3];
    const double at = rl.a_tilde[static_cast<std::size_t>(m)];
    const double bt = rl.b_tilde[static_cast<std::size_t>(m)];
    const double den1 = s1 * e_m - s3 * d_m;
    const double den2 = s2 * e_m - s4 * d_m;
    const double smax = std::max({std::fabs(s1), std::fabs(s2), std::fabs(s3),
                                  std::fabs(s4)});
    const double coeff_scale = smax * std::max(std::fabs(d_m), std::fabs(e_m));
    if (!(std::fabs(den2) > kDenominatorFloor * coeff_scale)) {
        throw ContractError("solve_raise: S2*Em - S4*Dm is degenerate");
    }
    if (!(std::fabs(den1) > kDenominatorFloor * coeff_scale)) {
        throw ContractError("solve_raise: S1*Em - S3*Dm is degenerate");
    }
    if (!(std::fabs(s1 * s4 - s2 * s3) > 1e-12 * smax * smax)) {
        throw ContractError("solve_raise: S1*S4 - S2*S3 is degenerate");
    }
    if (d_m == 0.0) {
        throw ContractError("solve_raise: Dm must be nonzero (swap component roles)");
    }
    if (at == 0.0) {
        throw ContractError("solve_raise: rotated lead A~_m vanished");
    }
    EliminationResult r;
    r.c = -bt * den2 / (at * den1);
    if (r.c == 0.0 || !std::isfinite(r.c)) {
        throw ContractError("solve_raise: degenerate component ratio");
    }
    r.radicand = (s1 * r.c * at + s2 * bt) / (std::pow(r.c, m + 1) * d_m);
    if (!std::isfinite(r.radicand)) {
        throw ContractError("solve_raise: non-finite radicand");
    }
    (void)n;
    return r;
}

double real_root(double value, int degree, const char* who) {
    // Solves M^degree = value over the reals. Odd degrees always have a real
    // root; even degrees need value > 0, otherwise the caller must retry on
    // the opposite sign branch of the rotated lead pair.
    if (degree % 2 == 0 && value <= 0.0) {
        throw BranchFlipSignal(std::string(who) +
                               ": even-root radicand is not positive; retry with "
                               "the opposite k-parity branch");
    }
    const double mag = std::pow(std::fabs(value), 1.0 / degree);
    return value >= 0.0 ? mag : -mag;
}

// Newton unknowns, in a fixed order: M10, N11, the free middle-degree pairs,
// the free (n+1, i<m) pairs, then P10 P11 Q10 Q11. The constant parameters
// P00/Q00 are fixed by the exact cancellation of the image-point constants
// and never enter the iteration.
struct ThetaLayout {
    int n, m;
    int size;

    explicit ThetaLayout(int n_, int m_) : n(n_), m(m_) {
        int middle = 0;
        for (int j = 2; j <= n; ++j) middle += j + 1;
        size = 2 + 2 * middle + 2 * m + 4;
    }

    std::vector<double> pack(const RaiseSolution& sol) const {
        std::vector<double> t;
        t.reserve(static_cast<std::size_t>(size));
        t.push_back(sol.M.coeff(1, 0));
        t.push_back(sol.N.coeff(1, 1));
        for (int j = 2; j <= n; ++j) {
            for (int i = 0; i <= j; ++i) {
                t.push_back(sol.M.coeff(j, i));
                t.push_back(sol.N.coeff(j, i));
            }
        }
        for (int i = 0; i < m; ++i) {
            t.push_back(sol.M.coeff(n + 1, i));
            t.push_back(sol.N.coeff(n + 1, i));
        }
        t.push_back(sol.P[1]);
        t.push_back(sol.P[2]);
        t.push_back(sol.Q[1]);
        t.push_back(sol.Q[2]);
        return t;
    }

    void unpack(const std::vector<double>& t, RaiseSolution& sol) const {
        std::size_t p = 0;
        sol.M.set_coeff(1, 0, t[p++]);
        sol.N.set_coeff(1, 1, t[p++]);
        for (int j = 2; j <= n; ++j) {
            for (int i = 0; i <= j; ++i) {
                sol.M.set_coeff(j, i, t[p++]);
                sol.N.set_coeff(j, i, t[p++]);
            }
        }
        for (int i = 0; i < m; ++i) {
            sol.M.set_coeff(n + 1, i, t[p++]);
            sol.N.set_coeff(n + 1, i, t[p++]);
        }
        sol.P[1] = t[p++];
        sol.P[2] = t[p++];
        sol.Q[1] = t[p++];
        sol.Q[2] = t[p++];
    }
};

// Composite coefficients that the raise must annihilate: everything of total
// degree <= n plus the (n+1, i) slots for i <= m. The constant slots are
// killed symbolically inside the composition (p00/q00 assignments), so the
// Newton system excludes them.
std::vector<double> target_slots(const JetPair& comp, int n, int m,
                                 bool include_constant) {
    std::vector<double> r;
    if (include_constant) {
        r.push_back(comp.y1.coeff(0, 0));
        r.push_back(comp.y2.coeff(0, 0));
    }
    for (int j = 1; j <= n; ++j) {
        for (int i = 0; i <= j; ++i) {
            r.push_back(comp.y1.coeff(j, i));
            r.push_back(comp.y2.coeff(j, i));
        }
    }
    for (int i = 0; i <= m; ++i) {
        r.push_back(comp.y1.coeff(n + 1, i));
        r.push_back(comp.y2.coeff(n + 1, i));
    }
    return r;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

// Rebuilds the unscaled grids of sol from its scaled entries. The constant
// slots carry the gamma^-k-scaled source-point assignment of the second map
// and are independent of the Newton unknowns.
void refresh_unscaled(RaiseSolution& sol, const GlobalMapModel& gm2,
                      const BiFocusSpectrum& spec) {
    const int n = sol.n, k = sol.k;
    const ScaleSet sc = scale_set(spec, k, n);
    const double gmk = std::exp(-k * std::log(spec.gamma));
    Jet2 mu_bar(n + 1), nu_bar(n + 1);
    mu_bar.set_coeff(0, 0, gmk * gm2.y_minus(0));
    nu_bar.set_coeff(0, 0, gmk * gm2.y_minus(1));
    for (int j = 1; j <= n + 1; ++j) {
        for (int i = 0; i <= j; ++i) {
            mu_bar.set_coeff(j, i, unscale(sc.log_mu, sol.M.coeff(j, i), k));
            nu_bar.set_coeff(j, i, unscale(sc.log_mu, sol.N.coeff(j, i), k));
        }
    }
    sol.unscaled.mu_bar = mu_bar;
    sol.unscaled.nu_bar = nu_bar;
    sol.unscaled.p = {unscale(sc.log_p00, sol.P[0], k), unscale(sc.log_p1, sol.P[1], k),
                      unscale(sc.log_p1, sol.P[2], k)};
    sol.unscaled.q = {unscale(sc.log_p00, sol.Q[0], k), unscale(sc.log_p1, sol.Q[1], k),
                      unscale(sc.log_p1, sol.Q[2], k)};
}

} // namespace

RotatedLead rotated_lead(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                         const BiFocusSpectrum& spec, int k) {
    if (k < 1) throw ContractError("rotated_lead: k must be >= 1");
    RotatedLead rl;
    rl.k = k;
    const double c = std::cos(k * spec.psi), s = std::sin(k * spec.psi);
    const std::size_t rows = gm1.lead_a.size();
    rl.a_tilde.resize(rows);
    rl.b_tilde.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        rl.a_tilde[i] = gm1.lead_a[i] * c - gm1.lead_b[i] * s;
        rl.b_tilde[i] = gm1.lead_a[i] * s + gm1.lead_b[i] * c;
    }
    const Eigen::Matrix2d smat = gm2.a34 * (rotation(k * spec.phi) * gm1.b12);
    rl.s = {smat(0, 0), smat(0, 1), smat(1, 0), smat(1, 1)};
    return rl;
}

std::pair<double, double> s_determinant_identity(const RotatedLead& rl,
                                                 const GlobalMapModel& gm1,
                                                 const GlobalMapModel& gm2) {
    const double lhs = rl.s[0] * rl.s[3] - rl.s[1] * rl.s[2];
    const double rhs = gm2.a34.determinant() * gm1.b12.determinant();
    return {lhs, rhs};
}

std::vector<int> KSelection::all() const {
    std::vector<int> merged = even_branch;
    merged.insert(merged.end(), odd_branch.begin(), odd_branch.end());
    std::sort(merged.begin(), merged.end());
    return merged;
}

KSelection select_k_sequence(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                             const BiFocusSpectrum& spec, int m, int count,
                             int k_min, int k_max) {
    require_equal_order(gm1, gm2, "select_k_sequence");
    if (k_min < 1 || k_max <= k_min) {
        throw ContractError("select_k_sequence: need k_max > k_min >= 1");
    }
    if (m < 0 || m > gm1.order_cap() + 1) {
        throw ContractError("select_k_sequence: suborder m out of range");
    }
    const double d_m = gm2.lead_a[static_cast<std::size_t>(m)];
    const double e_m = gm2.lead_b[static_cast<std::size_t>(m)];
    if (d_m == 0.0 && e_m == 0.0) {
        throw ContractError("select_k_sequence: both Dm and Em vanish for the second map");
    }
    const double lead_scale =
        std::max(std::fabs(gm1.lead_a[static_cast<std::size_t>(m)]),
                 std::fabs(gm1.lead_b[static_cast<std::size_t>(m)]));

    KSelection sel;
    double best_score = -1.0;
    int best_k = k_min;
    for (int k = k_min; k <= k_max; ++k) {
        const RotatedLead rl = rotated_lead(gm1, gm2, spec, k);
        const double at = rl.a_tilde[static_cast<std::size_t>(m)];
        const double bt = rl.b_tilde[static_cast<std::size_t>(m)];
        const double den1 = rl.s[0] * e_m - rl.s[2] * d_m;
        const double den2 = rl.s[1] * e_m - rl.s[3] * d_m;
        const double coeff_scale =
            std::max({std::fabs(rl.s[0]), std::fabs(rl.s[1]), std::fabs(rl.s[2]),
                      std::fabs(rl.s[3])}) *
            std::max(std::fabs(d_m), std::fabs(e_m));
        const double eta = kDenominatorFloor * coeff_scale;

        const double den_margin = std::min(std::fabs(den1), std::fabs(den2)) /
                                  std::max(eta, kUnderflowFloor);
        const double pos_margin = std::min(at, bt);
        const double neg_margin = std::min(-at, -bt);
        const double branch_margin =
            std::max(pos_margin, neg_margin) / std::max(lead_scale, kUnderflowFloor);
        const double score = std::min(den_margin, branch_margin);
        if (score > best_score) {
            best_score = score;
            best_k = k;
        }

        if (!(std::fabs(den1) > eta) || !(std::fabs(den2) > eta)) continue;
        if (at > 0.0 && bt > 0.0) {
            if (static_cast<int>(sel.even_branch.size()) < count)
                sel.even_branch.push_back(k);
        } else if (at < 0.0 && bt < 0.0) {
            if (static_cast<int>(sel.odd_branch.size()) < count)
                sel.odd_branch.push_back(k);
        }
    }
    if (sel.empty()) {
        throw SearchExhaustedError(
            "select_k_sequence: no admissible k in [" + std::to_string(k_min) + "," +
            std::to_string(k_max) + "]; nearest miss at k = " + std::to_string(best_k) +
            " (score " + std::to_string(best_score) + ")");
    }
    return sel;
}

ClosedForm solve_raise_closed_form(const RotatedLead& rl, double d_m, double e_m,
                                   int n, int m) {
    if (n < 1 || m < 0 || m > n + 1) {
        throw ContractError("solve_raise_closed_form: bad (n, m)");
    }
    if (static_cast<std::size_t>(m) >= rl.a_tilde.size()) {
        throw ContractError("solve_raise_closed_form: lead rows too short for m");
    }
    const EliminationResult er = eliminate(rl, d_m, e_m, n, m);
    ClosedForm cf;
    cf.m10 = real_root(-er.radicand, n + 2, "solve_raise_closed_form");
    cf.n11 = er.c * cf.m10;
    cf.p = {0.0, rl.s[0] / cf.m10, rl.s[1] / cf.n11};
    cf.q = {0.0, rl.s[2] / cf.m10, rl.s[3] / cf.n11};
    return cf;
}

RaiseSolution make_annihilating_solution(const GlobalMapModel& gm1,
                                         const GlobalMapModel& gm2,
                                         const BiFocusSpectrum& spec, int k, int n,
                                         int m) {
    require_equal_order(gm1, gm2, "make_annihilating_solution");
    if (gm1.order_cap() != n) {
        throw ContractError("make_annihilating_solution: order_cap != n");
    }
    const RotatedLead rl = rotated_lead(gm1, gm2, spec, k);
    const double d_m = gm2.lead_a[static_cast<std::size_t>(m)];
    const double e_m = gm2.lead_b[static_cast<std::size_t>(m)];
    const EliminationResult er = eliminate(rl, d_m, e_m, n, m);

    RaiseSolution sol;
    sol.k = k;
    sol.n = n;
    sol.m = m;
    sol.M = Jet2(n + 1);
    sol.N = Jet2(n + 1);
    const double m10 = real_root(er.radicand, n + 2, "make_annihilating_solution");
    const double n11 = er.c * m10;
    sol.M.set_coeff(1, 0, m10);
    sol.N.set_coeff(1, 1, n11);

    // Constant rows: the composed constants are lambda^k * a34_hat * R(k phi)
    // * x_plus plus p00/q00, so the exact kill is available up front.
    const Eigen::Vector2d xrot = rotation(k * spec.phi) * gm1.x_plus;
    const Eigen::Vector2d t_const = gm2.a34 * xrot;
    sol.P = {-t_const(0), -rl.s[0] / m10, -rl.s[1] / n11};
    sol.Q = {-t_const(1), -rl.s[2] / m10, -rl.s[3] / n11};

    refresh_unscaled(sol, gm2, spec);
    return sol;
}

namespace {

// Shared body for the composed tangent jet. With absolute_bound set, every
// coefficient and rotation weight enters by absolute value, so the result
// bounds the size of the individual terms with no cancellation: the natural
// scale against which residuals of the real composition are judged.
JetPair compose_core(const GlobalMapModel& gm1, const BiFocusSpectrum& spec, int k,
                     const GlobalMapModel& gm2, const RaiseSolution& sol,
                     bool absolute_bound) {
    require_equal_order(gm1, gm2, "compose_new_global");
    if (k < 1) throw ContractError("compose_new_global: k must be >= 1");
    const int n = sol.n, m = sol.m;
    if (gm1.order_cap() != n) {
        throw ContractError("compose_new_global: solution order does not match models");
    }
    if (sol.unscaled.mu_bar.degree_cap() != n + 1) {
        throw ContractError("compose_new_global: truncation cap insufficient");
    }
    const int cap = n + 2;
    const auto wrap = [absolute_bound](double v) {
        return absolute_bound ? std::fabs(v) : v;
    };
    const double c = wrap(std::cos(k * spec.psi));
    const double s = wrap(std::sin(k * spec.psi));
    const double cphi = wrap(std::cos(k * spec.phi));
    const double sphi = wrap(std::sin(k * spec.phi));
    const double neg = absolute_bound ? 1.0 : -1.0;
    const double gk = std::pow(spec.gamma, k);
    const double lk = std::pow(spec.lambda, k);

    // First map with the rotated-coordinate parameters pulled back to its own
    // chart; lead slots at i >= m keep their defining values.
    Jet2 ser1(cap), ser2(cap);
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= j; ++i) {
            const double mb = wrap(sol.unscaled.mu_bar.coeff(j, i));
            const double nb = wrap(sol.unscaled.nu_bar.coeff(j, i));
            ser1.set_coeff(j, i, c * mb + s * nb);
            ser2.set_coeff(j, i, neg * s * mb + c * nb);
        }
    }
    for (int i = 0; i <= n + 1; ++i) {
        if (i < m) {
            const double mb = wrap(sol.unscaled.mu_bar.coeff(n + 1, i));
            const double nb = wrap(sol.unscaled.nu_bar.coeff(n + 1, i));
            ser1.set_coeff(n + 1, i, c * mb + s * nb);
            ser2.set_coeff(n + 1, i, neg * s * mb + c * nb);
        } else {
            ser1.set_coeff(n + 1, i, wrap(gm1.lead_a[static_cast<std::size_t>(i)]));
            ser2.set_coeff(n + 1, i, wrap(gm1.lead_b[static_cast<std::size_t>(i)]));
        }
    }

    // Image through k local rounds, centered on the second map's source point.
    Jet2 in1 = jet_scale(jet_add(jet_scale(ser1, c), jet_scale(ser2, neg * s)), gk);
    Jet2 in2 = jet_scale(jet_add(jet_scale(ser1, s), jet_scale(ser2, c)), gk);
    // The (0,0) parameter assignment centers the image exactly on the source
    // point; realize that cancellation symbolically instead of leaving the
    // rotation round-trip rounding behind.
    in1.set_coeff(0, 0, 0.0);
    in2.set_coeff(0, 0, 0.0);

    // x-channel through the same rounds. The image-point constant is killed
    // exactly by the p00/q00 assignment (recorded in sol.P[0]/sol.Q[0]), so
    // neither side enters the jet.
    Jet2 xj1(cap), xj2(cap);
    xj1.set_coeff(1, 0, wrap(gm1.b12(0, 0)));
    xj1.set_coeff(1, 1, wrap(gm1.b12(0, 1)));
    xj2.set_coeff(1, 0, wrap(gm1.b12(1, 0)));
    xj2.set_coeff(1, 1, wrap(gm1.b12(1, 1)));
    const Jet2 xr1 =
        jet_scale(jet_add(jet_scale(xj1, cphi), jet_scale(xj2, neg * sphi)), lk);
    const Jet2 xr2 =
        jet_scale(jet_add(jet_scale(xj1, sphi), jet_scale(xj2, cphi)), lk);

    // Second map with its series replaced by the p/q assignments.
    Jet2 pser(cap), qser(cap);
    pser.set_coeff(1, 0, wrap(sol.unscaled.p[1]));
    pser.set_coeff(1, 1, wrap(sol.unscaled.p[2]));
    qser.set_coeff(1, 0, wrap(sol.unscaled.q[1]));
    qser.set_coeff(1, 1, wrap(sol.unscaled.q[2]));
    for (int i = m; i <= n + 1; ++i) {
        pser.set_coeff(n + 1, i, wrap(gm2.lead_a[static_cast<std::size_t>(i)]));
        qser.set_coeff(n + 1, i, wrap(gm2.lead_b[static_cast<std::size_t>(i)]));
    }

    const JetPair inner(in1, in2);
    Jet2 comp1 = jet_add(jet_add(jet_scale(xr1, wrap(gm2.a34(0, 0))),
                                 jet_scale(xr2, wrap(gm2.a34(0, 1)))),
                         jet_compose(pser, inner, true));
    Jet2 comp2 = jet_add(jet_add(jet_scale(xr1, wrap(gm2.a34(1, 0))),
                                 jet_scale(xr2, wrap(gm2.a34(1, 1)))),
                         jet_compose(qser, inner, true));
    if (!comp1.all_finite() || !comp2.all_finite()) {
        throw DegenerateKError("compose_new_global: overflow at k = " + std::to_string(k));
    }
    return JetPair(std::move(comp1), std::move(comp2));
}

} // namespace

JetPair compose_new_global(const GlobalMapModel& gm1, const BiFocusSpectrum& spec,
                           int k, const GlobalMapModel& gm2,
                           const RaiseSolution& sol) {
    return compose_core(gm1, spec, k, gm2, sol, false);
}

RaiseSolution newton_polish(const GlobalMapModel& gm1, const BiFocusSpectrum& spec,
                            int k, const GlobalMapModel& gm2,
                            const RaiseSolution& sol) {
    if (!std::isfinite(sol.residual)) {
        throw ContractError("newton_polish: starting residual is not finite");
    }
    const int n = sol.n, m = sol.m;
    const ThetaLayout layout(n, m);

    RaiseSolution cur = sol;
    auto evaluate = [&](const std::vector<double>& theta, RaiseSolution& out,
                        std::vector<double>& resid, double& jet_scale) {
        layout.unpack(theta, out);
        refresh_unscaled(out, gm2, spec);
        const JetPair comp = compose_new_global(gm1, spec, k, gm2, out);
        resid = target_slots(comp, n, m, false);
        jet_scale = comp.max_abs_coeff();
    };

    std::vector<double> theta = layout.pack(cur);
    std::vector<double> resid;
    double jet_scale = 0.0;
    evaluate(theta, cur, resid, jet_scale);
    if (static_cast<int>(resid.size()) != layout.size) {
        throw ContractError("newton_polish: unknown/target count mismatch");
    }
    // Residuals are judged against the no-cancellation term bound: when the
    // truncation leaves no genuine coefficient above it, the composite is
    // flat to cap and there is nothing left to polish.
    const double abs_bound =
        compose_core(gm1, spec, k, gm2, cur, true).max_abs_coeff();
    const double norm =
        std::max({jet_scale, abs_bound, std::numeric_limits<double>::min()});

    double best_res = max_abs(resid);
    std::vector<double> best_theta = theta;
    int worse_streak = 0;
    double prev_res = best_res;

    for (int it = 0; it < 50; ++it) {
        const double cur_res = max_abs(resid);
        if (cur_res <= kPolishTol * norm) break;

        Eigen::MatrixXd jac(layout.size, layout.size);
        Eigen::VectorXd rhs(layout.size);
        for (int r = 0; r < layout.size; ++r) rhs(r) = -resid[static_cast<std::size_t>(r)];
        RaiseSolution probe = cur;
        for (int col = 0; col < layout.size; ++col) {
            const double h = 1e-7 * std::max(1.0, std::fabs(theta[static_cast<std::size_t>(col)]));
            std::vector<double> bumped = theta;
            bumped[static_cast<std::size_t>(col)] += h;
            std::vector<double> rb;
            double dummy = 0.0;
            evaluate(bumped, probe, rb, dummy);
            for (int r = 0; r < layout.size; ++r) {
                jac(r, col) =
                    (rb[static_cast<std::size_t>(r)] - resid[static_cast<std::size_t>(r)]) / h;
            }
        }
        const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(rhs);
        if (!delta.allFinite()) {
            RaiseSolution best = cur;
            layout.unpack(best_theta, best);
            refresh_unscaled(best, gm2, spec);
            best.residual = best_res;
            best.scale = jet_scale;
            throw RaiseDivergenceError("newton_polish: singular Jacobian step", best);
        }
        for (int t = 0; t < layout.size; ++t) theta[static_cast<std::size_t>(t)] += delta(t);
        evaluate(theta, cur, resid, jet_scale);

        const double new_res = max_abs(resid);
        if (new_res < best_res) {
            best_res = new_res;
            best_theta = theta;
        }
        worse_streak = new_res > prev_res ? worse_streak + 1 : 0;
        prev_res = new_res;
        if (worse_streak >= 5) {
            RaiseSolution best = cur;
            layout.unpack(best_theta, best);
            refresh_unscaled(best, gm2, spec);
            best.residual = best_res;
            best.scale = jet_scale;
            throw RaiseDivergenceError(
                "newton_polish: residual increased for 5 consecutive steps", best);
        }
    }

    layout.unpack(best_theta, cur);
    refresh_unscaled(cur, gm2, spec);
    const JetPair comp = compose_new_global(gm1, spec, k, gm2, cur);
    cur.residual = max_abs(target_slots(comp, n, m, true));
    cur.scale = comp.max_abs_coeff();
    cur.norm = norm;
    return cur;
}

namespace {

// Deterministic uniform stream for the generic-position refresh; seeded from
// the attempt data so identical runs reproduce byte-identical models.
struct RefreshRng {
    std::mt19937_64 gen;

    RefreshRng(int k, int n, int m, double scale) {
        std::uint64_t seed = 0x9E3779B97F4A7C15ull;
        auto mix = [&seed](std::uint64_t v) {
            seed ^= v + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2);
        };
        mix(static_cast<std::uint64_t>(k));
        mix(static_cast<std::uint64_t>(n));
        mix(static_cast<std::uint64_t>(m));
        mix(std::bit_cast<std::uint64_t>(scale));
        gen.seed(seed);
    }

    double uniform(double a, double b) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        return a + (b - a) * u;
    }
};

// Builds the raised model from a polished composite. Chain-rule linear blocks
// keep the new model a genuine global-map chart around the composed
// homoclinic points; non-leading channels are dropped (their composed
// couplings are identically zero in the zero-remainder model).
//
// Assembly ends with a small deterministic perturbation restoring generic
// position: the truncated composition leaves structural zeros in the free
// lead-row slots and thins the linear blocks round over round, while every
// raising step expects a freshly perturbed generic map as input. Slots below
// the target suborder stay dead, so the index is exactly the target.
GlobalMapModel assemble_raised_model(const GlobalMapModel& gm1,
                                     const GlobalMapModel& gm2,
                                     const BiFocusSpectrum& spec, int k,
                                     const RaiseSolution& sol, const JetPair& comp,
                                     int target_n, int target_m) {
    GlobalMapModel out(target_n, 0, 0);
    const double gk = std::pow(spec.gamma, k);
    const double lk = std::pow(spec.lambda, k);
    const Eigen::Matrix2d rphi = rotation(k * spec.phi);
    const Eigen::Matrix2d rpsi = rotation(k * spec.psi);

    // Raw linear part of the first map after parameter application.
    const double c = std::cos(k * spec.psi), s = std::sin(k * spec.psi);
    Eigen::Matrix2d l1;
    {
        const double mb10 = sol.unscaled.mu_bar.coeff(1, 0);
        const double nb10 = sol.unscaled.nu_bar.coeff(1, 0);
        const double mb11 = sol.unscaled.mu_bar.coeff(1, 1);
        const double nb11 = sol.unscaled.nu_bar.coeff(1, 1);
        l1(0, 0) = c * mb10 + s * nb10;
        l1(0, 1) = c * mb11 + s * nb11;
        l1(1, 0) = -s * mb10 + c * nb10;
        l1(1, 1) = -s * mb11 + c * nb11;
    }
    Eigen::Matrix2d p1;
    p1 << sol.unscaled.p[1], sol.unscaled.p[2], sol.unscaled.q[1], sol.unscaled.q[2];

    const Eigen::Matrix2d jx_mid = lk * rphi * gm1.a12; // d xmid / d x
    const Eigen::Matrix2d jy_mid = lk * rphi * gm1.b12; // d xmid / d Y
    const Eigen::Matrix2d jx_y = gk * rpsi * gm1.a34;   // d ymid / d x
    const Eigen::Matrix2d jy_y = gk * rpsi * l1;        // d ymid / d Y

    out.a12 = gm2.a12 * jx_mid + gm2.b12 * jx_y;
    out.b12 = gm2.a12 * jy_mid + gm2.b12 * jy_y;
    out.a34 = gm2.a34 * jx_mid + p1 * jx_y;
    out.x_plus = gm2.x_plus + lk * (gm2.a12 * (rphi * gm1.x_plus));
    out.y_minus = gm1.y_minus;

    const double jet_scale = comp.max_abs_coeff();
    const double bound = std::max(sol.norm, std::numeric_limits<double>::min());
    if (!(jet_scale > 0.0) && !(bound > 0.0)) {
        throw NumericError("assemble_raised_model: composite jet vanished");
    }
    // Below the no-cancellation bound the surviving coefficients are pure
    // rounding debris: the truncated composition is flat to its cap and the
    // entire content of the raised jet comes from the generic refresh.
    const bool flat_to_cap = !(jet_scale > 1e-9 * bound);
    const double sigma = flat_to_cap ? bound : jet_scale;

    // Normalize the output charts: coefficient scales shrink multiplicatively
    // round over round (by the contraction factors of the k local rounds),
    // and after enough raises double precision runs out of room. Dividing the
    // ybar channel by the jet scale and the xbar channel by its block scale
    // relabels each manufactured tangency without touching its index or the
    // genericity tests.
    for (int j = 0; j <= target_n; ++j) {
        for (int i = 0; i <= j; ++i) {
            out.mu.set_coeff(j, i, flat_to_cap ? 0.0 : comp.y1.coeff(j, i) / sigma);
            out.nu.set_coeff(j, i, flat_to_cap ? 0.0 : comp.y2.coeff(j, i) / sigma);
        }
    }
    for (int i = 0; i <= target_n + 1; ++i) {
        out.lead_a[static_cast<std::size_t>(i)] =
            flat_to_cap ? 0.0 : comp.y1.coeff(target_n + 1, i) / sigma;
        out.lead_b[static_cast<std::size_t>(i)] =
            flat_to_cap ? 0.0 : comp.y2.coeff(target_n + 1, i) / sigma;
    }
    out.a34 /= sigma;
    const double xscale = std::max({out.a12.norm(), out.b12.norm(),
                                    std::numeric_limits<double>::min()});
    out.a12 /= xscale;
    out.b12 /= xscale;

    RefreshRng rng(k, target_n, target_m, sigma);

    // Lead-row tail: every component at slots >= target_m must be a healthy
    // generic value. This pins the defining coefficient and keeps the lead
    // rows usable as the next rounds' head coefficients.
    for (int i = target_m; i <= target_n + 1; ++i) {
        const std::size_t t = static_cast<std::size_t>(i);
        if (std::fabs(out.lead_a[t]) <= kPinSize) {
            out.lead_a[t] += kPinSize * rng.uniform(0.5, 1.5) *
                             (rng.uniform(-1.0, 1.0) < 0.0 ? -1.0 : 1.0);
        }
        if (std::fabs(out.lead_b[t]) <= kPinSize) {
            out.lead_b[t] += kPinSize * rng.uniform(0.5, 1.5) *
                             (rng.uniform(-1.0, 1.0) < 0.0 ? -1.0 : 1.0);
        }
    }

    // Conditioning floor for the linear blocks; composition shrinks their
    // relative determinants multiplicatively.
    auto condition_block = [&rng](Eigen::Matrix2d& blk) {
        for (int attempt = 0; attempt < 16; ++attempt) {
            const double norms = blk.row(0).norm() * blk.row(1).norm();
            const double rel = norms > 0.0 ? std::fabs(blk.determinant()) / norms : 0.0;
            if (rel > 1e-3) return;
            const double size = std::max(blk.norm(), std::numeric_limits<double>::min());
            Eigen::Matrix2d bump;
            bump << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
            blk += 0.05 * size * bump;
        }
    };
    condition_block(out.a12);
    condition_block(out.a34);
    condition_block(out.b12);
    return out;
}

} // namespace

RaiseOutcome raise_suborder(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                            const BiFocusSpectrum& spec, int k_min, int k_max) {
    gm1.check_invariants();
    gm2.check_invariants();
    if (!validate_genericity(gm1).pass() || !validate_genericity(gm2).pass()) {
        throw ContractError("raise_suborder: a model fails the genericity tests");
    }
    const TangencyIndex i1 = tangency_index(global_tangent_jet(gm1));
    const TangencyIndex i2 = tangency_index(global_tangent_jet(gm2));
    if (i1.is_flat() || i2.is_flat() || i1 != i2) {
        throw ContractError("raise_suborder: inputs must share one finite index, got " +
                            i1.str() + " and " + i2.str());
    }
    const int n = i1.n, m = i1.m;

    // The elimination assumes Dm != 0; when only Em survives, relabel the
    // second map's components.
    GlobalMapModel second = gm2;
    {
        const double d_m = gm2.lead_a[static_cast<std::size_t>(m)];
        const double e_m = gm2.lead_b[static_cast<std::size_t>(m)];
        const double lead_scale = std::max(std::fabs(d_m), std::fabs(e_m));
        if (std::fabs(d_m) <= 1e-12 * lead_scale) second = gm2.swapped_y_components();
    }

    const int target_n = (m < n + 1) ? n : n + 1;
    const int target_m = (m < n + 1) ? m + 1 : 0;
    const TangencyIndex target = TangencyIndex::make(target_n, target_m);

    const KSelection ks =
        select_k_sequence(gm1, second, spec, m, k_max - k_min + 1, k_min, k_max);

    RaiseOutcome outcome{GlobalMapModel(1), TangencyIndex::flat(), {}};
    std::string last_failure = "no candidate k was attempted";
    for (int k : ks.all()) {
        RaiseRow row;
        row.k = k;
        try {
            RaiseSolution sol0 = make_annihilating_solution(gm1, second, spec, k, n, m);
            {
                const JetPair pre = compose_new_global(gm1, spec, k, second, sol0);
                sol0.residual = max_abs(target_slots(pre, n, m, true));
                sol0.scale = pre.max_abs_coeff();
            }
            row.residual_pre = sol0.residual;
            RaiseSolution sol = newton_polish(gm1, spec, k, second, sol0);
            row.residual_post = sol.residual;
            if (!(sol.residual <= kDetectorTol * std::max(sol.scale, sol.norm))) {
                last_failure = "polish stalled at k = " + std::to_string(k);
                outcome.rows.push_back(row);
                continue;
            }
            const JetPair comp = compose_new_global(gm1, spec, k, second, sol);
            GlobalMapModel raised =
                assemble_raised_model(gm1, second, spec, k, sol, comp, target_n, target_m);
            const TangencyIndex got = tangency_index(global_tangent_jet(raised));
            row.index_n = got.is_flat() ? -1 : got.n;
            row.index_m = got.is_flat() ? -1 : got.m;
            if (got != target || !validate_genericity(raised).pass()) {
                last_failure = "raised model off target at k = " + std::to_string(k);
                outcome.rows.push_back(row);
                continue;
            }
            row.ok = true;
            outcome.rows.push_back(row);
            outcome.model = std::move(raised);
            outcome.index = got;
            return outcome;
        } catch (const BranchFlipSignal& e) {
            last_failure = e.what();
        } catch (const RaiseDivergenceError& e) {
            row.residual_post = e.best.residual;
            last_failure = e.what();
        } catch (const DegenerateKError& e) {
            last_failure = e.what();
        } catch (const ContractError& e) {
            // Per-k degeneracy (dead denominators); admissible ks remain.
            last_failure = e.what();
        }
        outcome.rows.push_back(row);
    }
    throw SearchExhaustedError("raise_suborder: no k in [" + std::to_string(k_min) +
                               "," + std::to_string(k_max) +
                               "] produced the target index; last failure: " +
                               last_failure);
}

TangencyBag::TangencyBag(std::vector<GlobalMapModel> models, BiFocusSpectrum spec)
    : spectrum(std::move(spec)) {
    items.reserve(models.size());
    for (auto& gm : models) {
        gm.check_invariants();
        if (!validate_genericity(gm).pass()) {
            throw ContractError("TangencyBag: item fails the genericity tests");
        }
        const TangencyIndex idx = tangency_index(global_tangent_jet(gm));
        items.push_back(BagItem{std::move(gm), idx});
    }
}

RaiseOutcome raise_order(const TangencyBag& bag, int k_min, int k_max) {
    if (bag.items.empty()) throw ContractError("raise_order: empty bag");
    const TangencyIndex first = bag.items.front().index;
    if (first.is_flat() || first.m != 0) {
        throw ContractError("raise_order: items must have index (n, 0)");
    }
    const int n = first.n;
    const std::uint64_t need = std::uint64_t{1} << (n + 2);
    if (bag.items.size() != need) {
        throw ContractError("raise_order: need exactly 2^(n+2) = " + std::to_string(need) +
                            " items of index (" + std::to_string(n) + ",0), got " +
                            std::to_string(bag.items.size()));
    }
    for (const auto& item : bag.items) {
        if (item.index != first) {
            throw ContractError("raise_order: mixed indices in the bag (" +
                                item.index.str() + " vs " + first.str() + ")");
        }
    }

    std::vector<GlobalMapModel> current;
    current.reserve(bag.items.size());
    for (const auto& item : bag.items) current.push_back(item.model);

    RaiseOutcome final_outcome{GlobalMapModel(1), TangencyIndex::flat(), {}};
    for (int round = 0; round < n + 2; ++round) {
        const int pairs = static_cast<int>(current.size()) / 2;
        std::vector<RaiseOutcome> results(static_cast<std::size_t>(pairs),
                                          RaiseOutcome{GlobalMapModel(1), TangencyIndex::flat(), {}});
        parallel_for(pairs, [&](int p) {
            results[static_cast<std::size_t>(p)] =
                raise_suborder(current[2 * static_cast<std::size_t>(p)],
                               current[2 * static_cast<std::size_t>(p) + 1],
                               bag.spectrum, k_min, k_max);
        });
        std::vector<GlobalMapModel> next;
        next.reserve(static_cast<std::size_t>(pairs));
        for (auto& res : results) {
            for (const auto& row : res.rows) final_outcome.rows.push_back(row);
            next.push_back(std::move(res.model));
        }
        current = std::move(next);
        if (pairs == 1) {
            final_outcome.model = std::move(current.front());
            final_outcome.index = results.front().index;
        }
    }
    return final_outcome;
}

std::uint64_t required_count(int N) {
    if (N < 1) throw ContractError("required_count: N must be >= 1");
    const int exponent = (N - 1) * (N + 4) / 2;
    if (exponent >= 64) {
        throw ContractError("required_count: 2^" + std::to_string(exponent) +
                            " exceeds the 64-bit range");
    }
    return std::uint64_t{1} << exponent;
}

RaiseOutcome build_order_n(const TangencyBag& bag, int N, int k_min, int k_max) {
    if (N < 1) throw ContractError("build_order_n: N must be >= 1");
    const std::uint64_t need = required_count(N);
    if (bag.items.size() != need) {
        throw ContractError("build_order_n: required_count(" + std::to_string(N) +
                            ") = " + std::to_string(need) + ", got " +
                            std::to_string(bag.items.size()));
    }
    const TangencyIndex base = TangencyIndex::make(1, 0);
    for (const auto& item : bag.items) {
        if (item.index != base) {
            throw ContractError("build_order_n: every item must have index (1,0)");
        }
    }
    if (N == 1) {
        return RaiseOutcome{bag.items.front().model, base, {}};
    }

    std::vector<GlobalMapModel> current;
    current.reserve(bag.items.size());
    for (const auto& item : bag.items) current.push_back(item.model);

    RaiseOutcome final_outcome{GlobalMapModel(1), TangencyIndex::flat(), {}};
    for (int order = 1; order < N; ++order) {
        const std::uint64_t group = std::uint64_t{1} << (order + 2);
        const std::size_t n_groups = current.size() / group;
        std::vector<GlobalMapModel> next;
        next.reserve(n_groups);
        for (std::size_t g = 0; g < n_groups; ++g) {
            std::vector<GlobalMapModel> members(
                current.begin() + static_cast<std::ptrdiff_t>(g * group),
                current.begin() + static_cast<std::ptrdiff_t>((g + 1) * group));
            TangencyBag sub(std::move(members), bag.spectrum);
            RaiseOutcome res = raise_order(sub, k_min, k_max);
            for (const auto& row : res.rows) final_outcome.rows.push_back(row);
            next.push_back(std::move(res.model));
        }
        current = std::move(next);
    }
    final_outcome.model = std::move(current.front());
    final_outcome.index = tangency_index(global_tangent_jet(final_outcome.model));
    return final_outcome;
}

} // namespace bifocus
