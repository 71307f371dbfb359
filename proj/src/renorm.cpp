#include "bifocus/renorm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bifocus/parallel.hpp"

namespace bifocus {

namespace {

constexpr double kUnderflowFloor = 1e-300;

void check_scale(double v, int k, const char* who) {
    if (!std::isfinite(v) || (v != 0.0 && std::fabs(v) < kUnderflowFloor)) {
        throw DegenerateKError(std::string(who) + ": scale factor degenerate at k = " +
                               std::to_string(k));
    }
}

double sup_unit_ball(double c, const Eigen::RowVectorXd& dx,
                     const Eigen::RowVectorXd& dy) {
    return std::fabs(c) + dx.cwiseAbs().sum() + dy.cwiseAbs().sum();
}

} // namespace

std::vector<std::array<double, 2>> disk_grid(int per_side) {
    if (per_side < 2) throw ContractError("disk_grid: need at least 2 points per side");
    std::vector<std::array<double, 2>> pts;
    for (int a = 0; a < per_side; ++a) {
        for (int b = 0; b < per_side; ++b) {
            const double y1 = -1.0 + 2.0 * a / (per_side - 1);
            const double y2 = -1.0 + 2.0 * b / (per_side - 1);
            if (y1 * y1 + y2 * y2 <= 1.0 + 1e-12) pts.push_back({y1, y2});
        }
    }
    return pts;
}

RescalingScheme RescalingScheme::order_form(int n) {
    if (n < 1) throw ContractError("RescalingScheme: n must be >= 1");
    return RescalingScheme{Variant::OrderForm, n};
}

RescalingScheme RescalingScheme::full_polynomial_form(int n) {
    if (n < 1) throw ContractError("RescalingScheme: n must be >= 1");
    return RescalingScheme{Variant::FullPolynomialForm, n};
}

double RescalingScheme::delta(int k) const {
    return 1.0 / std::sqrt(static_cast<double>(k));
}

double RescalingScheme::y_scale(double gamma, int k) const {
    const double e = variant == Variant::OrderForm ? 1.0 : 2.0;
    return std::exp(-e * k * std::log(gamma) / n);
}

double RescalingScheme::param_scale(double gamma, int j, int k) const {
    const double e = variant == Variant::OrderForm ? 1.0 : 2.0;
    return std::exp(-k * std::log(gamma) * (1.0 - e * (j - 1) / n));
}

double RescalingScheme::coeff_factor(double gamma, int j, int k) const {
    const double e = variant == Variant::OrderForm ? 1.0 : 2.0;
    return std::exp(-k * std::log(gamma) * e * (j - 1) / n);
}

FirstReturnJet first_return_jet(const GlobalMapModel& gm, const BiFocusSpectrum& spec,
                                int k) {
    if (k < 1) throw ContractError("first_return_jet: k must be >= 1");
    gm.check_invariants();
    if (!validate_genericity(gm).pass()) {
        throw ContractError("first_return_jet: model fails the genericity tests");
    }
    const double gmk = std::exp(-k * std::log(spec.gamma));
    if (gmk < kUnderflowFloor) {
        throw DegenerateKError("first_return_jet: gamma^-k underflows at k = " +
                               std::to_string(k));
    }
    const int n = gm.order_cap();
    const int cap = n + 1;
    const double gk = std::pow(spec.gamma, k);
    const double lk = std::pow(spec.lambda, k);
    const double c = std::cos(k * spec.psi), s = std::sin(k * spec.psi);
    const Eigen::Matrix2d rphi = rotation(k * spec.phi);

    // Series of the return image in the shifted strip coordinates. The
    // transverse inputs of the global map vanish in the zero-remainder model
    // (u_k = 0, next-leg v = 0), so only the x-channel constant survives
    // besides the model's own series.
    const Eigen::Vector2d xk = lk * (rphi * gm.x_plus);
    const Eigen::Vector2d a3xk = gm.a34 * xk;
    // Image constants are measured against the source point carried back
    // through the k rounds: subtract gamma^-k R(-k psi) y_minus.
    const Eigen::Vector2d yshift = gmk * (rotation(-k * spec.psi) * gm.y_minus);

    Jet2 ser1(cap), ser2(cap);
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= j; ++i) {
            ser1.set_coeff(j, i, gm.mu.coeff(j, i));
            ser2.set_coeff(j, i, gm.nu.coeff(j, i));
        }
    }
    for (int i = 0; i <= n + 1; ++i) {
        ser1.set_coeff(n + 1, i, gm.lead_a[static_cast<std::size_t>(i)]);
        ser2.set_coeff(n + 1, i, gm.lead_b[static_cast<std::size_t>(i)]);
    }
    ser1.set_coeff(0, 0, ser1.coeff(0, 0) + a3xk(0) - yshift(0));
    ser2.set_coeff(0, 0, ser2.coeff(0, 0) + a3xk(1) - yshift(1));

    // Solve the rotated cross form for (Ybar1, Ybar2): multiply by
    // gamma^k R(k psi).
    Jet2 out1 = jet_scale(jet_sub(jet_scale(ser1, c), jet_scale(ser2, s)), gk);
    Jet2 out2 = jet_scale(jet_add(jet_scale(ser1, s), jet_scale(ser2, c)), gk);
    if (!out1.all_finite() || !out2.all_finite()) {
        throw DegenerateKError("first_return_jet: overflow at k = " + std::to_string(k));
    }

    FirstReturnJet fr{JetPair(std::move(out1), std::move(out2)), AuxBlock{}, k};
    fr.aux.x_const = gm.a12 * xk;
    fr.aux.x_dx = lk * gm.a12 * rphi;
    fr.aux.x_dy = gm.b12;
    fr.aux.u_const = gm.a5 * xk;
    fr.aux.u_dx = lk * gm.a5 * rphi;
    fr.aux.u_dy = gm.b5;
    fr.aux.v_const = gm.a6 * xk;
    fr.aux.v_dx = lk * gm.a6 * rphi;
    fr.aux.v_dy = gm.b6;
    return fr;
}

RenormalizedMap rescale(const FirstReturnJet& fr, const BiFocusSpectrum& spec,
                        const RescalingScheme& scheme) {
    const int k = fr.k;
    if (k < 1) throw ContractError("rescale: k must be >= 1");
    const int cap = fr.jet.degree_cap();
    if (scheme.n != cap - 1) {
        throw ContractError("rescale: scheme order does not match the jet cap");
    }
    RenormalizedMap out{k, scheme, fr.jet, 0.0};
    for (int j = 0; j <= cap; ++j) {
        const double f = scheme.coeff_factor(spec.gamma, j, k);
        check_scale(f, k, "rescale");
        for (int i = 0; i <= j; ++i) {
            out.jet.y1.set_coeff(j, i, fr.jet.y1.coeff(j, i) * f);
            out.jet.y2.set_coeff(j, i, fr.jet.y2.coeff(j, i) * f);
        }
    }
    if (!out.jet.y1.all_finite() || !out.jet.y2.all_finite()) {
        throw DegenerateKError("rescale: overflow at k = " + std::to_string(k));
    }

    // Transverse block after (X,U,V) -> (sigma/delta) * new, Y -> sigma * new.
    const double sigma = scheme.y_scale(spec.gamma, k);
    const double delta = scheme.delta(k);
    const double amp = delta / sigma; // applied to the constant rows
    check_scale(sigma, k, "rescale");
    double worst = 0.0;
    auto fold = [&](const Eigen::VectorXd& cst, const Eigen::MatrixXd& dx,
                    const Eigen::MatrixXd& dy) {
        for (Eigen::Index r = 0; r < cst.size(); ++r) {
            const double v = sup_unit_ball(amp * cst(r), dx.row(r), delta * dy.row(r));
            worst = std::max(worst, v);
        }
    };
    fold(fr.aux.x_const, fr.aux.x_dx, fr.aux.x_dy);
    if (fr.aux.u_const.size() > 0) fold(fr.aux.u_const, fr.aux.u_dx, fr.aux.u_dy);
    if (fr.aux.v_const.size() > 0) fold(fr.aux.v_const, fr.aux.v_dx, fr.aux.v_dy);
    out.aux_norm = worst;
    return out;
}

RenormalizedMap rescale(const JetPair& jp, const BiFocusSpectrum& spec, int k,
                        const RescalingScheme& scheme) {
    FirstReturnJet fr{jp, AuxBlock{}, k};
    fr.aux.u_const = Eigen::VectorXd::Zero(0);
    fr.aux.v_const = Eigen::VectorXd::Zero(0);
    return rescale(fr, spec, scheme);
}

JetPair limit_form(const RescalingScheme& scheme, const Jet2& M, const Jet2& N,
                   const std::vector<double>& lead_a_tilde,
                   const std::vector<double>& lead_b_tilde) {
    const int n = scheme.n;
    if (M.degree_cap() != n || N.degree_cap() != n) {
        throw ContractError("limit_form: parameter triangles must have cap n");
    }
    if (lead_a_tilde.size() != static_cast<std::size_t>(n) + 2 ||
        lead_b_tilde.size() != lead_a_tilde.size()) {
        throw ContractError("limit_form: lead rows must have n + 2 entries");
    }
    Jet2 j1(n + 1), j2(n + 1);
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= j; ++i) {
            j1.set_coeff(j, i, M.coeff(j, i));
            j2.set_coeff(j, i, N.coeff(j, i));
        }
    }
    if (scheme.variant == RescalingScheme::Variant::OrderForm) {
        for (int i = 0; i <= n + 1; ++i) {
            j1.set_coeff(n + 1, i, lead_a_tilde[static_cast<std::size_t>(i)]);
            j2.set_coeff(n + 1, i, lead_b_tilde[static_cast<std::size_t>(i)]);
        }
    }
    return JetPair(std::move(j1), std::move(j2));
}

ConvergenceTable convergence_report(const GlobalMapModel& gm,
                                    const BiFocusSpectrum& spec,
                                    const RescalingScheme& scheme,
                                    const std::vector<int>& k_list) {
    for (std::size_t t = 1; t < k_list.size(); ++t) {
        if (k_list[t] <= k_list[t - 1]) {
            throw ContractError("convergence_report: k_list must be increasing");
        }
    }
    const int n = gm.order_cap();
    if (scheme.n != n) {
        throw ContractError("convergence_report: scheme order does not match the model");
    }
    const auto grid = disk_grid(41);

    ConvergenceTable table;
    table.rows.resize(k_list.size());
    // k rows are independent; assembly stays deterministic by index.
    parallel_for(static_cast<int>(k_list.size()), [&](int row_index) {
        const int k = k_list[static_cast<std::size_t>(row_index)];
        const FirstReturnJet fr = first_return_jet(gm, spec, k);
        const RenormalizedMap ren = rescale(fr, spec, scheme);

        // Limit parameters: the rescaled images of the model's own series
        // (rotated through the k unstable turns); the drift terms are exactly
        // what the comparison isolates.
        const double c = std::cos(k * spec.psi), s = std::sin(k * spec.psi);
        Jet2 M(n), N(n);
        for (int j = 0; j <= n; ++j) {
            const double inv_scale = 1.0 / scheme.param_scale(spec.gamma, j, k);
            if (!std::isfinite(inv_scale)) {
                throw DegenerateKError("convergence_report: parameter scale overflow");
            }
            for (int i = 0; i <= j; ++i) {
                const double mu = gm.mu.coeff(j, i), nu = gm.nu.coeff(j, i);
                M.set_coeff(j, i, (mu * c - nu * s) * inv_scale);
                N.set_coeff(j, i, (mu * s + nu * c) * inv_scale);
            }
        }
        std::vector<double> la(static_cast<std::size_t>(n) + 2),
            lb(static_cast<std::size_t>(n) + 2);
        for (std::size_t i = 0; i < la.size(); ++i) {
            la[i] = gm.lead_a[i] * c - gm.lead_b[i] * s;
            lb[i] = gm.lead_a[i] * s + gm.lead_b[i] * c;
        }
        const JetPair limit = limit_form(scheme, M, N, la, lb);

        double sup = 0.0;
        for (const auto& p : grid) {
            const double d1 = jet_eval(ren.jet.y1, p[0], p[1]) -
                              jet_eval(limit.y1, p[0], p[1]);
            const double d2 = jet_eval(ren.jet.y2, p[0], p[1]) -
                              jet_eval(limit.y2, p[0], p[1]);
            sup = std::max(sup, std::max(std::fabs(d1), std::fabs(d2)));
        }
        table.rows[static_cast<std::size_t>(row_index)] = ConvergenceRow{k, sup, ren.aux_norm};
    });
    for (std::size_t t = 1; t < table.rows.size(); ++t) {
        if (table.rows[t].sup_error > 1.1 * table.rows[t - 1].sup_error) {
            table.monotone_ok = false;
        }
    }
    return table;
}

UniversalResult universal_approx(const DiskMap& target, int n,
                                 const GlobalMapModel& gm,
                                 const BiFocusSpectrum& spec, int k) {
    if (n < 1) throw ContractError("universal_approx: n must be >= 1");
    if (gm.order_cap() != n) {
        throw ContractError("universal_approx: model order_cap must equal n");
    }
    const auto grid = disk_grid(21);
    const int n_slots = (n + 1) * (n + 2) / 2;
    const int rows = static_cast<int>(grid.size());

    Eigen::MatrixXd design(rows, n_slots);
    Eigen::VectorXd t1(rows), t2(rows);
    for (int r = 0; r < rows; ++r) {
        const double y1 = grid[static_cast<std::size_t>(r)][0];
        const double y2 = grid[static_cast<std::size_t>(r)][1];
        int col = 0;
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= j; ++i, ++col) {
                design(r, col) = std::pow(y1, j - i) * std::pow(y2, i);
            }
        }
        const auto tv = target(y1, y2);
        if (!std::isfinite(tv[0]) || !std::isfinite(tv[1])) {
            throw ContractError("universal_approx: target is not finite on the disk");
        }
        t1(r) = tv[0];
        t2(r) = tv[1];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < n_slots) {
        throw IllPosedError("universal_approx: fit matrix is rank-deficient");
    }
    const Eigen::VectorXd cm = qr.solve(t1);
    const Eigen::VectorXd cn = qr.solve(t2);

    UniversalResult res{Jet2(n), Jet2(n), 0.0, 0.0};
    {
        int col = 0;
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= j; ++i, ++col) {
                res.M.set_coeff(j, i, cm(col));
                res.N.set_coeff(j, i, cn(col));
            }
        }
    }
    const Eigen::VectorXd r1 = design * cm - t1;
    const Eigen::VectorXd r2 = design * cn - t2;
    res.fit_error = std::max(r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff());

    // Pull the fitted parameters back through the scaling into the model's
    // series at this k. The series constants absorb the x-channel and
    // source-point drift so the renormalized degree-<=n block lands exactly
    // on the fit.
    const RescalingScheme scheme = RescalingScheme::full_polynomial_form(n);
    const double c = std::cos(k * spec.psi), s = std::sin(k * spec.psi);
    const double gmk = std::exp(-k * std::log(spec.gamma));
    if (gmk < kUnderflowFloor) {
        throw DegenerateKError("universal_approx: gamma^-k underflows at k = " +
                               std::to_string(k));
    }
    GlobalMapModel tuned = gm;
    for (int j = 0; j <= n; ++j) {
        const double ps = scheme.param_scale(spec.gamma, j, k);
        check_scale(ps, k, "universal_approx");
        for (int i = 0; i <= j; ++i) {
            const double mt = ps * res.M.coeff(j, i); // rotated target
            const double nt = ps * res.N.coeff(j, i);
            if (mt != 0.0 && std::fabs(mt) < kUnderflowFloor) {
                throw DegenerateKError("universal_approx: parameter recovery underflow");
            }
            tuned.mu.set_coeff(j, i, c * mt + s * nt);
            tuned.nu.set_coeff(j, i, -s * mt + c * nt);
        }
    }
    {
        // Remove the built-in constant contributions of the return map.
        const double lk = std::pow(spec.lambda, k);
        const Eigen::Vector2d xk = lk * (rotation(k * spec.phi) * gm.x_plus);
        const Eigen::Vector2d a3xk = gm.a34 * xk;
        const Eigen::Vector2d yshift = gmk * (rotation(-k * spec.psi) * gm.y_minus);
        tuned.mu.set_coeff(0, 0, tuned.mu.coeff(0, 0) - a3xk(0) + yshift(0));
        tuned.nu.set_coeff(0, 0, tuned.nu.coeff(0, 0) - a3xk(1) + yshift(1));
    }

    const FirstReturnJet fr = first_return_jet(tuned, spec, k);
    const RenormalizedMap ren = rescale(fr, spec, scheme);
    double sup = 0.0;
    for (const auto& p : grid) {
        const auto tv = target(p[0], p[1]);
        const double d1 = jet_eval(ren.jet.y1, p[0], p[1]) - tv[0];
        const double d2 = jet_eval(ren.jet.y2, p[0], p[1]) - tv[1];
        sup = std::max(sup, std::max(std::fabs(d1), std::fabs(d2)));
    }
    res.total_error = sup;
    return res;
}

} // namespace bifocus
