// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. Tolerances and runtime budgets are pinned in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bifocus/raiser.hpp"
#include "bifocus/reference.hpp"
#include "bifocus/renorm.hpp"
#include "oracles.hpp"

using namespace bifocus;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool ok, double seconds,
            const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%.2fs) %s\n", ok ? "PASS" : "FAIL", number,
                name.c_str(), seconds, detail.c_str());
    if (!ok) ++failures;
}

void run(int number, const std::string& name, double budget_seconds,
         const std::function<bool(std::string&)>& body) {
    const auto t0 = clock_type::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    const double seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
    if (budget_seconds > 0.0 && seconds > budget_seconds) {
        ok = false;
        detail += " [over budget " + std::to_string(budget_seconds) + "s]";
    }
    report(number, name, ok, seconds, detail);
}

// ---- 1. jet oracle equivalence ---------------------------------------------

bool jet_oracle_equivalence(std::string& detail) {
    oracles::TestRng rng(101);
    const int cap = 10;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Jet2 a = oracles::random_jet(rng, cap, 5);
        Jet2 b = oracles::random_jet(rng, cap, 5);
        const oracles::Poly pa = oracles::Poly::from_jet(a);
        const oracles::Poly pb = oracles::Poly::from_jet(b);

        const Jet2 prod = jet_mul(a, b);
        const Jet2 prod_want = pa.mul(pb).truncate(cap);

        b.set_coeff(0, 0, 0.0);
        Jet2 b2 = oracles::random_jet(rng, cap, 5);
        b2.set_coeff(0, 0, 0.0);
        const Jet2 comp = jet_compose(a, JetPair(b, b2));
        const Jet2 comp_want =
            oracles::Poly::compose(pa, oracles::Poly::from_jet(b), oracles::Poly::from_jet(b2))
                .truncate(cap);

        const double scale = std::max({1.0, prod_want.max_abs_coeff(),
                                       comp_want.max_abs_coeff()});
        for (int d = 0; d <= cap; ++d) {
            for (int i = 0; i <= d; ++i) {
                worst = std::max(worst,
                                 std::fabs(prod.coeff(d, i) - prod_want.coeff(d, i)) / scale);
                worst = std::max(worst,
                                 std::fabs(comp.coeff(d, i) - comp_want.coeff(d, i)) / scale);
            }
        }
    }
    detail = "worst relative deviation " + std::to_string(worst);
    return worst <= 1e-12;
}

// ---- 2. determinant identity ------------------------------------------------

bool determinant_identity(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();
    oracles::TestRng rng(102);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        GlobalMapModel g1 = GlobalMapModel::make_default(1, 0, 0);
        GlobalMapModel g2 = GlobalMapModel::make_default(1, 0, 0);
        g1.b12 << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
            rng.uniform(-2, 2);
        g2.a34 << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
            rng.uniform(-2, 2);
        const int k = rng.integer(1, 400);
        const auto [lhs, rhs] =
            s_determinant_identity(rotated_lead(g1, g2, spec, k), g1, g2);
        worst = std::max(worst, std::fabs(lhs - rhs) / std::max(1e-9, std::fabs(rhs)));
    }
    detail = "worst relative deviation " + std::to_string(worst);
    return worst <= 1e-10;
}

// ---- 3. closed-form solver ground truth --------------------------------------

std::pair<double, double> printed_system_residual(const RotatedLead& rl, double d_m,
                                                  double e_m, int n, int m, double M,
                                                  double N) {
    const double at = rl.a_tilde[static_cast<std::size_t>(m)];
    const double bt = rl.b_tilde[static_cast<std::size_t>(m)];
    const double head = std::pow(M, n + 2 - m) * std::pow(N, m + 1);
    return {head * d_m + rl.s[0] * N * at + rl.s[1] * M * bt,
            head * e_m + rl.s[2] * N * at + rl.s[3] * M * bt};
}

bool solver_ground_truth(std::string& detail) {
    // Reference configuration
    RotatedLead ref;
    ref.k = 1;
    ref.s = {1.0, 0.0, 0.0, 1.0};
    ref.a_tilde = {1.0, 1.0, 1.0};
    ref.b_tilde = {1.0, 1.0, 1.0};
    const ClosedForm cf = solve_raise_closed_form(ref, 1.0, 1.0, 1, 0);
    if (cf.m10 != -1.0 || cf.n11 != -1.0) {
        detail = "reference solution not reproduced: M = " + std::to_string(cf.m10) +
                 ", N = " + std::to_string(cf.n11);
        return false;
    }
    const auto [r1, r2] = printed_system_residual(ref, 1.0, 1.0, 1, 0, cf.m10, cf.n11);
    if (r1 != 0.0 || r2 != 0.0) {
        detail = "reference residual nonzero";
        return false;
    }

    // 1000 random admissible configurations
    oracles::TestRng rng(103);
    double worst = 0.0;
    int done = 0;
    while (done < 1000) {
        const int n = rng.integer(1, 4);
        const int m = rng.integer(0, n + 1);
        RotatedLead rl;
        rl.k = 1;
        rl.s = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                rng.uniform(-2, 2)};
        const double at = rng.uniform(0.1, 2.0) * (rng.unit() < 0.5 ? -1.0 : 1.0);
        const double bt = rng.uniform(0.1, 2.0) * (rng.unit() < 0.5 ? -1.0 : 1.0);
        rl.a_tilde.assign(static_cast<std::size_t>(n) + 2, at);
        rl.b_tilde.assign(static_cast<std::size_t>(n) + 2, bt);
        const double d = rng.uniform(0.1, 2.0) * (rng.unit() < 0.5 ? -1.0 : 1.0);
        const double e = rng.uniform(0.1, 2.0) * (rng.unit() < 0.5 ? -1.0 : 1.0);
        try {
            const ClosedForm sol = solve_raise_closed_form(rl, d, e, n, m);
            const auto [q1, q2] =
                printed_system_residual(rl, d, e, n, m, sol.m10, sol.n11);
            const double scale = std::max(
                1.0, std::fabs(std::pow(sol.m10, n + 2 - m) * std::pow(sol.n11, m + 1) * d));
            worst = std::max(worst, std::max(std::fabs(q1), std::fabs(q2)) / scale);
            ++done;
        } catch (const BranchFlipSignal&) {
        } catch (const ContractError&) {
        }
    }
    detail = "worst scaled residual " + std::to_string(worst);
    return worst <= 1e-12;
}

// ---- 4. index raising across every admissible k ------------------------------

bool index_raising(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();
    const auto models = gen_reference(0, 2, 1);
    const TangencyIndex base = TangencyIndex::make(1, 0);
    const KSelection sel = select_k_sequence(models[0], models[1], spec, 0, 100000, 5, 200);

    int raised = 0;
    int even_hits = 0, odd_hits = 0;
    for (int k : sel.all()) {
        RaiseSolution sol = make_annihilating_solution(models[0], models[1], spec, k, 1, 0);
        sol = newton_polish(models[0], spec, k, models[1], sol);
        const JetPair comp = compose_new_global(models[0], spec, k, models[1], sol);
        // detector on the polished composite: strictly above (1, 0)
        const TangencyIndex idx = tangency_index(comp, 1e-9);
        if (!(base < idx)) {
            detail = "composite at k = " + std::to_string(k) +
                     " did not raise the index (got " + idx.str() + ")";
            return false;
        }
        ++raised;
    }
    // one full raise per branch lands exactly on (1,1) or (2,0)
    for (int which = 0; which < 2; ++which) {
        const std::vector<int>& branch = which == 0 ? sel.even_branch : sel.odd_branch;
        for (int k : branch) {
            try {
                const RaiseOutcome out = raise_suborder(models[0], models[1], spec, k, k + 1);
                if (out.index == TangencyIndex::make(1, 1) ||
                    out.index == TangencyIndex::make(2, 0)) {
                    (which == 0 ? even_hits : odd_hits) += 1;
                    break;
                }
            } catch (const NumericError&) {
            }
        }
    }
    detail = std::to_string(raised) + " admissible k all raised; branch hits " +
             std::to_string(even_hits) + "/" + std::to_string(odd_hits);
    return raised > 0 && even_hits >= 1 && odd_hits >= 1;
}

// ---- 5. order raising and count bookkeeping ----------------------------------

bool order_raising(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();

    TangencyBag bag8(gen_reference(42, 8, 1), spec);
    const RaiseOutcome r8 = raise_order(bag8);
    const TangencyIndex check8 = tangency_index(global_tangent_jet(r8.model));
    if (check8 != TangencyIndex::make(2, 0)) {
        detail = "8 x (1,0) gave " + check8.str();
        return false;
    }

    TangencyBag bag16(gen_reference(7, 16, 2), spec);
    const RaiseOutcome r16 = raise_order(bag16);
    const TangencyIndex check16 = tangency_index(global_tangent_jet(r16.model));
    if (check16 != TangencyIndex::make(3, 0)) {
        detail = "16 x (2,0) gave " + check16.str();
        return false;
    }

    for (int N = 1; N <= 6; ++N) {
        std::uint64_t prod = 1;
        for (int j = 3; j <= N + 1; ++j) prod *= (std::uint64_t{1} << j);
        if (required_count(N) != prod) {
            detail = "count mismatch at N = " + std::to_string(N);
            return false;
        }
    }
    detail = "(2,0) and (3,0) detector-verified; counts match the recursion";
    return true;
}

// ---- 6. end-to-end order 3 ----------------------------------------------------

bool end_to_end_order3(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();
    TangencyBag bag(gen_reference(1, 128, 1), spec);
    const RaiseOutcome res = build_order_n(bag, 3);
    const TangencyIndex check = tangency_index(global_tangent_jet(res.model));
    detail = "reached " + check.str() + " from 128 seeds";
    return check == TangencyIndex::make(3, 0);
}

// ---- 7. renormalization convergence -------------------------------------------

bool renorm_convergence(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();
    const GlobalMapModel gm = reference_renorm_model();
    const ConvergenceTable table = convergence_report(
        gm, spec, RescalingScheme::order_form(2), {10, 20, 30, 40, 50, 60});
    const double first = table.rows.front().sup_error;
    const double last = table.rows.back().sup_error;
    bool aux_decreasing = true;
    for (std::size_t t = 1; t < table.rows.size(); ++t) {
        aux_decreasing = aux_decreasing && table.rows[t].aux_norm < table.rows[t - 1].aux_norm;
    }
    detail = "sup-error ratio " + std::to_string(first / last) + ", aux " +
             (aux_decreasing ? "strictly decreasing" : "NOT decreasing");
    return first >= 10.0 * last && aux_decreasing && table.monotone_ok;
}

// ---- 8. lead-block conservation -----------------------------------------------

bool lead_conservation(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();
    oracles::TestRng rng(108);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.integer(1, 3);
        const GlobalMapModel gm =
            make_reference_model(5000 + static_cast<std::uint64_t>(trial), n);
        const int k = rng.integer(5, 40);
        const FirstReturnJet fr = first_return_jet(gm, spec, k);
        const RenormalizedMap ren = rescale(fr, spec, RescalingScheme::order_form(n));
        const double c = std::cos(k * spec.psi), s = std::sin(k * spec.psi);
        for (int i = 0; i <= n + 1; ++i) {
            const double at = gm.lead_a[static_cast<std::size_t>(i)] * c -
                              gm.lead_b[static_cast<std::size_t>(i)] * s;
            const double bt = gm.lead_a[static_cast<std::size_t>(i)] * s +
                              gm.lead_b[static_cast<std::size_t>(i)] * c;
            worst = std::max(worst, std::fabs(ren.jet.y1.coeff(n + 1, i) - at));
            worst = std::max(worst, std::fabs(ren.jet.y2.coeff(n + 1, i) - bt));
        }
    }
    detail = "worst lead deviation " + std::to_string(worst);
    return worst <= 1e-10;
}

// ---- 9. universal dynamics -----------------------------------------------------

bool universal_dynamics(std::string& detail) {
    const auto spec = BiFocusSpectrum::defaults();
    const GlobalMapModel gm = reference_renorm_model();

    // quadratic disk-map target reproduced by some k <= 60
    const DiskMap henon = [](double y1, double y2) {
        return std::array<double, 2>{1.0 - 1.4 * y1 * y1 + y2, 0.3 * y1};
    };
    double best = 1e300;
    for (int k : {20, 30, 40, 50, 60}) {
        const UniversalResult res = universal_approx(henon, 2, gm, spec, k);
        best = std::min(best, res.total_error);
    }
    if (!(best <= 1e-3)) {
        detail = "quadratic target total_error " + std::to_string(best);
        return false;
    }

    // random degree-4 target against an independent dense least-squares oracle
    oracles::TestRng rng(109);
    Jet2 t1(4), t2(4);
    for (int d = 0; d <= 4; ++d) {
        for (int i = 0; i <= d; ++i) {
            t1.set_coeff(d, i, rng.uniform(-0.5, 0.5));
            t2.set_coeff(d, i, rng.uniform(-0.5, 0.5));
        }
    }
    const DiskMap quartic = [&](double y1, double y2) {
        return std::array<double, 2>{jet_eval(t1, y1, y2), jet_eval(t2, y1, y2)};
    };
    const UniversalResult res = universal_approx(quartic, 2, gm, spec, 40);

    // oracle: normal-equations fit on a denser grid, sup-residual on the
    // same 21 x 21 evaluation grid
    const auto dense = disk_grid(41);
    const int slots = 6; // degree <= 2
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(slots, slots);
    Eigen::VectorXd atb1 = Eigen::VectorXd::Zero(slots), atb2 = Eigen::VectorXd::Zero(slots);
    auto design_row = [&](double y1, double y2) {
        Eigen::VectorXd row(slots);
        int col = 0;
        for (int d = 0; d <= 2; ++d) {
            for (int i = 0; i <= d; ++i, ++col) {
                row(col) = std::pow(y1, d - i) * std::pow(y2, i);
            }
        }
        return row;
    };
    for (const auto& p : dense) {
        const Eigen::VectorXd row = design_row(p[0], p[1]);
        const auto tv = quartic(p[0], p[1]);
        ata += row * row.transpose();
        atb1 += tv[0] * row;
        atb2 += tv[1] * row;
    }
    const Eigen::VectorXd c1 = ata.ldlt().solve(atb1);
    const Eigen::VectorXd c2 = ata.ldlt().solve(atb2);
    double oracle_sup = 0.0;
    for (const auto& p : disk_grid(21)) {
        const Eigen::VectorXd row = design_row(p[0], p[1]);
        const auto tv = quartic(p[0], p[1]);
        oracle_sup = std::max(oracle_sup, std::fabs(row.dot(c1) - tv[0]));
        oracle_sup = std::max(oracle_sup, std::fabs(row.dot(c2) - tv[1]));
    }
    const double rel = std::fabs(res.total_error - oracle_sup) / oracle_sup;
    detail = "quadratic best total_error " + std::to_string(best) +
             "; quartic total_error vs oracle rel " + std::to_string(rel);
    return rel <= 0.05;
}

} // namespace

int main() {
    run(1, "jet oracle equivalence", 5.0, jet_oracle_equivalence);
    run(2, "determinant identity", 1.0, determinant_identity);
    run(3, "closed-form solver ground truth", 0.0, solver_ground_truth);
    run(4, "index raising across admissible k", 30.0, index_raising);
    run(5, "order raising and count bookkeeping", 0.0, order_raising);
    run(6, "end-to-end order 3 at desk scale", 300.0, end_to_end_order3);
    run(7, "renormalization convergence", 10.0, renorm_convergence);
    run(8, "lead-block conservation", 0.0, lead_conservation);
    run(9, "universal dynamics approximation", 10.0, universal_dynamics);

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
