#include "bifocus/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bifocus {

namespace {

constexpr double kGenericityThreshold = 1e-9;

bool finite_mat(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.allFinite();
}

double row_norm_product(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    double p = 1.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) p *= m.row(r).norm();
    return p;
}

} // namespace

bool rationally_independent(double phi, double psi) {
    constexpr int kRange = 8;
    constexpr double kTol = 1e-6;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int k1 = -kRange; k1 <= kRange; ++k1) {
        for (int k2 = -kRange; k2 <= kRange; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const double r = (k1 * phi + k2 * psi) / two_pi;
            if (std::fabs(r - std::round(r)) < kTol) return false;
        }
    }
    return true;
}

Eigen::Matrix2d rotation(double theta) {
    Eigen::Matrix2d r;
    const double c = std::cos(theta), s = std::sin(theta);
    r << c, -s, s, c;
    return r;
}

BiFocusSpectrum::BiFocusSpectrum(double lambda_, double gamma_, double phi_,
                                 double psi_, double lambda_hat_, double gamma_hat_,
                                 std::vector<double> stable_nl,
                                 std::vector<double> unstable_nl)
    : lambda(lambda_),
      gamma(gamma_),
      phi(phi_),
      psi(psi_),
      lambda_hat(lambda_hat_),
      gamma_hat(gamma_hat_),
      stable_nonleading(std::move(stable_nl)),
      unstable_nonleading(std::move(unstable_nl)) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw ContractError("BiFocusSpectrum: lambda must lie in (0,1)");
    }
    if (!(gamma > 1.0)) {
        throw ContractError("BiFocusSpectrum: gamma must exceed 1");
    }
    if (!(lambda * gamma < 1.0)) {
        throw ContractError("BiFocusSpectrum: lambda*gamma < 1 required");
    }
    if (!(lambda_hat > 0.0 && lambda_hat < lambda)) {
        throw ContractError("BiFocusSpectrum: need 0 < lambda_hat < lambda");
    }
    if (!(gamma_hat > gamma)) {
        throw ContractError("BiFocusSpectrum: need gamma_hat > gamma");
    }
    if (!(gamma * gamma > gamma_hat)) {
        throw ContractError("BiFocusSpectrum: need gamma^2 > gamma_hat");
    }
    const double pi = std::numbers::pi;
    auto on_axis = [&](double ang) {
        const double m = std::fabs(std::remainder(ang, pi));
        return m < 1e-12;
    };
    if (on_axis(phi) || on_axis(psi)) {
        throw ContractError("BiFocusSpectrum: phi, psi must avoid 0 and pi (mod pi)");
    }
    if (!rationally_independent(phi, psi)) {
        throw ContractError("BiFocusSpectrum: phi, psi fail the rational-independence screen");
    }
    for (double m : stable_nonleading) {
        if (!(std::fabs(m) < lambda)) {
            throw ContractError("BiFocusSpectrum: stable non-leading modulus must be < lambda");
        }
    }
    for (double m : unstable_nonleading) {
        if (!(std::fabs(m) > gamma)) {
            throw ContractError("BiFocusSpectrum: unstable non-leading modulus must be > gamma");
        }
    }
}

BiFocusSpectrum BiFocusSpectrum::defaults() {
    return BiFocusSpectrum(0.3, 2.0, 1.0, std::sqrt(2.0), 0.2, 3.0);
}

LocalCrossImage local_cross_apply(const BiFocusSpectrum& spec, int k,
                                  const Eigen::Vector2d& x0,
                                  const Eigen::Vector2d& yk,
                                  const Eigen::VectorXd& u0,
                                  const Eigen::VectorXd& vk) {
    if (k < 1) {
        throw ContractError("local_cross_apply: k must be >= 1");
    }
    LocalCrossImage out;
    out.xk = std::pow(spec.lambda, k) * (rotation(k * spec.phi) * x0);
    out.y0 = std::pow(spec.gamma, -k) * (rotation(-k * spec.psi) * yk);
    out.uk = Eigen::VectorXd::Zero(u0.size());
    out.v0 = Eigen::VectorXd::Zero(vk.size());
    return out;
}

GlobalMapModel::GlobalMapModel(int order_cap_, int dim_u_, int dim_v_)
    : x_plus(Eigen::Vector2d::Zero()),
      u_plus(Eigen::VectorXd::Zero(dim_u_)),
      y_minus(Eigen::Vector2d::Zero()),
      v_minus(Eigen::VectorXd::Zero(dim_v_)),
      a12(Eigen::Matrix2d::Zero()),
      a34(Eigen::Matrix2d::Zero()),
      a5(Eigen::MatrixXd::Zero(dim_u_, 2)),
      a6(Eigen::MatrixXd::Zero(dim_v_, 2)),
      b12(Eigen::Matrix2d::Zero()),
      b5(Eigen::MatrixXd::Zero(dim_u_, 2)),
      b6(Eigen::MatrixXd::Zero(dim_v_, 2)),
      c_x(Eigen::MatrixXd::Zero(2, dim_u_)),
      c_y(Eigen::MatrixXd::Zero(2, dim_u_)),
      c_u(Eigen::MatrixXd::Zero(dim_u_, dim_u_)),
      c_v(Eigen::MatrixXd::Zero(dim_v_, dim_u_)),
      d_x(Eigen::MatrixXd::Zero(2, dim_v_)),
      d_y(Eigen::MatrixXd::Zero(2, dim_v_)),
      d_u(Eigen::MatrixXd::Zero(dim_u_, dim_v_)),
      d6(Eigen::MatrixXd::Identity(dim_v_, dim_v_)),
      mu(order_cap_),
      nu(order_cap_),
      lead_a(static_cast<std::size_t>(order_cap_) + 2, 0.0),
      lead_b(static_cast<std::size_t>(order_cap_) + 2, 0.0) {
    if (order_cap_ < 1) {
        throw ContractError("GlobalMapModel: order_cap must be >= 1");
    }
    if (dim_u_ < 0 || dim_v_ < 0) {
        throw ContractError("GlobalMapModel: dims must be >= 0");
    }
}

GlobalMapModel GlobalMapModel::make_default(int order_cap_, int dim_u_, int dim_v_) {
    GlobalMapModel gm(order_cap_, dim_u_, dim_v_);
    gm.a12 = Eigen::Matrix2d::Identity();
    gm.a34 = Eigen::Matrix2d::Identity();
    gm.b12 = Eigen::Matrix2d::Identity();
    gm.lead_a[0] = 1.0;
    return gm;
}

void GlobalMapModel::check_invariants() const {
    const int du = dim_u(), dv = dim_v();
    auto shape = [&](const Eigen::MatrixXd& m, int r, int c, const char* name) {
        if (m.rows() != r || m.cols() != c) {
            throw ContractError(std::string("GlobalMapModel: bad shape for ") + name);
        }
    };
    shape(a5, du, 2, "a5");
    shape(a6, dv, 2, "a6");
    shape(b5, du, 2, "b5");
    shape(b6, dv, 2, "b6");
    shape(c_x, 2, du, "c_x");
    shape(c_y, 2, du, "c_y");
    shape(c_u, du, du, "c_u");
    shape(c_v, dv, du, "c_v");
    shape(d_x, 2, dv, "d_x");
    shape(d_y, 2, dv, "d_y");
    shape(d_u, du, dv, "d_u");
    shape(d6, dv, dv, "d6");
    if (lead_a.size() != static_cast<std::size_t>(order_cap()) + 2 ||
        lead_b.size() != lead_a.size()) {
        throw ContractError("GlobalMapModel: lead rows must have order_cap + 2 entries");
    }
    if (!finite_mat(a12) || !finite_mat(a34) || !finite_mat(b12) ||
        !finite_mat(a5) || !finite_mat(a6) || !finite_mat(b5) || !finite_mat(b6) ||
        !finite_mat(c_x) || !finite_mat(c_y) || !finite_mat(c_u) || !finite_mat(c_v) ||
        !finite_mat(d_x) || !finite_mat(d_y) || !finite_mat(d_u) || !finite_mat(d6) ||
        !x_plus.allFinite() || !y_minus.allFinite() || !u_plus.allFinite() ||
        !v_minus.allFinite() || !mu.all_finite() || !nu.all_finite()) {
        throw ContractError("GlobalMapModel: non-finite entry");
    }
    double lead_sum = 0.0;
    for (std::size_t t = 0; t < lead_a.size(); ++t) {
        if (!std::isfinite(lead_a[t]) || !std::isfinite(lead_b[t])) {
            throw ContractError("GlobalMapModel: non-finite lead coefficient");
        }
        lead_sum += std::fabs(lead_a[t]) + std::fabs(lead_b[t]);
    }
    if (!(lead_sum > 0.0)) {
        throw ContractError("GlobalMapModel: lead row is identically zero");
    }
}

GlobalMapModel GlobalMapModel::swapped_y_components() const {
    GlobalMapModel out = *this;
    out.a34.row(0) = a34.row(1);
    out.a34.row(1) = a34.row(0);
    if (dim_u() > 0) {
        out.c_y.row(0) = c_y.row(1);
        out.c_y.row(1) = c_y.row(0);
    }
    if (dim_v() > 0) {
        out.d_y.row(0) = d_y.row(1);
        out.d_y.row(1) = d_y.row(0);
    }
    out.mu = nu;
    out.nu = mu;
    out.lead_a = lead_b;
    out.lead_b = lead_a;
    return out;
}

PhasePoint global_apply(const GlobalMapModel& gm, const PhasePoint& p) {
    if (p.u.size() != gm.dim_u() || p.v.size() != gm.dim_v()) {
        throw ContractError("global_apply: phase point dims do not match the model");
    }
    const Eigen::Vector2d Y = p.y - gm.y_minus;

    // Cross-form v-line, solved for vbar by fixed-point sweeps. The model is
    // linear in vbar with invertible d6, so one sweep lands on the solution;
    // the loop guards the contract.
    const int dv = gm.dim_v();
    Eigen::VectorXd vbar = Eigen::VectorXd::Zero(dv);
    if (dv > 0) {
        const Eigen::VectorXd rhs =
            (p.v - gm.v_minus) - gm.a6 * p.x - gm.b6 * Y - gm.c_v * p.u;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(gm.d6);
        const double scale = std::max(1.0, rhs.norm());
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            const Eigen::VectorXd next = lu.solve(rhs);
            if (!next.allFinite()) break;
            if ((next - vbar).norm() <= 1e-12 * std::max(scale, next.norm())) {
                vbar = next;
                converged = true;
                break;
            }
            vbar = next;
        }
        if (!converged) {
            throw ConvergenceError("global_apply: vbar solve failed to contract");
        }
        const double resid = (gm.d6 * vbar - rhs).norm();
        if (!(resid <= 1e-12 * std::max(1.0, rhs.norm()))) {
            throw ConvergenceError("global_apply: vbar residual did not reach 1e-12");
        }
    }

    // mu/nu series plus the lead row, evaluated at Y.
    const int n = gm.order_cap();
    double ser1 = jet_eval(gm.mu, Y(0), Y(1));
    double ser2 = jet_eval(gm.nu, Y(0), Y(1));
    for (int i = 0; i <= n + 1; ++i) {
        const double mono = std::pow(Y(0), n + 1 - i) * std::pow(Y(1), i);
        ser1 += gm.lead_a[static_cast<std::size_t>(i)] * mono;
        ser2 += gm.lead_b[static_cast<std::size_t>(i)] * mono;
    }

    PhasePoint out;
    out.x = gm.x_plus + gm.a12 * p.x + gm.b12 * Y + gm.c_x * p.u + gm.d_x * vbar;
    out.y = gm.a34 * p.x + Eigen::Vector2d(ser1, ser2) + gm.c_y * p.u + gm.d_y * vbar;
    out.u = gm.u_plus + gm.a5 * p.x + gm.b5 * Y + gm.c_u * p.u + gm.d_u * vbar;
    out.v = vbar;
    return out;
}

JetPair global_tangent_jet(const GlobalMapModel& gm) {
    const int n = gm.order_cap();
    Jet2 j1(n + 1), j2(n + 1);
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= j; ++i) {
            j1.set_coeff(j, i, gm.mu.coeff(j, i));
            j2.set_coeff(j, i, gm.nu.coeff(j, i));
        }
    }
    for (int i = 0; i <= n + 1; ++i) {
        j1.set_coeff(n + 1, i, gm.lead_a[static_cast<std::size_t>(i)]);
        j2.set_coeff(n + 1, i, gm.lead_b[static_cast<std::size_t>(i)]);
    }
    return JetPair(std::move(j1), std::move(j2));
}

GenericityReport validate_genericity(const GlobalMapModel& gm) {
    GenericityReport rep;
    rep.det_a34 = gm.a34.determinant();
    rep.det_b12 = gm.b12.determinant();
    rep.det_d6 = gm.dim_v() == 0 ? 1.0 : gm.d6.determinant();

    const double na = row_norm_product(gm.a34);
    const double nb = row_norm_product(gm.b12);
    const double nd = gm.dim_v() == 0 ? 1.0 : row_norm_product(gm.d6);

    rep.rel_a34 = na > 0.0 ? std::fabs(rep.det_a34) / na : 0.0;
    rep.rel_b12 = nb > 0.0 ? std::fabs(rep.det_b12) / nb : 0.0;
    rep.rel_d6 = nd > 0.0 ? std::fabs(rep.det_d6) / nd : 0.0;

    rep.pass_a34 = rep.rel_a34 > kGenericityThreshold;
    rep.pass_b12 = rep.rel_b12 > kGenericityThreshold;
    rep.pass_d6 = rep.rel_d6 > kGenericityThreshold;
    return rep;
}

} // namespace bifocus
