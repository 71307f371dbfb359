#ifndef BIFOCUS_MODEL_HPP
#define BIFOCUS_MODEL_HPP

#include <vector>

#include <Eigen/Dense>

#include "bifocus/errors.hpp"
#include "bifocus/jets.hpp"

namespace bifocus {

/// Screen used before trusting rotation-number searches: rejects angle pairs
/// (phi, psi) for which some small integer combination k1*phi + k2*psi is an
/// integer multiple of 2*pi (within tolerance).
bool rationally_independent(double phi, double psi);

/// Rotation by theta: [[cos, -sin], [sin, cos]].
Eigen::Matrix2d rotation(double theta);

/// Multipliers, angles and bound constants of a bi-focus periodic orbit.
/// Leading multipliers are lambda*e^{+-i phi} (stable) and gamma*e^{+-i psi}
/// (unstable). The constructor enforces lambda*gamma < 1, lambda_hat < lambda,
/// gamma_hat > gamma, gamma^2 > gamma_hat, the non-leading spectral bounds,
/// and the angle screen.
struct BiFocusSpectrum {
    double lambda;
    double gamma;
    double phi;
    double psi;
    double lambda_hat;
    double gamma_hat;
    std::vector<double> stable_nonleading;   // moduli, each < lambda
    std::vector<double> unstable_nonleading; // moduli, each > gamma

    BiFocusSpectrum(double lambda_, double gamma_, double phi_, double psi_,
                    double lambda_hat_, double gamma_hat_,
                    std::vector<double> stable_nl = {},
                    std::vector<double> unstable_nl = {});

    /// lambda = 0.3, gamma = 2, phi = 1, psi = sqrt(2), lambda_hat = 0.2,
    /// gamma_hat = 3.
    static BiFocusSpectrum defaults();
};

struct PhasePoint {
    Eigen::Vector2d x; // leading stable
    Eigen::Vector2d y; // leading unstable
    Eigen::VectorXd u; // non-leading stable
    Eigen::VectorXd v; // non-leading unstable
};

/// Image of k rounds of the local map in cross form (zero-remainder model):
/// xk = lambda^k R(k phi) x0, y0 = gamma^-k R(-k psi) yk, uk = 0, v0 = 0.
struct LocalCrossImage {
    Eigen::Vector2d xk;
    Eigen::Vector2d y0;
    Eigen::VectorXd uk;
    Eigen::VectorXd v0;
};

LocalCrossImage local_cross_apply(const BiFocusSpectrum& spec, int k,
                                  const Eigen::Vector2d& x0,
                                  const Eigen::Vector2d& yk,
                                  const Eigen::VectorXd& u0,
                                  const Eigen::VectorXd& vk);

/// Taylor-coefficient model of a global map carrying a neighborhood of the
/// source homoclinic point M- = (0, y_minus, 0, v_minus) onto a neighborhood
/// of the image homoclinic point M+ = (x_plus, 0, u_plus, 0). Row blocks:
///
///   xbar - x_plus  = a12 x + b12 Y + c_x u + d_x vbar
///   ybar           = a34 x + [mu, nu series in Y] + [lead row] + c_y u + d_y vbar
///   ubar - u_plus  = a5 x  + b5 Y  + c_u u + d_u vbar
///   v - v_minus    = a6 x  + b6 Y  + c_v u + d6 vbar
///
/// with Y = y - y_minus. mu/nu hold the triangular coefficients of total
/// degree <= order_cap; lead_a/lead_b hold the degree-(order_cap+1) row.
struct GlobalMapModel {
    Eigen::Vector2d x_plus;
    Eigen::VectorXd u_plus;
    Eigen::Vector2d y_minus;
    Eigen::VectorXd v_minus;

    Eigen::Matrix2d a12; // [[a11, a12], [a21, a22]]
    Eigen::Matrix2d a34; // [[a31, a32], [a41, a42]]
    Eigen::MatrixXd a5;  // dim_u x 2
    Eigen::MatrixXd a6;  // dim_v x 2
    Eigen::Matrix2d b12; // [[b11, b12], [b21, b22]]
    Eigen::MatrixXd b5;  // dim_u x 2
    Eigen::MatrixXd b6;  // dim_v x 2

    Eigen::MatrixXd c_x; // 2 x dim_u
    Eigen::MatrixXd c_y; // 2 x dim_u
    Eigen::MatrixXd c_u; // dim_u x dim_u
    Eigen::MatrixXd c_v; // dim_v x dim_u
    Eigen::MatrixXd d_x; // 2 x dim_v
    Eigen::MatrixXd d_y; // 2 x dim_v
    Eigen::MatrixXd d_u; // dim_u x dim_v
    Eigen::MatrixXd d6;  // dim_v x dim_v, invertible

    Jet2 mu;                    // cap = order_cap
    Jet2 nu;                    // cap = order_cap
    std::vector<double> lead_a; // size order_cap + 2
    std::vector<double> lead_b; // size order_cap + 2

    explicit GlobalMapModel(int order_cap, int dim_u = 0, int dim_v = 0);

    /// Identity a/b blocks, identity d6, zero couplings, lead_a[0] = 1.
    static GlobalMapModel make_default(int order_cap, int dim_u = 0, int dim_v = 0);

    int order_cap() const { return mu.degree_cap(); }
    int dim_u() const { return static_cast<int>(u_plus.size()); }
    int dim_v() const { return static_cast<int>(v_minus.size()); }

    /// Throws ContractError on shape mismatch, non-finite entries, or an
    /// identically zero lead row.
    void check_invariants() const;

    /// Relabels the two ybar components (mu<->nu, lead_a<->lead_b, a34 rows,
    /// c_y/d_y rows). Leaves order and genericity intact.
    GlobalMapModel swapped_y_components() const;
};

PhasePoint global_apply(const GlobalMapModel& gm, const PhasePoint& p);

/// The (ybar1, ybar2) components restricted to x = 0, u = 0, vbar = 0, as
/// polynomials in Y with cap order_cap + 1.
JetPair global_tangent_jet(const GlobalMapModel& gm);

struct GenericityReport {
    double det_a34 = 0.0;
    double det_b12 = 0.0;
    double det_d6 = 0.0;
    double rel_a34 = 0.0; // |det| / product of row norms
    double rel_b12 = 0.0;
    double rel_d6 = 0.0;
    bool pass_a34 = false;
    bool pass_b12 = false;
    bool pass_d6 = false;
    bool pass() const { return pass_a34 && pass_b12 && pass_d6; }
};

/// Determinant tests for the transversality conditions; pass when
/// |det| > 1e-9 relative to the product of row norms.
GenericityReport validate_genericity(const GlobalMapModel& gm);

} // namespace bifocus

#endif
