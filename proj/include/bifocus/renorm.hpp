#ifndef BIFOCUS_RENORM_HPP
#define BIFOCUS_RENORM_HPP

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bifocus/model.hpp"

namespace bifocus {

/// Uniform grid on [-1,1]^2 restricted to the closed unit disk.
std::vector<std::array<double, 2>> disk_grid(int per_side);

/// Coordinate/parameter rescaling for first-return maps near an order-n
/// tangency. OrderForm contracts Y by gamma^{-k/n} and keeps the lead row;
/// FullPolynomialForm contracts by gamma^{-2k/n} and sends the lead row to
/// zero, leaving a free polynomial of degree n. The transverse block
/// contracts by the same factor divided by delta_k = k^{-1/2}.
struct RescalingScheme {
    enum class Variant { OrderForm, FullPolynomialForm };

    Variant variant = Variant::OrderForm;
    int n = 1;

    static RescalingScheme order_form(int n);
    static RescalingScheme full_polynomial_form(int n);

    double delta(int k) const;
    /// Contraction factor applied to (Y1, Y2).
    double y_scale(double gamma, int k) const;
    /// Factor relating raw degree-j parameters to the renormalized ones:
    /// raw = param_scale(j, k) * renormalized.
    double param_scale(double gamma, int j, int k) const;
    /// Multiplier applied to a degree-j jet coefficient by the rescaling.
    double coeff_factor(double gamma, int j, int k) const;
};

/// Affine dependence of the transverse block on the strip coordinates,
/// before rescaling: value = constant + d_dx * X + d_dy * Y per row family.
struct AuxBlock {
    Eigen::Vector2d x_const = Eigen::Vector2d::Zero();
    Eigen::Matrix2d x_dx = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d x_dy = Eigen::Matrix2d::Zero();
    Eigen::VectorXd u_const;
    Eigen::MatrixXd u_dx;
    Eigen::MatrixXd u_dy;
    Eigen::VectorXd v_const;
    Eigen::MatrixXd v_dx;
    Eigen::MatrixXd v_dy;
};

struct FirstReturnJet {
    JetPair jet; // (Ybar1, Ybar2) as polynomials in Y, cap n + 1
    AuxBlock aux;
    int k = 0;
};

/// Exact first-return tangent jet of the k-round return map near the
/// tangency, in the shifted strip coordinates Y = y_k - y_minus. Includes the
/// k-dependent constant drift (the image of the source point) and the
/// x-channel terms. Throws DegenerateKError when gamma^-k underflows.
FirstReturnJet first_return_jet(const GlobalMapModel& gm, const BiFocusSpectrum& spec,
                                int k);

struct RenormalizedMap {
    int k = 0;
    RescalingScheme scheme;
    JetPair jet;     // rescaled (Ybar1, Ybar2), cap n + 1
    double aux_norm; // sup of the rescaled transverse block over the unit ball
};

RenormalizedMap rescale(const FirstReturnJet& fr, const BiFocusSpectrum& spec,
                        const RescalingScheme& scheme);
/// JetPair-only variant (no transverse data): aux_norm is reported as zero.
RenormalizedMap rescale(const JetPair& jp, const BiFocusSpectrum& spec, int k,
                        const RescalingScheme& scheme);

/// The limiting polynomial map of the rescaled family: parameter triangle
/// (M, N) of cap n plus, under OrderForm, the rotated lead row.
JetPair limit_form(const RescalingScheme& scheme, const Jet2& M, const Jet2& N,
                   const std::vector<double>& lead_a_tilde,
                   const std::vector<double>& lead_b_tilde);

struct ConvergenceRow {
    int k;
    double sup_error;
    double aux_norm;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool monotone_ok = true; // non-increasing within a 1.1 factor
};

/// For each k: rescaled first-return jet against the limit form whose
/// parameters are the rescaled images of the model's own series coefficients.
/// The sup is taken on a 41 x 41 grid over the closed unit disk, so the error
/// is exactly the rescaled k-drift of the constant rows.
ConvergenceTable convergence_report(const GlobalMapModel& gm,
                                    const BiFocusSpectrum& spec,
                                    const RescalingScheme& scheme,
                                    const std::vector<int>& k_list);

using DiskMap = std::function<std::array<double, 2>(double, double)>;

struct UniversalResult {
    Jet2 M;
    Jet2 N;
    double fit_error;   // sup residual of the degree-n fit on the 21x21 grid
    double total_error; // sup |renormalized iteration - target| on the grid
};

/// Universal-dynamics approximation step at desk scale: least-squares fit of
/// the target by a degree-n pair on a 21 x 21 disk grid, pull the
/// coefficients back through the FullPolynomialForm scaling into the model's
/// series at the given k, rebuild the renormalized return map, and measure
/// the residual.
UniversalResult universal_approx(const DiskMap& target, int n,
                                 const GlobalMapModel& gm,
                                 const BiFocusSpectrum& spec, int k);

} // namespace bifocus

#endif
