#ifndef BIFOCUS_RAISER_HPP
#define BIFOCUS_RAISER_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "bifocus/model.hpp"
#include "bifocus/tangency.hpp"

namespace bifocus {

/// Lead rows of the first map rotated through k unstable turns, plus the
/// S-constants coupling the second map's a34 block to the first map's b12
/// block rotated through k stable turns:
///   [S1 S2; S3 S4] = a34_hat * R(k phi) * b12.
struct RotatedLead {
    int k = 0;
    std::vector<double> a_tilde; // (A_i cos - B_i sin)(k psi)
    std::vector<double> b_tilde; // (A_i sin + B_i cos)(k psi)
    std::array<double, 4> s{};   // S1, S2, S3, S4
};

RotatedLead rotated_lead(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                         const BiFocusSpectrum& spec, int k);

/// lhs = S1 S4 - S2 S3; rhs = det(a34 of gm2) * det(b12 of gm1). Equal for
/// every k since the rotation factors drop out of the determinant.
std::pair<double, double> s_determinant_identity(const RotatedLead& rl,
                                                 const GlobalMapModel& gm1,
                                                 const GlobalMapModel& gm2);

struct KSelection {
    std::vector<int> even_branch; // A~_m > 0 and B~_m > 0
    std::vector<int> odd_branch;  // A~_m < 0 and B~_m < 0
    std::vector<int> all() const; // merged, increasing
    bool empty() const { return even_branch.empty() && odd_branch.empty(); }
};

/// Scans [k_min, k_max] for k with sign-definite rotated lead pair and the
/// two denominator combinations |S2 Em - S4 Dm|, |S1 Em - S3 Dm| above the
/// floor 1e-6 (relative to the coefficient scale). Keeps up to `count` hits
/// per branch. Throws SearchExhaustedError when both branches come up empty.
KSelection select_k_sequence(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                             const BiFocusSpectrum& spec, int m, int count,
                             int k_min, int k_max);

/// Scaled parameters solving the leading-order suborder-raising system by
/// elimination. P and Q are ordered ((0,0), (1,0), (1,1)).
struct ClosedForm {
    double m10 = 0.0;
    double n11 = 0.0;
    std::array<double, 3> p{};
    std::array<double, 3> q{};
};

/// Elimination solution of the documented system:
///   M^{n+2-m} N^{m+1} Dm + S1 N A~m + S2 M B~m = 0
///   M^{n+2-m} N^{m+1} Em + S3 N A~m + S4 M B~m = 0
/// with P10 = S1/M, P11 = S2/N, Q10 = S3/M, Q11 = S4/N, P00 = Q00 = 0.
/// Throws BranchFlipSignal when n+2 is even and the radicand is negative,
/// and ContractError on degenerate denominators.
ClosedForm solve_raise_closed_form(const RotatedLead& rl, double d_m, double e_m,
                                   int n, int m);

/// Scaled and unscaled parameter set for one composition attempt. M and N are
/// triangles with cap n+1 (slot (1,0) of M is M_{1,0}, slot (1,1) of N is
/// N_{1,1}; the pinned slots (0,0), M(1,1), N(1,0) stay zero). The unscaled
/// grids carry the actual model coefficients, including the gamma^-k-scaled
/// constant assignments that center the composed image on the second map's
/// source point.
struct RaiseSolution {
    int k = 0;
    int n = 0;
    int m = 0;
    Jet2 M{2};
    Jet2 N{2};
    std::array<double, 3> P{};
    std::array<double, 3> Q{};
    double residual = 0.0; // max |coeff| through the target suborder
    double scale = 0.0;    // max |coeff| of the whole composite jet
    double norm = 0.0;     // no-cancellation term-size bound of the composite

    struct Unscaled {
        Jet2 mu_bar{2}; // cap n+1, rotated-coordinate parameters
        Jet2 nu_bar{2};
        std::array<double, 3> p{};
        std::array<double, 3> q{};
    } unscaled;
};

/// Closed-form solution arranged so that the composed jet actually vanishes
/// through suborder (n, m) in the zero-remainder model (exact constants for
/// P00/Q00, composition-consistent sign convention). Starting point for the
/// Newton polish.
RaiseSolution make_annihilating_solution(const GlobalMapModel& gm1,
                                         const GlobalMapModel& gm2,
                                         const BiFocusSpectrum& spec, int k,
                                         int n, int m);

/// Tangent jet of the composed map second_map o local^k o first_map,
/// restricted to the tangent directions with x = u = 0 and output v = 0,
/// with sol's parameters applied to both maps. Cap n + 2.
JetPair compose_new_global(const GlobalMapModel& gm1, const BiFocusSpectrum& spec,
                           int k, const GlobalMapModel& gm2,
                           const RaiseSolution& sol);

/// Square Newton iteration on the free parameters, driving every composite
/// coefficient through suborder (n, m) below 1e-11 of the jet scale.
/// Jacobian by forward differences. Throws RaiseDivergenceError (carrying the
/// best iterate) after five consecutive residual increases.
RaiseSolution newton_polish(const GlobalMapModel& gm1, const BiFocusSpectrum& spec,
                            int k, const GlobalMapModel& gm2,
                            const RaiseSolution& sol);

struct RaiseDivergenceError : DivergenceError {
    RaiseDivergenceError(const std::string& what, RaiseSolution best_)
        : DivergenceError(what), best(std::move(best_)) {}
    RaiseSolution best;
};

struct RaiseRow {
    int k = 0;
    double residual_pre = 0.0;
    double residual_post = 0.0;
    int index_n = 0;
    int index_m = 0;
    bool ok = false;
};

struct RaiseOutcome {
    GlobalMapModel model;
    TangencyIndex index;
    std::vector<RaiseRow> rows;
};

/// One suborder-raising step on a pair of equal-index (n, m) tangencies:
/// scans admissible k, solves, polishes, and returns a model of index
/// (n, m+1) (or (n+1, 0) when m = n+1), pinning the defining coefficient
/// when the composition overshoots the target.
RaiseOutcome raise_suborder(const GlobalMapModel& gm1, const GlobalMapModel& gm2,
                            const BiFocusSpectrum& spec, int k_min = 5,
                            int k_max = 400);

struct BagItem {
    GlobalMapModel model;
    TangencyIndex index;
};

/// Homoclinic tangencies sharing one bi-focus orbit. Construction validates
/// genericity and recomputes every index.
struct TangencyBag {
    std::vector<BagItem> items;
    BiFocusSpectrum spectrum;

    TangencyBag(std::vector<GlobalMapModel> models, BiFocusSpectrum spec);
};

/// 2^{n+2} tangencies of index (n, 0) -> one of index (n+1, 0), via n+2
/// rounds of pairwise suborder raises. Pairs within a round run
/// independently; results are combined in pair order.
RaiseOutcome raise_order(const TangencyBag& bag, int k_min = 5, int k_max = 400);

/// Tangencies of index (1,0) needed to reach order N: 2^{(N-1)(N+4)/2}.
std::uint64_t required_count(int N);

/// N-1 rounds of raise_order with group sizes 8, 16, ..., 2^{N+1}, starting
/// from required_count(N) tangencies of index (1, 0).
RaiseOutcome build_order_n(const TangencyBag& bag, int N, int k_min = 5,
                           int k_max = 400);

} // namespace bifocus

#endif
