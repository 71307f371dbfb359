#ifndef BIFOCUS_TANGENCY_HPP
#define BIFOCUS_TANGENCY_HPP

#include <functional>
#include <string>
#include <vector>

#include "bifocus/jets.hpp"
#include "bifocus/model.hpp"

namespace bifocus {

/// (order n, suborder m) of a corank-2 tangency, or Flat when every
/// coefficient through the degree cap vanishes. Flat compares above every
/// finite index.
struct TangencyIndex {
    enum class Kind { Index, Flat };

    Kind kind = Kind::Flat;
    int n = 0;
    int m = 0;

    static TangencyIndex flat() { return TangencyIndex{}; }
    static TangencyIndex make(int n, int m);

    bool is_flat() const { return kind == Kind::Flat; }
    std::string str() const;
};

bool operator==(const TangencyIndex& a, const TangencyIndex& b);
bool operator!=(const TangencyIndex& a, const TangencyIndex& b);
/// Strict order: (n,m) < (n',m') iff n < n', or n = n' and m < m'.
bool operator<(const TangencyIndex& a, const TangencyIndex& b);

struct SplittingChart {
    int n;
    int count; // n^2 + 3n + 2
};

/// Order n = smallest total degree minus one at which some coefficient of
/// either component survives tol (coefficients compared after normalizing by
/// the pair's largest absolute coefficient); suborder m = smallest i with a
/// surviving (n+1-i, i) coefficient. Throws ContractError when the constant
/// or linear terms survive (no corank-2 tangency at the base point).
TangencyIndex tangency_index(const JetPair& jp, double tol = 1e-9);

/// Number of splitting functionals for order n: n^2 + 3n + 2.
int splitting_count(int n);

SplittingChart splitting_chart(int n);

/// Adds dmu/dnu (triangles over 0 <= i <= j <= order_cap) to the model's
/// mu/nu coefficients; everything else is untouched.
GlobalMapModel apply_split(const GlobalMapModel& gm, const Jet2& dmu, const Jet2& dnu);

/// Rank of the parameters -> (mu, nu) Jacobian at zero, forward differences,
/// singular values thresholded at 1e-8. The family maps a parameter vector of
/// length n_params to (dmu, dnu) triangles of cap n.
using SplitFamily =
    std::function<std::pair<Jet2, Jet2>(const std::vector<double>& params)>;

int split_family_rank(int n, int n_params, const SplitFamily& family);

/// True when the canonical family (one parameter per coefficient) has full
/// rank splitting_count(n).
bool split_rank_check(int n);

} // namespace bifocus

#endif
