#include "bifocus/tangency.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace bifocus {

TangencyIndex TangencyIndex::make(int n_, int m_) {
    if (n_ < 1 || m_ < 0 || m_ > n_ + 1) {
        throw ContractError("TangencyIndex: need n >= 1 and 0 <= m <= n+1");
    }
    TangencyIndex t;
    t.kind = Kind::Index;
    t.n = n_;
    t.m = m_;
    return t;
}

std::string TangencyIndex::str() const {
    if (is_flat()) return "Flat";
    return "(" + std::to_string(n) + "," + std::to_string(m) + ")";
}

bool operator==(const TangencyIndex& a, const TangencyIndex& b) {
    if (a.kind != b.kind) return false;
    if (a.is_flat()) return true;
    return a.n == b.n && a.m == b.m;
}

bool operator!=(const TangencyIndex& a, const TangencyIndex& b) { return !(a == b); }

bool operator<(const TangencyIndex& a, const TangencyIndex& b) {
    if (a.is_flat()) return false;
    if (b.is_flat()) return true;
    if (a.n != b.n) return a.n < b.n;
    return a.m < b.m;
}

TangencyIndex tangency_index(const JetPair& jp, double tol) {
    if (!(tol > 0.0)) {
        throw ContractError("tangency_index: tol must be positive");
    }
    const int cap = jp.degree_cap();
    const double scale = jp.max_abs_coeff();
    if (scale == 0.0) return TangencyIndex::flat();

    auto survives = [&](int degree, int i) {
        return std::fabs(jp.y1.coeff(degree, i)) > tol * scale ||
               std::fabs(jp.y2.coeff(degree, i)) > tol * scale;
    };

    if (survives(0, 0)) {
        throw ContractError("tangency_index: not a tangency (constant term survives tol)");
    }

    int first_degree = -1;
    for (int j = 1; j <= cap && first_degree < 0; ++j) {
        for (int i = 0; i <= j; ++i) {
            if (survives(j, i)) {
                first_degree = j;
                break;
            }
        }
    }
    if (first_degree < 0) return TangencyIndex::flat();
    if (first_degree == 1) {
        throw ContractError(
            "tangency_index: not a tangency (linear term survives tol; the "
            "intersection is transverse along the tangent plane)");
    }

    const int n = first_degree - 1;
    for (int i = 0; i <= n + 1; ++i) {
        if (survives(n + 1, i)) return TangencyIndex::make(n, i);
    }
    throw ContractError("tangency_index: internal inconsistency");
}

int splitting_count(int n) {
    if (n < 1) {
        throw ContractError("splitting_count: n must be >= 1");
    }
    return n * n + 3 * n + 2;
}

SplittingChart splitting_chart(int n) { return SplittingChart{n, splitting_count(n)}; }

GlobalMapModel apply_split(const GlobalMapModel& gm, const Jet2& dmu, const Jet2& dnu) {
    if (dmu.degree_cap() != gm.order_cap() || dnu.degree_cap() != gm.order_cap()) {
        throw ContractError("apply_split: delta triangles must have cap = order_cap");
    }
    GlobalMapModel out = gm;
    out.mu = jet_add(gm.mu, dmu);
    out.nu = jet_add(gm.nu, dnu);
    return out;
}

int split_family_rank(int n, int n_params, const SplitFamily& family) {
    if (n < 1 || n_params < 1) {
        throw ContractError("split_family_rank: need n >= 1 and n_params >= 1");
    }
    const int chi = splitting_count(n);
    const int per_component = chi / 2;
    constexpr double kStep = 1e-6;
    constexpr double kSvTol = 1e-8;

    std::vector<double> params(static_cast<std::size_t>(n_params), 0.0);
    const auto base = family(params);
    Eigen::MatrixXd jac(chi, n_params);
    for (int p = 0; p < n_params; ++p) {
        params[static_cast<std::size_t>(p)] = kStep;
        const auto bumped = family(params);
        params[static_cast<std::size_t>(p)] = 0.0;
        int row = 0;
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= j; ++i, ++row) {
                jac(row, p) = (bumped.first.coeff(j, i) - base.first.coeff(j, i)) / kStep;
                jac(per_component + row, p) =
                    (bumped.second.coeff(j, i) - base.second.coeff(j, i)) / kStep;
            }
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index t = 0; t < sv.size(); ++t) {
        if (sv(t) > kSvTol) ++rank;
    }
    return rank;
}

bool split_rank_check(int n) {
    const int chi = splitting_count(n);
    const int per_component = chi / 2;
    // Canonical family: one parameter per coefficient, identity Jacobian.
    SplitFamily canonical = [n, per_component](const std::vector<double>& params) {
        Jet2 dmu(n), dnu(n);
        int t = 0;
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= j; ++i, ++t) {
                dmu.set_coeff(j, i, params[static_cast<std::size_t>(t)]);
                dnu.set_coeff(j, i, params[static_cast<std::size_t>(per_component) +
                                           static_cast<std::size_t>(t)]);
            }
        }
        return std::make_pair(dmu, dnu);
    };
    return split_family_rank(n, chi, canonical) == chi;
}

} // namespace bifocus
