#include "bifocus/jets.hpp"

#include <cmath>
#include <string>

namespace bifocus {

namespace {

int tri_size(int cap) { return (cap + 1) * (cap + 2) / 2; }
int tri_index(int degree, int i) { return degree * (degree + 1) / 2 + i; }

void require_same_cap(const Jet2& a, const Jet2& b, const char* op) {
    if (a.degree_cap() != b.degree_cap()) {
        throw ContractError(std::string(op) + ": mismatched degree_cap " +
                            std::to_string(a.degree_cap()) + " vs " +
                            std::to_string(b.degree_cap()));
    }
}

} // namespace

Jet2::Jet2(int degree_cap) : cap_(degree_cap) {
    if (degree_cap < 0) {
        throw ContractError("Jet2: degree_cap must be >= 0");
    }
    c_.assign(tri_size(cap_), 0.0);
}

Jet2 Jet2::constant(int degree_cap, double value) {
    Jet2 j(degree_cap);
    j.c_[0] = value;
    return j;
}

Jet2 Jet2::variable(int degree_cap, int axis) {
    if (axis != 0 && axis != 1) {
        throw ContractError("Jet2::variable: axis must be 0 or 1");
    }
    if (degree_cap < 1) {
        throw ContractError("Jet2::variable: degree_cap must be >= 1");
    }
    Jet2 j(degree_cap);
    j.set_coeff(1, axis, 1.0);
    return j;
}

double Jet2::coeff(int degree, int i) const {
    if (degree < 0 || degree > cap_ || i < 0 || i > degree) {
        throw ContractError("Jet2::coeff: index (" + std::to_string(degree) +
                            "," + std::to_string(i) + ") out of range for cap " +
                            std::to_string(cap_));
    }
    return c_[tri_index(degree, i)];
}

void Jet2::set_coeff(int degree, int i, double value) {
    if (degree < 0 || degree > cap_ || i < 0 || i > degree) {
        throw ContractError("Jet2::set_coeff: index (" + std::to_string(degree) +
                            "," + std::to_string(i) + ") out of range for cap " +
                            std::to_string(cap_));
    }
    c_[tri_index(degree, i)] = value;
}

double Jet2::max_abs_coeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::fabs(v));
    return m;
}

bool Jet2::all_finite() const {
    for (double v : c_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

JetPair::JetPair(Jet2 first, Jet2 second) : y1(std::move(first)), y2(std::move(second)) {
    if (y1.degree_cap() != y2.degree_cap()) {
        throw ContractError("JetPair: components must share one degree_cap");
    }
}

double JetPair::max_abs_coeff() const {
    return std::max(y1.max_abs_coeff(), y2.max_abs_coeff());
}

Jet2 jet_add(const Jet2& a, const Jet2& b) {
    require_same_cap(a, b, "jet_add");
    Jet2 out(a.degree_cap());
    for (int t = 0; t < a.coeff_count(); ++t) out.raw()[t] = a.raw()[t] + b.raw()[t];
    return out;
}

Jet2 jet_sub(const Jet2& a, const Jet2& b) {
    require_same_cap(a, b, "jet_sub");
    Jet2 out(a.degree_cap());
    for (int t = 0; t < a.coeff_count(); ++t) out.raw()[t] = a.raw()[t] - b.raw()[t];
    return out;
}

Jet2 jet_scale(const Jet2& a, double s) {
    Jet2 out(a.degree_cap());
    for (int t = 0; t < a.coeff_count(); ++t) out.raw()[t] = s * a.raw()[t];
    return out;
}

Jet2 jet_mul(const Jet2& a, const Jet2& b) {
    require_same_cap(a, b, "jet_mul");
    const int cap = a.degree_cap();
    Jet2 out(cap);
    for (int ja = 0; ja <= cap; ++ja) {
        for (int ia = 0; ia <= ja; ++ia) {
            const double ca = a.raw()[tri_index(ja, ia)];
            if (ca == 0.0) continue;
            for (int jb = 0; jb + ja <= cap; ++jb) {
                for (int ib = 0; ib <= jb; ++ib) {
                    const double cb = b.raw()[tri_index(jb, ib)];
                    if (cb == 0.0) continue;
                    out.raw()[tri_index(ja + jb, ia + ib)] += ca * cb;
                }
            }
        }
    }
    return out;
}

Jet2 jet_compose(const Jet2& outer, const JetPair& inner, bool allow_constant_term) {
    require_same_cap(outer, inner.y1, "jet_compose");
    if (!allow_constant_term &&
        (inner.y1.coeff(0, 0) != 0.0 || inner.y2.coeff(0, 0) != 0.0)) {
        throw ContractError(
            "jet_compose: inner constant term is nonzero; truncation would be "
            "invalid (pass allow_constant_term for exact polynomial inputs)");
    }
    const int cap = outer.degree_cap();

    // Power tables inner1^p, inner2^q for p, q <= cap.
    std::vector<Jet2> pow1, pow2;
    pow1.reserve(cap + 1);
    pow2.reserve(cap + 1);
    pow1.push_back(Jet2::constant(cap, 1.0));
    pow2.push_back(Jet2::constant(cap, 1.0));
    for (int p = 1; p <= cap; ++p) {
        pow1.push_back(jet_mul(pow1.back(), inner.y1));
        pow2.push_back(jet_mul(pow2.back(), inner.y2));
    }

    Jet2 out(cap);
    for (int j = 0; j <= cap; ++j) {
        for (int i = 0; i <= j; ++i) {
            const double c = outer.coeff(j, i);
            if (c == 0.0) continue;
            out = jet_add(out, jet_scale(jet_mul(pow1[j - i], pow2[i]), c));
        }
    }
    return out;
}

double jet_partial(const Jet2& a, int i, int j) {
    if (i < 0 || j < 0 || i + j > a.degree_cap()) {
        throw ContractError("jet_partial: order (" + std::to_string(i) + "," +
                            std::to_string(j) + ") exceeds degree_cap " +
                            std::to_string(a.degree_cap()));
    }
    double fact = 1.0;
    for (int t = 2; t <= i; ++t) fact *= t;
    for (int t = 2; t <= j; ++t) fact *= t;
    return fact * a.coeff(i + j, j);
}

double jet_eval(const Jet2& a, double y1, double y2) {
    const int cap = a.degree_cap();
    // Row-wise Horner in y2 inside each total degree, powers of y1 outside.
    std::vector<double> p1(cap + 1, 1.0), p2(cap + 1, 1.0);
    for (int t = 1; t <= cap; ++t) {
        p1[t] = p1[t - 1] * y1;
        p2[t] = p2[t - 1] * y2;
    }
    double sum = 0.0;
    for (int j = 0; j <= cap; ++j) {
        for (int i = 0; i <= j; ++i) {
            const double c = a.coeff(j, i);
            if (c != 0.0) sum += c * p1[j - i] * p2[i];
        }
    }
    return sum;
}

} // namespace bifocus
