#ifndef BIFOCUS_JETS_HPP
#define BIFOCUS_JETS_HPP

#include <vector>

#include "bifocus/errors.hpp"

namespace bifocus {

/// Truncated bivariate power series in (Y1, Y2), dense triangular storage.
/// Coefficient (j, i) multiplies Y1^{j-i} * Y2^i, for 0 <= i <= j <= degree_cap.
/// Values are immutable in spirit: all arithmetic returns fresh jets, so they
/// are safe to share across threads once built.
class Jet2 {
public:
    explicit Jet2(int degree_cap);

    static Jet2 constant(int degree_cap, double value);
    /// axis = 0 gives the jet Y1, axis = 1 gives Y2.
    static Jet2 variable(int degree_cap, int axis);

    int degree_cap() const { return cap_; }
    int coeff_count() const { return static_cast<int>(c_.size()); }

    double coeff(int degree, int i) const;
    void set_coeff(int degree, int i, double value);

    const std::vector<double>& raw() const { return c_; }
    std::vector<double>& raw() { return c_; }

    /// Largest absolute coefficient.
    double max_abs_coeff() const;
    bool all_finite() const;

private:
    int cap_;
    std::vector<double> c_;
};

/// The two tangent-direction components of a map image, equal caps.
struct JetPair {
    Jet2 y1;
    Jet2 y2;

    JetPair(Jet2 first, Jet2 second);
    int degree_cap() const { return y1.degree_cap(); }
    double max_abs_coeff() const;
};

Jet2 jet_add(const Jet2& a, const Jet2& b);
Jet2 jet_sub(const Jet2& a, const Jet2& b);
Jet2 jet_scale(const Jet2& a, double s);

/// Cauchy product truncated at the common degree cap.
Jet2 jet_mul(const Jet2& a, const Jet2& b);

/// outer(inner.y1, inner.y2), truncated at the common cap. By default the
/// inner components must have zero constant term (substituting a constant
/// into a truncated series is invalid); pass allow_constant_term = true when
/// the inputs are exact polynomials and the substitution is intended.
Jet2 jet_compose(const Jet2& outer, const JetPair& inner,
                 bool allow_constant_term = false);

/// Mixed partial d^{i+j} / dY1^i dY2^j at the origin (= i! j! * coefficient).
double jet_partial(const Jet2& a, int i, int j);

double jet_eval(const Jet2& a, double y1, double y2);

} // namespace bifocus

#endif
