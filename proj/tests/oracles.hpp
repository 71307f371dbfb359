#ifndef BIFOCUS_TESTS_ORACLES_HPP
#define BIFOCUS_TESTS_ORACLES_HPP

// Brute-force reference implementations used to pin expected values. They
// share no code with the library paths they check.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bifocus/jets.hpp"

namespace oracles {

// Dense bivariate polynomial on a rectangular exponent grid, no truncation.
struct Poly {
    static constexpr int kMaxExp = 64; // per-variable exponent bound
    std::vector<double> c = std::vector<double>(kMaxExp * kMaxExp, 0.0);
    int max1 = 0; // highest stored exponent of the first variable
    int max2 = 0;

    double coeff(int e1, int e2) const { return c[static_cast<std::size_t>(e1 * kMaxExp + e2)]; }

    void bump(int e1, int e2, double v) {
        if (v == 0.0) return;
        if (e1 >= kMaxExp || e2 >= kMaxExp) throw std::logic_error("Poly: exponent bound");
        c[static_cast<std::size_t>(e1 * kMaxExp + e2)] += v;
        max1 = std::max(max1, e1);
        max2 = std::max(max2, e2);
    }

    static Poly from_jet(const bifocus::Jet2& j) {
        Poly p;
        for (int d = 0; d <= j.degree_cap(); ++d) {
            for (int i = 0; i <= d; ++i) p.bump(d - i, i, j.coeff(d, i));
        }
        return p;
    }

    static Poly one() {
        Poly p;
        p.bump(0, 0, 1.0);
        return p;
    }

    Poly add(const Poly& other) const {
        Poly out = *this;
        for (int a = 0; a <= other.max1; ++a) {
            for (int b = 0; b <= other.max2; ++b) out.bump(a, b, other.coeff(a, b));
        }
        return out;
    }

    Poly mul(const Poly& other) const {
        Poly out;
        for (int a = 0; a <= max1; ++a) {
            for (int b = 0; b <= max2; ++b) {
                const double ca = coeff(a, b);
                if (ca == 0.0) continue;
                for (int a2 = 0; a2 <= other.max1; ++a2) {
                    for (int b2 = 0; b2 <= other.max2; ++b2) {
                        const double cb = other.coeff(a2, b2);
                        if (cb != 0.0) out.bump(a + a2, b + b2, ca * cb);
                    }
                }
            }
        }
        return out;
    }

    Poly pow(int e) const {
        Poly out = one();
        for (int t = 0; t < e; ++t) out = out.mul(*this);
        return out;
    }

    // Composition of a polynomial with two inner polynomials, term by term.
    static Poly compose(const Poly& outer, const Poly& in1, const Poly& in2) {
        // power tables
        const int d1 = outer.max1, d2 = outer.max2;
        std::vector<Poly> p1(static_cast<std::size_t>(d1) + 1), p2(static_cast<std::size_t>(d2) + 1);
        p1[0] = one();
        p2[0] = one();
        for (int t = 1; t <= d1; ++t) p1[static_cast<std::size_t>(t)] = p1[static_cast<std::size_t>(t - 1)].mul(in1);
        for (int t = 1; t <= d2; ++t) p2[static_cast<std::size_t>(t)] = p2[static_cast<std::size_t>(t - 1)].mul(in2);
        Poly out;
        for (int a = 0; a <= d1; ++a) {
            for (int b = 0; b <= d2; ++b) {
                const double w = outer.coeff(a, b);
                if (w == 0.0) continue;
                const Poly term = p1[static_cast<std::size_t>(a)].mul(p2[static_cast<std::size_t>(b)]);
                for (int ta = 0; ta <= term.max1; ++ta) {
                    for (int tb = 0; tb <= term.max2; ++tb) {
                        out.bump(ta, tb, w * term.coeff(ta, tb));
                    }
                }
            }
        }
        return out;
    }

    bifocus::Jet2 truncate(int cap) const {
        bifocus::Jet2 j(cap);
        for (int a = 0; a <= max1; ++a) {
            for (int b = 0; b <= max2 && a + b <= cap; ++b) {
                j.set_coeff(a + b, b, coeff(a, b));
            }
        }
        return j;
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (double v : c) m = std::max(m, std::fabs(v));
        return m;
    }

    double eval(double y1, double y2) const {
        double s = 0.0;
        for (int a = 0; a <= max1; ++a) {
            for (int b = 0; b <= max2; ++b) {
                const double v = coeff(a, b);
                if (v != 0.0) s += v * std::pow(y1, a) * std::pow(y2, b);
            }
        }
        return s;
    }
};

// Determinant by cofactor expansion along the first row.
inline double cofactor_det(const std::vector<std::vector<double>>& m) {
    const std::size_t n = m.size();
    if (n == 1) return m[0][0];
    double det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<std::vector<double>> minor;
        for (std::size_t r = 1; r < n; ++r) {
            std::vector<double> row;
            for (std::size_t cc = 0; cc < n; ++cc) {
                if (cc != c) row.push_back(m[r][cc]);
            }
            minor.push_back(std::move(row));
        }
        det += (c % 2 == 0 ? 1.0 : -1.0) * m[0][c] * cofactor_det(minor);
    }
    return det;
}

// Platform-stable uniform stream for property tests.
struct TestRng {
    std::mt19937_64 gen;
    explicit TestRng(std::uint64_t seed) : gen(seed) {}
    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * unit(); }
    int integer(int lo, int hi) { // inclusive
        return lo + static_cast<int>(gen() % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

inline bifocus::Jet2 random_jet(TestRng& rng, int cap, int degree) {
    bifocus::Jet2 j(cap);
    for (int d = 0; d <= degree && d <= cap; ++d) {
        for (int i = 0; i <= d; ++i) {
            j.set_coeff(d, i, rng.uniform(-2.0, 2.0));
        }
    }
    return j;
}

} // namespace oracles

#endif
