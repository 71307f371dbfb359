#include "bifocus/reference.hpp"

#include <cmath>
#include <random>

#include "bifocus/tangency.hpp"

namespace bifocus {

namespace {

// Uniform doubles drawn by explicit bit twiddling so the stream depends only
// on mt19937_64, which the standard pins down exactly.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * unit(); }
};

Eigen::Matrix2d well_conditioned_block(Rng& rng) {
    for (;;) {
        Eigen::Matrix2d m;
        m << 1.0 + 0.3 * rng.uniform(-1.0, 1.0), 0.3 * rng.uniform(-1.0, 1.0),
            0.3 * rng.uniform(-1.0, 1.0), 1.0 + 0.3 * rng.uniform(-1.0, 1.0);
        const double rel = std::fabs(m.determinant()) / (m.row(0).norm() * m.row(1).norm());
        if (rel > 1e-2) return m;
    }
}

} // namespace

GlobalMapModel make_reference_model(std::uint64_t seed, int order) {
    if (order < 1) throw ContractError("make_reference_model: order must be >= 1");
    Rng rng(seed);
    GlobalMapModel gm(order, 0, 0);
    gm.a12 = well_conditioned_block(rng);
    gm.a34 = well_conditioned_block(rng);
    gm.b12 = well_conditioned_block(rng);
    gm.x_plus << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5);
    gm.y_minus << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5);
    gm.lead_a[0] = 0.75 + 0.75 * rng.unit(); // head bounded away from zero
    gm.lead_b[0] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 1; i < gm.lead_a.size(); ++i) {
        gm.lead_a[i] = rng.uniform(-1.0, 1.0);
        gm.lead_b[i] = rng.uniform(-1.0, 1.0);
    }
    gm.check_invariants();
    if (!validate_genericity(gm).pass()) {
        throw NumericError("make_reference_model: generated blocks fail genericity");
    }
    const TangencyIndex idx = tangency_index(global_tangent_jet(gm));
    if (idx != TangencyIndex::make(order, 0)) {
        throw NumericError("make_reference_model: unexpected index " + idx.str());
    }
    return gm;
}

std::vector<GlobalMapModel> gen_reference(std::uint64_t seed, int count, int order) {
    if (count < 1) throw ContractError("gen_reference: count must be >= 1");
    std::vector<GlobalMapModel> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::uint64_t item_seed =
            seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(i + 1));
        out.push_back(make_reference_model(item_seed, order));
    }
    return out;
}

GlobalMapModel reference_renorm_model() {
    GlobalMapModel gm(2, 0, 0);
    gm.a12 = Eigen::Matrix2d::Identity();
    gm.a34 << 1.0, 0.2, -0.1, 1.0;
    gm.b12 << 1.0, 0.3, 0.2, 1.0;
    gm.x_plus << 1.0, 0.5;
    gm.y_minus << 0.0, 0.0;
    gm.lead_a = {1.0, -0.3, 0.2, 0.1};
    gm.lead_b = {0.4, 0.7, -0.5, 0.3};
    gm.check_invariants();
    return gm;
}

} // namespace bifocus
