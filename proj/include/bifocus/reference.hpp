#ifndef BIFOCUS_REFERENCE_HPP
#define BIFOCUS_REFERENCE_HPP

#include <cstdint>
#include <vector>

#include "bifocus/model.hpp"

namespace bifocus {

/// Deterministic-by-seed model of exact index (order, 0): zero series,
/// well-conditioned random blocks, nonzero lead head. Identical across
/// platforms (hand-rolled uniforms over mt19937_64).
GlobalMapModel make_reference_model(std::uint64_t seed, int order);

std::vector<GlobalMapModel> gen_reference(std::uint64_t seed, int count, int order);

/// Fixed order-2 model used by the renormalization studies: zero series,
/// source point at the origin, nonzero image point so the k-drift of the
/// constant rows is visible and decays.
GlobalMapModel reference_renorm_model();

} // namespace bifocus

#endif
