#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tcbsde {

struct JumpAtom {
    double z = 0.0;  // jump size, nonzero
    double w = 0.0;  // mass, positive
};

/// Jump measure with finite atomic support: nu = sum_j w_j * delta_{z_j}.
/// Finiteness makes every integral against nu an exact finite sum.
struct LevyMeasure {
    std::vector<JumpAtom> atoms;
    int atom_count() const { return static_cast<int>(atoms.size()); }
};

inline LevyMeasure make_levy_measure(std::vector<JumpAtom> atoms) {
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        if (atoms[j].z == 0.0 || !std::isfinite(atoms[j].z))
            throw std::invalid_argument("levy measure: jump sizes must be nonzero and finite");
        if (!(atoms[j].w > 0.0) || !std::isfinite(atoms[j].w))
            throw std::invalid_argument("levy measure: masses must be positive and finite");
        for (std::size_t i = 0; i < j; ++i)
            if (atoms[i].z == atoms[j].z)
                throw std::invalid_argument("levy measure: atoms must be distinct");
    }
    return LevyMeasure{std::move(atoms)};
}

/// Integral of z^2 against the measure; finite by construction.
inline double levy_second_moment(const LevyMeasure& m) {
    double sum = 0.0;
    for (const auto& a : m.atoms) sum += a.z * a.z * a.w;
    return sum;
}

}  // namespace tcbsde
