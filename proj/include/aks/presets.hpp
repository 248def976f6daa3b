#ifndef AKS_PRESETS_HPP
#define AKS_PRESETS_HPP

#include "aks/orbits.hpp"

namespace aks {

/// sl(n) with A = strictly upper triangular, B = lower Borel, Gauss factorization.
Splitting triangular_splitting(int n);

/// sl(n) with A = so(n), B = lower Borel, Iwasawa factorization.
Splitting iwasawa_splitting(int n);

/// Open Toda lattice: triangular splitting, mu = sum E_{i+1,i}, nu = sum E_{i,i+1}.
AKSData preset_toda(int n);

/// Iwasawa splitting with mu = 0 and nu = pi_{A^perp}(sum E_{i,i+1}).
AKSData preset_iwasawa(int n);

} // namespace aks

#endif // AKS_PRESETS_HPP
