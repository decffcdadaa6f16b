"""
Predicting the polarization state of each decay path
====================================================

The cascade emits a photon pair whose polarization state follows from the
angular-momentum coupling strengths of the participating hyperfine levels.
"""

import numpy as np

import biphoton as bp

# The two decay paths differ only in the intermediate level of the decay:
# F = 3 for path X, F = 2 for path Y.
for name, levels in [("X", bp.PATH_X), ("Y", bp.PATH_Y)]:
    state = bp.predict_path_state(levels)
    print(f"path {name}: levels F = {levels.f_values}")
    print(f"  a0 = {state.a0:.4f}, a1 = {state.a1:.4f}, phi0 = {state.phi0:.4f}")

    # the relative phase pi appears as a minus sign between |LR> and |RL>
    ket = bp.ket_from_path(state)
    amps = np.round(ket.amplitudes, 4)
    print(f"  ket (LL, LR, RL, RR) = {amps}")

    # both predicted states are strongly but not maximally entangled
    rho = bp.density_from_ket(ket)
    print(f"  concurrence            = {bp.concurrence(rho):.4f}")
    print(f"  entanglement of formation = {bp.entanglement_of_formation(rho):.4f}")
    print()

# The underlying channel amplitudes: the co-rotating combinations are
# forbidden by angular momentum conservation and vanish exactly.
for alphas in [(+1, -1), (-1, +1), (+1, +1), (-1, -1)]:
    x = bp.path_coupling_x(bp.PATH_X, *alphas)
    print(f"path X coupling for helicities {alphas}: {x:+.6f}")

# The same state expressed in the linear (H, V) basis, as an analyzer
# would see it.
ket_x = bp.ket_from_path(bp.predict_path_state(bp.PATH_X))
linear = bp.change_basis(ket_x, bp.LINEAR)
print("\npath X in the linear basis (HH, HV, VH, VV):")
print(np.round(linear.amplitudes, 4))
