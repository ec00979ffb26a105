"""How facet reflections cap fidelity and HOM visibility.

A photon reflected at a waveguide end facet changes polarization and
arrives in a different time bin, so it adds an incoherent component to
the entangled state.  The fidelity ceiling falls as (1-R)^2 + R^2.  In two-source
HOM interference each heralded idler can be spoiled at four facet
passes, so the visibility falls much faster than the fidelity.
Output: both curves against reflectivity.

    python3 demos/plot_reflection_limits.py [output_root]
"""

import numpy as np

from _common import output_dir, save_table
from sagnacsim.hybridstate import FacetReflection, fidelity_bound_vs_reflectivity
from sagnacsim.interference import simulate_hom_with_reflections
from sagnacsim.jsa import chip_jsa, schmidt_decompose

out = output_dir("reflections")
jsa = chip_jsa()
purity = schmidt_decompose(jsa).purity

rs = np.linspace(0.0, 0.1, 51)
rows = [(float(R), float(fidelity_bound_vs_reflectivity(R)),
         simulate_hom_with_reflections(jsa, FacetReflection(float(R)))) for R in rs]
save_table(out, "limits_vs_reflectivity.csv", ("reflectivity", "fidelity_bound", "hom_visibility"), rows)

for R in (0.0, 0.0006, 0.02):
    print(f"R = {R:<6}: fidelity ceiling {fidelity_bound_vs_reflectivity(R):.4f}, "
          f"HOM visibility {simulate_hom_with_reflections(jsa, FacetReflection(R)):.4f}")
print(f"without reflections the HOM visibility equals the spectral purity {purity:.4f}")
