"""How much does a distant vortex patch disturb a neighbour?

Two copies of a compactly supported quadrupole are placed on the diagonal and
evolved together; each is compared, on its own support, against the same patch
evolved alone.  The local H^2 difference shrinks quickly with separation.  At
full size (n=2048) each run takes about two minutes, so the default here is a
quicker n=1024 version with a wider patch (under two minutes).

    python3 demos/04_patch_interaction.py [--full]
"""

import sys

from logvort.cli import patch_centers
from logvort.initdata import quadrupole
from logvort.inflation import PatchLayout, run_patches

full = "--full" in sys.argv
n, box, scale = (2048, 16.0, 0.8) if full else (1024, 16.0, 1.6)
patch = quadrupole(sharpness=1.0, scale=scale)
rho = patch.support_radius

alone = run_patches(PatchLayout(patch, ((0.0, 0.0),)), n, box, 1.0, samples=3)
print(f"support radius {rho:.3f}; single-patch self check {alone.differences[0]:.1e}")
for d in (8.0, 16.0, 32.0) if full else (8.0, 16.0):
    lay = PatchLayout(patch, patch_centers(d, rho, n, box))
    rep = run_patches(lay, n, box, 1.0, samples=3, isolated=alone.isolated)
    print(f"separation {d:4g} radii: local H2 difference {max(rep.differences):.3e}")
