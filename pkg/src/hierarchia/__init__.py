"""Hierarchical random walks, branching systems, and subordinator cascades.

Simulation library plus an experiment CLI. Submodules:

- hiergroup: ultrametric geometry, walk rates, transience, Green operator
- feller: subcritical Feller branching diffusion, exact transition sampling
- twolevel: two-level branching particle system with immigration
- cascade: subordinator kernels, iteration, entrance law
- genealogy: jump decompositions, labelled forests, size-biased spines
- spatial: branching random walks on the truncated hierarchical group
- cli: reproducible experiment runner
"""

from . import hiergroup, feller, twolevel, cascade, genealogy, spatial

__all__ = ["hiergroup", "feller", "twolevel", "cascade", "genealogy", "spatial"]
__version__ = "0.1.0"
