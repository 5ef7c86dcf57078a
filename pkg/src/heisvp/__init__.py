"""Numerical tools for intrinsic graphs in the first Heisenberg group.

Submodules:

- ``heis``: group law, automorphisms, horizontal lines, word-metric balls
- ``field``: fields psi on the vertical plane, characteristic curves
- ``bumpy``: the layered bumpy surface and its internal bounds
- ``vper``: parametric vertical perimeter profiles
- ``nonmono``: extended parametric nonmonotonicity of epigraphs
- ``corona``: pseudoquads and greedy foliated patchworks
- ``embed``: cut semimetrics and the metric Delta
- ``cli``: the ``heisvp`` command
"""

__version__ = "0.1.0"
