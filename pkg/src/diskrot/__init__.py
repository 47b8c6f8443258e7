"""diskrot: a numerical laboratory for C0-rigidity of disk pseudo-rotations.

Subpackages by theme:

- ``diophantine``: exact continued fractions, certified enclosures of
  fractional parts, the exponential-Liouville construction, rigidity times.
- ``hamiltonian``: time-periodic Hamiltonians on the closed unit disk,
  their flows and iterates, boundary rotation numbers, Hessian bounds.
- ``floer``: the first-order elliptic system on truncated half-cylinders,
  its exact rigid-rotation solution, a damped Gauss-Newton solver,
  energies, and the mapping-torus lift.
- ``estimates``: numerical verification of the interpolation inequality
  (period-independent constant) and the integral-form Gronwall lemma.
- ``rigidity``: end-to-end experiments measuring sup-distance of iterates
  to the identity against the certified bound chain, plus the mixing probe.
- ``config`` / ``cli``: experiment configuration, run manifests, and the
  command-line entry point.
"""

__version__ = "0.1.0"
