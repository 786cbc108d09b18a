"""Numerical tolerances shared across the package.

All dimensions here are tiny (system dim <= 4, probe dim <= 4, at most a few
chain states), so double precision leaves several digits of headroom above
these thresholds.  Every check in the package routes through one instance of
:class:`Tolerances` so that CLI-level overrides apply uniformly.
"""

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10          # Hermiticity residual for states/observables
    trace: float = 1e-10         # trace normalization of states
    psd: float = 1e-10           # most-negative admissible eigenvalue of a state/Choi
    tp: float = 1e-12            # trace-preservation residual of channels
    unit: float = 1e-10          # unitarity residual of propagators
    consistency: float = 1e-12   # Kraus-vs-superoperator agreement
    degeneracy: float = 1e-9     # eigenvalue clustering width
    peripheral: float = 1e-8     # |lambda| >= 1 - peripheral counts as peripheral
    gap: float = 1e-8            # spectral gap below which "primitive" is refused
    pi_floor: float = 1e-12      # chain weights below this are treated as absent
    edge: float = 1e-14          # P entries above this count as digraph edges
    prob_floor: float = 1e-14    # measurement outcomes below this are skipped

    def replace(self, **overrides) -> "Tolerances":
        return dataclasses.replace(self, **overrides)


DEFAULT = Tolerances()

# names accepted by the CLI --tol NAME=VALUE flag
FIELD_NAMES = tuple(f.name for f in dataclasses.fields(Tolerances))
