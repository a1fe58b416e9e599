"""Spin-parity measurement on two coupled quantum dots.

Energies are in meV, times in ps. States are numpy complex vectors on two
qubits (4 amplitudes, order |00>, |01>, |10>, |11>) or on the two-dot spin and
exciton levels (9 amplitudes).
"""

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, Error, RegimeViolation, run

__version__ = "0.1.0"


def checks_failed(report):
    """Names of the failed checks in a report returned by run()."""
    return [c["name"] for c in report["checks"] if not c["passed"]]
