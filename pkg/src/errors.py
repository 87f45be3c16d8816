"""
Erreurs et avertissements du simulateur.
模拟器的异常与警告类型
"""


class TransitionModelError(Exception):
    """Base class for every error raised by the simulator."""


class DimensionMismatch(TransitionModelError):
    """Blocks of the Hamiltonian do not fit together."""


class RankDeficientChannels(TransitionModelError):
    """Orthonormalization of the channel vectors failed repeatedly."""


class NonDecomposable(TransitionModelError):
    """The singular-value factors do not reproduce the coupling matrix."""


class SingularPropagator(TransitionModelError):
    """D(E) (or G1/G2) could not be inverted reliably at this energy."""

    def __init__(self, energy, residual):
        self.energy = energy
        self.residual = residual
        super().__init__(f"propagator singular at E={energy!r} (residual {residual:.3e})")


class SingularAtEnergy(TransitionModelError):
    """E - H_eff is singular (no coupling and E on an eigenvalue of H_tr)."""


class DefectiveMatrix(TransitionModelError):
    """Complex symmetric matrix with a quasi-null eigenvector (v^T v ~ 0)."""


class EnsembleFailure(TransitionModelError):
    """Too many realizations had to be skipped."""


class ParseError(TransitionModelError):
    """Malformed run file line or unknown key."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(TransitionModelError):
    """Every violated invariant of a configuration, collected in one error."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# Avertissements (non fatals) / 非致命警告

class CouplingStrengthWarning(UserWarning):
    """Couplings not small versus lambda, or H_tr far from the band center."""


class DegenerateSingularValues(UserWarning):
    """Two singular values coincide: O_tr is not unique."""


class IllConditioned(RuntimeWarning):
    """The complex orthogonal eigenframe is badly conditioned."""
