import enum

__all__ = ("Command", "GrooveSide", "Objective", "Selection", "SolveStatus", "Symmetry")


class Objective(enum.Enum):
    """
    Noise measure minimized by a search.

    Both are maxima over the harmonics ``k = 1..K``; the approximated value
    never exceeds the exact one and is at least ``1/sqrt(2)`` of it.
    """
    EXACT = "exact"
    """``sqrt(a_k^2 + b_k^2)``, that is ``2|c_k|``."""
    APPROX = "approx"
    """``max(|a_k|, |b_k|)``, the linearizable measure of the MILP."""


class Symmetry(enum.Enum):
    """
    Symmetry handling of the exact search.

    The three options always return the same optimal value; only the number
    of explored nodes changes.
    """
    NONE = "none"
    FIX_FIRST = "fix-first"
    """The first pitch is of type 1 (requires ``minOcc_1 >= 1``)."""
    ROTATION_CUTS = "rotation-cuts"
    """Every circular permutation of a visited sequence is cut off."""


class Selection(enum.Enum):
    """Parent selection schemes of the genetic algorithm."""
    ROULETTE = "roulette"
    RANKING = "ranking"


class GrooveSide(enum.Enum):
    """Where the groove sits inside each pitch."""
    TRAILING = "trailing"
    """Elevated part first, groove last (the regular profile)."""
    LEADING = "leading"
    """Groove first; the orientation of a mirrored profile."""


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    """A sequence was found without an optimality guarantee (heuristics)."""
    TIME_LIMIT = "time-limit"
    """The search stopped at the time limit; the sequence is the best so far."""
    CUTOFF = "cutoff"
    """No sequence beat the seeded upper bound."""
    INFEASIBLE = "infeasible"


class Command(enum.StrEnum):
    """Command-line sub-commands."""
    NOISE = "noise"
    SOLVE_EXACT = "solve-exact"
    SOLVE_APPROX = "solve-approx"
    GA = "ga"
    EXPORT_LP = "export-lp"
    GRAPH = "graph"
    TABLE = "table"
