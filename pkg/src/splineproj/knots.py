"""Knot sequences on an interval and on the torus [0, 1).

Indices follow the usual B-spline bookkeeping: a :class:`KnotVector` stores
its knots in a flat array together with the (possibly negative) index
``first`` of the first knot, so ``kv.t(i)`` accepts the same index that
labels the B-spline ``N_i`` with support ``[t_i, t_{i+k}]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence, Union

import numpy as np

from .errors import (
    IndexOutOfRange,
    KnotFileError,
    MultiplicityViolation,
    NotClamped,
    NotSorted,
    OutOfRange,
    TooFewKnots,
)

Mode = Literal["clamped", "periodic"]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Knot sequence ``(t_i)`` for splines of order ``order`` on an interval.

    ``knots[p]`` is the knot with index ``first + p``. The B-splines are
    ``N_first, ..., N_last`` with ``last = first + count - 1``. The spline
    domain is ``[knots[k-1], knots[-k]]``, which for a clamped sequence is the
    interval spanned by the knots themselves.
    """

    order: int
    knots: np.ndarray
    first: int = 0
    clamped: bool = True

    def __post_init__(self):
        object.__setattr__(self, "knots", _frozen(self.knots))

    @property
    def count(self) -> int:
        return len(self.knots) - self.order

    @property
    def last(self) -> int:
        return self.first + self.count - 1

    @property
    def lo(self) -> float:
        return float(self.knots[self.order - 1])

    @property
    def hi(self) -> float:
        return float(self.knots[len(self.knots) - self.order])

    @property
    def mesh_width(self) -> float:
        k = self.order
        return float(np.diff(self.knots[k - 1 : len(self.knots) - k + 1]).max())

    def t(self, i: int) -> float:
        p = i - self.first
        if not 0 <= p < len(self.knots):
            raise IndexOutOfRange(f"knot index {i} outside [{self.first}, {self.first + len(self.knots) - 1}]")
        return float(self.knots[p])

    def __len__(self) -> int:
        return len(self.knots)

    def __repr__(self) -> str:
        return f"KnotVector(order={self.order}, n_knots={len(self.knots)}, first={self.first}, domain=[{self.lo}, {self.hi}])"


@dataclass(frozen=True, eq=False)
class PeriodicKnotVector:
    """Knots ``s_0 <= ... <= s_{n-1}`` in ``[0, 1)`` extended by ``s_{rn+j} = r + s_j``."""

    order: int
    s: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "s", _frozen(self.s))

    @property
    def n(self) -> int:
        return len(self.s)

    def point(self, j):
        """Extended knot ``s_j`` for any integer (or integer array) ``j``."""
        r, q = np.divmod(np.asarray(j), self.n)
        out = r + self.s[q]
        return float(out) if np.ndim(out) == 0 else out

    def extended(self, start: int, stop: int) -> np.ndarray:
        """``s_j`` for ``start <= j < stop``."""
        return self.point(np.arange(start, stop))

    @property
    def mesh_width(self) -> float:
        return float(np.diff(self.extended(0, self.n + 1)).max())

    def support_lengths(self) -> np.ndarray:
        """Length of ``[s_j, s_{j+k}]`` for ``j = 0..n-1``."""
        j = np.arange(self.n)
        return self.point(j + self.order) - self.point(j)

    def __repr__(self) -> str:
        return f"PeriodicKnotVector(order={self.order}, n={self.n})"


def _check_common(t: np.ndarray, k: int) -> None:
    if k < 1:
        raise ValueError(f"order must be >= 1, got {k}")
    if not np.all(np.isfinite(t)):
        raise OutOfRange("knots must be finite")
    bad = np.flatnonzero(np.diff(t) < 0)
    if bad.size:
        p = int(bad[0])
        raise NotSorted(f"knots not non-decreasing at position {p}: {t[p]!r} > {t[p + 1]!r}")
    if len(t) > k:
        coincide = np.flatnonzero(t[k:] <= t[:-k])
        if coincide.size:
            p = int(coincide[0])
            raise MultiplicityViolation(
                f"knot {t[p]!r} has multiplicity > {k} (t[{p}] == t[{p + k}])"
            )


def _clamped(raw: Sequence[float], k: int, first: int = 0) -> KnotVector:
    t = np.asarray(raw, dtype=np.float64)
    if t.ndim != 1 or len(t) < 2 * k:
        raise TooFewKnots(f"a clamped sequence of order {k} needs at least {2 * k} knots, got {t.size}")
    _check_common(t, k)
    if t[0] != t[k - 1] or t[-1] != t[-k]:
        raise NotClamped(f"boundary knots must be repeated {k} times")
    if not t[-1] > t[0]:
        raise MultiplicityViolation("empty domain")
    return KnotVector(k, t, first=first, clamped=True)


def _periodic(raw: Sequence[float], k: int) -> PeriodicKnotVector:
    s = np.asarray(raw, dtype=np.float64)
    if k < 1:
        raise ValueError(f"order must be >= 1, got {k}")
    if s.ndim != 1 or len(s) < k or len(s) == 0:
        raise TooFewKnots(f"a periodic sequence of order {k} needs n >= k points, got {s.size}")
    if not np.all(np.isfinite(s)) or np.any(s < 0.0) or np.any(s >= 1.0):
        raise OutOfRange("periodic knots must lie in [0, 1)")
    n = len(s)
    ext = np.concatenate([s, s[: k] + 1.0])
    _check_common(ext[: n + 1], k)
    coincide = np.flatnonzero(ext[k : k + n] <= ext[:n])
    if coincide.size:
        p = int(coincide[0])
        raise MultiplicityViolation(f"periodic knot {s[p]!r} has multiplicity > {k}")
    return PeriodicKnotVector(k, s)


def validate_knots(raw: Iterable[float], k: int, mode: Mode = "clamped") -> Union[KnotVector, PeriodicKnotVector]:
    """Validate raw knots and wrap them in the matching container.

    Raises
    ------
    MultiplicityViolation, NotSorted, TooFewKnots, OutOfRange, NotClamped
    """
    raw = list(raw)
    if not raw:
        raise TooFewKnots("no knots given")
    if k < 1:
        raise ValueError(f"order must be >= 1, got {k}")
    if mode == "clamped":
        return _clamped(raw, k)
    if mode == "periodic":
        return _periodic(raw, k)
    raise ValueError(f"unknown knot mode {mode!r}")


def clamp_segment(core, k: int, first: int = 0) -> KnotVector:
    """Clamp a knot segment by repeating its end points up to multiplicity ``k``.

    ``first`` is the index of ``core[0]``; the returned vector starts at
    ``first - pad`` where ``pad`` is the number of copies added on the left.
    """
    core = np.asarray(core, dtype=np.float64)
    pad_left = k - int(np.count_nonzero(core == core[0]))
    pad_right = k - int(np.count_nonzero(core == core[-1]))
    t = np.concatenate([np.full(pad_left, core[0]), core, np.full(pad_right, core[-1])])
    return _clamped(t, k, first=first - pad_left)


def lift_window(pk: PeriodicKnotVector, i: int) -> KnotVector:
    """Clamped sequence on ``[s_i, s_{i+n+1}]`` with ``t_j = s_{i+j}``, ``j = 0..n+1``.

    The boundary points are repeated until their multiplicity is ``k``;
    for ``s_i < s_{i+1}`` this gives the index range ``-k+1 .. n+k``.
    """
    n = pk.n
    if not 0 <= i < n:
        raise IndexOutOfRange(f"cell index {i} outside [0, {n - 1}]")
    return clamp_segment(pk.extended(i, i + n + 2), pk.order, 0)


def lift_cut(pk: PeriodicKnotVector) -> KnotVector:
    """Clamped sequence on ``[0, 1]`` cut open at 0.

    ``t_j = s_j`` for ``j = 0..n-1``; the point 0 is padded to multiplicity
    ``k`` (the first index is ``-m``) and 1 is repeated ``k`` times.
    """
    k = pk.order
    zeros = int(np.count_nonzero(pk.s == 0.0))
    m = k - zeros
    t = np.concatenate([np.zeros(m), pk.s, np.ones(k)])
    return _clamped(t, k, first=-m)


def periodic_lift(pk: PeriodicKnotVector) -> KnotVector:
    """Unclamped sequence ``t_j = s_j``, ``j = -k+1 .. n+k-1``.

    Its B-splines ``N_{-k+1}, ..., N_{n-1}`` form a partition of unity on
    ``[s_0, s_0 + 1]`` and wrap into the periodic B-splines.
    """
    k = pk.order
    t = pk.extended(-k + 1, pk.n + k)
    return KnotVector(k, t, first=-k + 1, clamped=False)


def uniform_knots(n: int, k: int, periodic: bool = True):
    """``n`` equal cells on [0, 1]."""
    if periodic:
        return _periodic(np.arange(n) / n, k)
    inner = np.linspace(0.0, 1.0, n + 1)
    return _clamped(np.concatenate([np.zeros(k - 1), inner, np.ones(k - 1)]), k)


def random_spacings(n: int, rng: np.random.Generator, min_ratio: float) -> np.ndarray:
    """``n`` positive spacings summing to 1, each at least ``min_ratio / n``.

    Uniform spacings conditioned on a minimum gap ``delta`` are distributed as
    ``delta + (1 - n*delta) * Dirichlet(1, ..., 1)``, so this draws exactly
    from the law that rejection sampling would produce.
    """
    if not 0.0 < min_ratio <= 1.0:
        raise ValueError(f"min_ratio must lie in (0, 1], got {min_ratio}")
    delta = min_ratio / n
    e = rng.exponential(size=n)
    return delta + (1.0 - n * delta) * (e / e.sum())


def random_knots(n: int, k: int, rng: np.random.Generator, min_ratio: float = 0.1, periodic: bool = True):
    """Random knots with ``n`` cells whose lengths are at least ``min_ratio / n``."""
    g = random_spacings(n, rng, min_ratio)
    if periodic:
        offset = rng.uniform()
        pts = np.mod(offset + np.concatenate([[0.0], np.cumsum(g[:-1])]), 1.0)
        pts[pts >= 1.0] = 0.0
        return _periodic(np.sort(pts), k)
    inner = np.concatenate([[0.0], np.cumsum(g[:-1]), [1.0]])
    return _clamped(np.concatenate([np.zeros(k - 1), inner, np.ones(k - 1)]), k)


def biinfinite_points(count: int, rng: np.random.Generator | None = None, min_ratio: float = 0.1) -> np.ndarray:
    """``count`` increasing points centred at 0 with unit mean spacing.

    A finite stand-in for a bi-infinite knot sequence: equally spaced when
    ``rng`` is None, otherwise with random spacings of at least ``min_ratio``.
    """
    if rng is None:
        g = np.ones(count - 1)
    else:
        g = random_spacings(count - 1, rng, min_ratio) * (count - 1)
    pts = np.concatenate([[0.0], np.cumsum(g)])
    return pts - pts[count // 2]


def parse_knot_text(text: str) -> Union[KnotVector, PeriodicKnotVector]:
    """Parse the knot file format.

    The first non-comment line is ``k <order> <clamped|periodic>``, followed
    by one decimal knot per line. ``#`` starts a comment.
    """
    header = None
    values: list[float] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if header is None:
            parts = body.split()
            if len(parts) != 3 or parts[0] != "k":
                raise KnotFileError(f"line {lineno}: expected 'k <order> <clamped|periodic>', got {body!r}")
            try:
                order = int(parts[1])
            except ValueError:
                raise KnotFileError(f"line {lineno}: order {parts[1]!r} is not an integer") from None
            if parts[2] not in ("clamped", "periodic"):
                raise KnotFileError(f"line {lineno}: unknown mode {parts[2]!r}")
            header = (order, parts[2])
            continue
        try:
            values.append(float(body))
        except ValueError:
            raise KnotFileError(f"line {lineno}: {body!r} is not a number") from None
        if not math.isfinite(values[-1]):
            raise KnotFileError(f"line {lineno}: knot must be finite")
    if header is None:
        raise KnotFileError("missing header line 'k <order> <clamped|periodic>'")
    return validate_knots(values, header[0], header[1])


def read_knot_file(path) -> Union[KnotVector, PeriodicKnotVector]:
    return parse_knot_text(Path(path).read_text(encoding="utf-8"))


def format_knot_text(kv: Union[KnotVector, PeriodicKnotVector]) -> str:
    if isinstance(kv, PeriodicKnotVector):
        head, vals = f"k {kv.order} periodic", kv.s
    else:
        head, vals = f"k {kv.order} clamped", kv.knots
    return "\n".join([head, *(repr(float(v)) for v in vals)]) + "\n"
