"""Samples, conditioning boxes and pair indexing.

A :class:`Sample` holds an ``n x d`` matrix together with the column
positions of the conditioned block ``I`` and of the conditioning block
``J``.  Boxes live in the coordinate system of ``J``: a box over a sample
with ``|J| = q`` conditioning columns carries exactly ``q`` per-coordinate
constraints, each of which is either an :class:`Interval`, a
:class:`CodeSet` (for categorical columns) or ``None`` (unconstrained).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import IngestionError, ValidationError

ROLES = ("conditioned", "conditioning", "categorical", "ignored")
ROLE_ALIASES = {"cond": "conditioned", "i": "conditioned", "j": "conditioning",
                "cat": "categorical", "ignore": "ignored", "skip": "ignored"}


class Pair(NamedTuple):
    """Two positions inside the conditioned block, ``a < b`` (0-based)."""

    a: int
    b: int


def pair_list(p: int) -> list[Pair]:
    """All pairs in stacking order (0,1), (0,2), ..., (0,p-1), (1,2), ..., (p-2,p-1)."""
    if p < 2:
        raise ValidationError(f"need at least 2 conditioned variables, got p={p}")
    return [Pair(a, b) for a in range(p - 1) for b in range(a + 1, p)]


@dataclass(frozen=True, eq=False)
class Sample:
    data: np.ndarray
    conditioned: tuple[int, ...]
    conditioning: tuple[int, ...]
    columns: tuple[str, ...] | None = None
    # column position -> labels, for label-encoded categorical columns
    categories: Mapping[int, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 2:
            raise ValidationError("sample data must be a 2-d matrix")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        I = tuple(int(i) for i in self.conditioned)
        J = tuple(int(j) for j in self.conditioning)
        object.__setattr__(self, "conditioned", I)
        object.__setattr__(self, "conditioning", J)
        n, d = data.shape
        if n < 2:
            raise ValidationError(f"a sample needs n >= 2 rows, got {n}")
        if len(I) < 2:
            raise ValidationError(f"need at least 2 conditioned columns, got {len(I)}")
        if len(J) < 1:
            raise ValidationError("need at least 1 conditioning column")
        if len(set(I)) != len(I) or len(set(J)) != len(J) or set(I) & set(J):
            raise ValidationError("conditioned and conditioning columns must be distinct")
        if min(I + J) < 0 or max(I + J) >= d:
            raise ValidationError(f"column index out of range for d={d}")
        if not np.isfinite(data[:, list(I + J)]).all():
            bad_row, bad_col = np.argwhere(~np.isfinite(data[:, list(I + J)]))[0]
            raise IngestionError("missing or non-finite value", row=int(bad_row),
                                 column=self._name((I + J)[bad_col]))
        if self.columns is not None and len(self.columns) != d:
            raise ValidationError("columns must name every data column")

    @classmethod
    def from_blocks(cls, xi, xj, names: Sequence[str] | None = None) -> "Sample":
        """Stack a conditioned block and a conditioning block column-wise."""
        xi = np.asarray(xi, dtype=float)
        xj = np.asarray(xj, dtype=float)
        if xj.ndim == 1:
            xj = xj[:, None]
        p, q = xi.shape[1], xj.shape[1]
        return cls(np.hstack([xi, xj]), tuple(range(p)), tuple(range(p, p + q)),
                   tuple(names) if names is not None else None)

    def _name(self, col: int) -> str:
        return self.columns[col] if self.columns is not None else f"X{col + 1}"

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def p(self) -> int:
        return len(self.conditioned)

    @property
    def q(self) -> int:
        return len(self.conditioning)

    @cached_property
    def xi(self) -> np.ndarray:
        out = np.ascontiguousarray(self.data[:, list(self.conditioned)])
        out.setflags(write=False)
        return out

    @cached_property
    def xj(self) -> np.ndarray:
        out = np.ascontiguousarray(self.data[:, list(self.conditioning)])
        out.setflags(write=False)
        return out

    @property
    def conditioned_names(self) -> list[str]:
        return [self._name(c) for c in self.conditioned]

    @property
    def conditioning_names(self) -> list[str]:
        return [self._name(c) for c in self.conditioning]

    def take(self, rows) -> "Sample":
        rows = np.asarray(rows)
        return Sample(self.data[rows], self.conditioned, self.conditioning,
                      self.columns, self.categories)

    def recombine(self, xi, xj) -> "Sample":
        """New sample with the same column layout, built from given I and J blocks."""
        data = np.empty((xi.shape[0], self.d))
        data[:] = np.nan
        data[:, list(self.conditioned)] = xi
        data[:, list(self.conditioning)] = xj
        other = [c for c in range(self.d) if c not in self.conditioned + self.conditioning]
        if other:
            data[:, other] = 0.0
        return Sample(data, self.conditioned, self.conditioning, self.columns, self.categories)


# --------------------------------------------------------------------------
# Boxes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Interval on one conditioning coordinate; default openness is ``(lower, upper]``."""

    lower: float = -math.inf
    upper: float = math.inf
    lower_open: bool = True
    upper_open: bool = False

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValidationError("interval bounds must not be NaN")
        if lo > hi:
            raise ValidationError(f"interval lower bound {lo} exceeds upper bound {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, x: np.ndarray) -> np.ndarray:
        lo = x > self.lower if self.lower_open else x >= self.lower
        hi = x < self.upper if self.upper_open else x <= self.upper
        return lo & hi

    def intersect(self, other: "Interval") -> "Interval":
        if self.lower > other.lower:
            lo, lo_open = self.lower, self.lower_open
        elif self.lower < other.lower:
            lo, lo_open = other.lower, other.lower_open
        else:
            lo, lo_open = self.lower, self.lower_open or other.lower_open
        if self.upper < other.upper:
            hi, hi_open = self.upper, self.upper_open
        elif self.upper > other.upper:
            hi, hi_open = other.upper, other.upper_open
        else:
            hi, hi_open = self.upper, self.upper_open or other.upper_open
        return Interval(lo, hi, lo_open, hi_open)

    def describe(self, name: str) -> str:
        if math.isinf(self.lower) and math.isinf(self.upper):
            return f"{name} any"
        if math.isinf(self.lower):
            return f"{name} {'<' if self.upper_open else '<='} {self.upper:.6g}"
        if math.isinf(self.upper):
            return f"{name} {'>' if self.lower_open else '>='} {self.lower:.6g}"
        left = "(" if self.lower_open else "["
        right = ")" if self.upper_open else "]"
        return f"{name} in {left}{self.lower:.6g}, {self.upper:.6g}{right}"

    def to_dict(self) -> dict:
        return {
            "lower": None if math.isinf(self.lower) else self.lower,
            "upper": None if math.isinf(self.upper) else self.upper,
            "lower_open": self.lower_open,
            "upper_open": self.upper_open,
        }


@dataclass(frozen=True)
class CodeSet:
    """Explicit set of integer codes on a categorical coordinate."""

    codes: frozenset

    def __post_init__(self):
        object.__setattr__(self, "codes", frozenset(float(c) for c in self.codes))

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.isin(x, np.fromiter(sorted(self.codes), float, len(self.codes)))

    def describe(self, name: str) -> str:
        return f"{name} in {{{', '.join(f'{c:g}' for c in sorted(self.codes))}}}"

    def to_dict(self) -> dict:
        return {"codes": sorted(self.codes)}


Constraint = Interval | CodeSet | None


@dataclass(frozen=True)
class Box:
    """Axis-aligned box over the conditioning coordinates."""

    constraints: tuple

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ValidationError("a box needs at least one coordinate")

    @classmethod
    def universal(cls, dim: int) -> "Box":
        return cls((None,) * dim)

    @classmethod
    def on(cls, dim: int, coord: int, constraint: Constraint) -> "Box":
        cons = [None] * dim
        cons[coord] = constraint
        return cls(tuple(cons))

    @property
    def dim(self) -> int:
        return len(self.constraints)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[1] != self.dim:
            raise ValidationError(
                f"box has dimension {self.dim} but points have {points.shape[1]} coordinates")
        mask = np.ones(points.shape[0], dtype=bool)
        for k, con in enumerate(self.constraints):
            if con is not None:
                mask &= con.contains(points[:, k])
        return mask

    def restrict(self, coord: int, interval: Interval) -> "Box":
        """Intersect with ``interval`` on coordinate ``coord``."""
        cons = list(self.constraints)
        cur = cons[coord]
        if cur is None:
            cons[coord] = interval
        elif isinstance(cur, Interval):
            cons[coord] = cur.intersect(interval)
        else:
            raise ValidationError("cannot split a categorical coordinate by threshold")
        return Box(tuple(cons))

    def describe(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"J{k + 1}" for k in range(self.dim)]
        parts = [c.describe(names[k]) for k, c in enumerate(self.constraints) if c is not None]
        return " & ".join(parts) if parts else "all"

    def to_dict(self, names: Sequence[str] | None = None) -> list[dict]:
        out = []
        for k, con in enumerate(self.constraints):
            if con is None:
                continue
            entry = {"column": names[k] if names else k}
            entry.update(con.to_dict())
            out.append(entry)
        return out


@dataclass(frozen=True)
class BoxFamily:
    boxes: tuple
    disjoint: bool = False
    labels: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.boxes:
            raise ValidationError("a box family needs at least one box")
        dims = {b.dim for b in self.boxes}
        if len(dims) != 1:
            raise ValidationError("all boxes in a family must share one dimension")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
            if len(self.labels) != len(self.boxes):
                raise ValidationError("one label per box is required")

    @property
    def m(self) -> int:
        return len(self.boxes)

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    def membership(self, sample: Sample) -> np.ndarray:
        """Boolean ``(m, n)`` matrix of box memberships."""
        _check_dim(sample, self.boxes[0])
        return np.vstack([b.contains(sample.xj) for b in self.boxes])

    def is_disjoint_on(self, sample: Sample) -> bool:
        return bool((self.membership(sample).sum(axis=0) <= 1).all())

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        return {
            "disjoint": self.disjoint,
            "labels": list(self.labels) if self.labels else None,
            "boxes": [b.to_dict(names) for b in self.boxes],
        }


def _check_dim(sample: Sample, box: Box) -> None:
    if box.dim != sample.q:
        raise ValidationError(
            f"box dimension {box.dim} does not match |J| = {sample.q}")


def members(sample: Sample, box: Box) -> np.ndarray:
    """Row indices of ``sample`` whose conditioning part lies in ``box``, in order."""
    _check_dim(sample, box)
    return np.flatnonzero(box.contains(sample.xj))


def overlap_fraction(sample: Sample, box_k: Box, box_l: Box) -> float:
    """Empirical probability of landing in both boxes."""
    _check_dim(sample, box_k)
    _check_dim(sample, box_l)
    both = box_k.contains(sample.xj) & box_l.contains(sample.xj)
    return int(both.sum()) / sample.n


def interval_family(edges: Sequence[float], dim: int = 1, coord: int = 0,
                    labels=None) -> BoxFamily:
    """Partition of one coordinate into ``(-inf, e1], (e1, e2], ..., (e_{m-1}, inf)``."""
    edges = [float(e) for e in edges]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError("interval edges must be strictly increasing")
    bounds = [-math.inf] + edges + [math.inf]
    boxes = [Box.on(dim, coord, Interval(lo, hi)) for lo, hi in zip(bounds, bounds[1:])]
    return BoxFamily(tuple(boxes), disjoint=True, labels=labels)


def quantile_family(sample: Sample, coord: int, m: int) -> BoxFamily:
    """``m`` boxes cut at the empirical ``k/m`` quantiles of one conditioning coordinate."""
    if m < 2:
        raise ValidationError("need m >= 2 boxes")
    x = sample.xj[:, coord]
    edges = np.unique(np.quantile(x, np.arange(1, m) / m))
    return interval_family(edges, dim=sample.q, coord=coord)


def category_family(sample: Sample, coord: int) -> BoxFamily:
    """One box per distinct value of a (categorical) conditioning coordinate."""
    col = sample.conditioning[coord]
    values = np.unique(sample.xj[:, coord])
    labels = sample.categories.get(col)
    names = [labels[int(v)] if labels else f"{v:g}" for v in values]
    boxes = [Box.on(sample.q, coord, CodeSet(frozenset([v]))) for v in values]
    return BoxFamily(tuple(boxes), disjoint=True, labels=names)


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------


def parse_roles(given: str | Mapping[str, str]) -> dict[str, str]:
    """Accept ``"X1:conditioned,X2:conditioned,X3:conditioning"`` or a mapping."""
    if isinstance(given, Mapping):
        roles = {str(k): str(v) for k, v in given.items()}
    else:
        text = str(given).strip()
        if text.startswith("{") or Path(text).suffix == ".json":
            raw = json.loads(text if text.startswith("{") else Path(text).read_text())
            return parse_roles(raw)
        roles = {}
        for item in filter(None, (t.strip() for t in text.split(","))):
            name, sep, role = item.rpartition(":")
            if not sep:
                raise ValidationError(f"role assignment {item!r} must look like NAME:ROLE")
            roles[name.strip()] = role.strip()
    roles = {name: ROLE_ALIASES.get(role.lower(), role.lower()) for name, role in roles.items()}
    for name, role in roles.items():
        if role not in ROLES:
            raise ValidationError(f"unknown role {role!r} for column {name!r}; expected one of {ROLES}")
    return roles


def load_sample(path: str | Path, roles: str | Mapping[str, str]) -> Sample:
    """Read a headed UTF-8 CSV file and assign column roles.

    Columns missing from ``roles`` are ignored.  Conditioned and
    conditioning columns keep their file order.  Columns with role
    ``categorical`` are conditioning columns whose labels are mapped to
    integer codes in sorted label order.
    """
    roles = parse_roles(roles)
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"input file {str(path)!r} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError("input file is empty") from None
        rows = list(reader)
    unknown = set(roles) - set(header)
    if unknown:
        raise IngestionError(f"columns not found in header: {sorted(unknown)}")
    used = [h for h in header if roles.get(h, "ignored") != "ignored"]
    cond = [h for h in used if roles[h] == "conditioned"]
    conding = [h for h in used if roles[h] in ("conditioning", "categorical")]
    if len(cond) < 2:
        raise IngestionError(f"need at least 2 conditioned columns, got {len(cond)}")
    if not conding:
        raise IngestionError("need at least 1 conditioning column")
    position = {h: i for i, h in enumerate(header)}
    n = len(rows)
    data = np.empty((n, len(used)))
    raw_labels: dict[int, list[str]] = {}
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise IngestionError(f"expected {len(header)} fields, found {len(row)}", row=r)
        for c, name in enumerate(used):
            cell = row[position[name]].strip()
            if cell == "" or cell.lower() in ("na", "nan", "null"):
                raise IngestionError("missing value", row=r, column=name)
            if roles[name] == "categorical":
                raw_labels.setdefault(c, []).append(cell)
                continue
            try:
                value = float(cell)
            except ValueError:
                raise IngestionError(f"non-numeric value {cell!r}", row=r, column=name) from None
            if not math.isfinite(value):
                raise IngestionError(f"non-finite value {cell!r}", row=r, column=name)
            data[r, c] = value
    categories = {}
    for c, labels in raw_labels.items():
        levels = tuple(sorted(set(labels)))
        code = {lab: i for i, lab in enumerate(levels)}
        data[:, c] = [code[lab] for lab in labels]
        categories[c] = levels
    I = tuple(used.index(h) for h in cond)
    J = tuple(used.index(h) for h in conding)
    return Sample(data, I, J, tuple(used), categories)


def _constraint_from_config(entry: Mapping, sample: Sample) -> tuple[int, Constraint]:
    names = sample.conditioning_names
    col = entry.get("column")
    if isinstance(col, int):
        coord = col
    elif col in names:
        coord = names.index(col)
    else:
        raise ValidationError(f"box column {col!r} is not a conditioning column ({names})")
    if "codes" in entry:
        labels = sample.categories.get(sample.conditioning[coord])
        codes = []
        for c in entry["codes"]:
            if labels is not None and isinstance(c, str):
                if c not in labels:
                    raise ValidationError(f"unknown category {c!r} for column {col!r}")
                codes.append(labels.index(c))
            else:
                codes.append(float(c))
        return coord, CodeSet(frozenset(codes))
    lo = entry.get("lower")
    hi = entry.get("upper")
    return coord, Interval(
        -math.inf if lo is None else float(lo),
        math.inf if hi is None else float(hi),
        bool(entry.get("lower_open", True)),
        bool(entry.get("upper_open", False)),
    )


def box_family_from_config(config, sample: Sample) -> BoxFamily:
    """Build a family from the JSON box configuration.

    ``config`` is either a list of boxes or ``{"boxes": [...], "disjoint": bool}``.
    A box is one constraint object or a list of constraint objects (their
    conjunction); a constraint is ``{column, lower, upper, lower_open,
    upper_open}`` or ``{column, codes: [...]}``.  ``null`` bounds are
    infinite.
    """
    if isinstance(config, (str, Path)):
        config = json.loads(Path(config).read_text())
    declared = None
    labels = None
    if isinstance(config, Mapping):
        declared = config.get("disjoint")
        labels = config.get("labels")
        config = config["boxes"]
    boxes = []
    for entry_group in config:
        entries = [entry_group] if isinstance(entry_group, Mapping) else list(entry_group)
        box = Box.universal(sample.q)
        cons = list(box.constraints)
        for entry in entries:
            coord, con = _constraint_from_config(entry, sample)
            if cons[coord] is None:
                cons[coord] = con
            elif isinstance(con, Interval) and isinstance(cons[coord], Interval):
                cons[coord] = cons[coord].intersect(con)
            else:
                raise ValidationError(f"conflicting constraints on column {entry.get('column')!r}")
        boxes.append(Box(tuple(cons)))
    family = BoxFamily(tuple(boxes), disjoint=False, labels=labels)
    disjoint = family.is_disjoint_on(sample) if declared is None else bool(declared)
    return BoxFamily(family.boxes, disjoint=disjoint, labels=labels)


def iter_pairs_names(sample: Sample, pairs: Iterable[Pair]) -> list[list[str]]:
    names = sample.conditioned_names
    return [[names[a], names[b]] for a, b in pairs]
