"""Exact finite multi-view domains, i.i.d. sampling and synthetic shift pairs.

A :class:`FiniteDomain` is a finite set of labeled multi-view atoms with
probabilities, so every population quantity over it can be computed by
enumeration. Samples drawn from it remember which atom each row came from.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _jsonfmt
from ._random import categorical_draws, stream
from .measures import Categorical


class SchemaMismatchError(ValueError):
    """Raised when two objects disagree on the number or size of views."""


@dataclass(frozen=True)
class Schema:
    """Number of views and per-view dimensions.

    The total dimension is the sum of ``dims``; it is never stored.
    ``n_views == 1`` is accepted for single-view degenerate cases.
    """

    n_views: int
    dims: tuple[int, ...]

    def __init__(self, n_views: int, dims: Sequence[int]):
        dims = tuple(int(d) for d in dims)
        if n_views < 1:
            raise ValueError("a schema needs at least one view")
        if len(dims) != n_views:
            raise ValueError(f"{n_views} views but {len(dims)} dimensions")
        if any(d < 1 for d in dims):
            raise ValueError(f"view dimensions must be positive, got {dims}")
        object.__setattr__(self, "n_views", int(n_views))
        object.__setattr__(self, "dims", dims)

    def to_json(self) -> dict:
        return {"views": self.n_views, "dims": list(self.dims)}

    @classmethod
    def from_json(cls, obj: dict) -> "Schema":
        return cls(obj["views"], obj["dims"])

    def check(self, other: "Schema") -> None:
        if self != other:
            raise SchemaMismatchError(f"schema mismatch: {self} vs {other}")


@dataclass(frozen=True, eq=False)
class MultiViewPoint:
    views: tuple[np.ndarray, ...]

    def __init__(self, views: Iterable[Sequence[float]]):
        arrs = []
        for v in views:
            a = np.array(v, dtype=float).reshape(-1)
            a.setflags(write=False)
            arrs.append(a)
        object.__setattr__(self, "views", tuple(arrs))

    @property
    def schema(self) -> Schema:
        return Schema(len(self.views), [v.size for v in self.views])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiViewPoint):
            return NotImplemented
        return len(self.views) == len(other.views) and all(
            np.array_equal(a, b) for a, b in zip(self.views, other.views))

    def __hash__(self) -> int:
        return hash(tuple(v.tobytes() for v in self.views))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _stack_views(schema: Schema, views: Sequence[np.ndarray], n: int) -> tuple[np.ndarray, ...]:
    if len(views) != schema.n_views:
        raise SchemaMismatchError(f"expected {schema.n_views} views, got {len(views)}")
    out = []
    for v, (arr, d) in enumerate(zip(views, schema.dims)):
        arr = np.array(arr, dtype=float)
        if arr.shape != (n, d):
            raise SchemaMismatchError(f"view {v}: expected shape {(n, d)}, got {arr.shape}")
        out.append(_freeze(arr))
    return tuple(out)


def _check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError("labels must be -1 or +1")
    return _freeze(labels.astype(np.int64))


@dataclass(frozen=True, eq=False)
class PointSet:
    """Weighted finite set of multi-view points."""

    schema: Schema
    views: tuple[np.ndarray, ...]
    weights: np.ndarray
    labels: np.ndarray | None

    @property
    def n_points(self) -> int:
        return self.weights.size

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def point(self, i: int) -> MultiViewPoint:
        return MultiViewPoint(v[i] for v in self.views)


@dataclass(frozen=True, eq=False)
class FiniteDomain(PointSet):
    """Exact joint distribution over finitely many labeled multi-view atoms."""

    probs: Categorical = None  # type: ignore[assignment]

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    def atoms(self) -> Iterator[tuple[MultiViewPoint, int, float]]:
        for i in range(self.n_atoms):
            yield self.point(i), int(self.labels[i]), float(self.weights[i])

    def marginal(self) -> PointSet:
        """The distribution over points with labels dropped."""
        return PointSet(self.schema, self.views, self.weights, None)

    def permuted(self, order: Sequence[int]) -> "FiniteDomain":
        order = np.asarray(order)
        return _make_domain(self.schema, [v[order] for v in self.views],
                            self.labels[order], self.weights[order])


def _make_domain(schema: Schema, views, labels, probs) -> FiniteDomain:
    probs = Categorical(probs)
    n = probs.support_size
    labels = _check_labels(labels)
    if labels.shape != (n,):
        raise ValueError("one label per atom required")
    return FiniteDomain(schema=schema, views=_stack_views(schema, views, n),
                        weights=probs.weights, labels=labels, probs=probs)


def make_finite_domain(schema: Schema, atoms: Sequence[tuple]) -> FiniteDomain:
    """Validate ``(point, label, probability)`` triples into a domain."""
    atoms = list(atoms)
    if not atoms:
        raise ValueError("a finite domain needs at least one atom")
    points = [a[0] if isinstance(a[0], MultiViewPoint) else MultiViewPoint(a[0]) for a in atoms]
    for p in points:
        schema.check(p.schema)
    views = [np.stack([p.views[v] for p in points]) for v in range(schema.n_views)]
    return _make_domain(schema, views, [a[1] for a in atoms], [a[2] for a in atoms])


@dataclass(frozen=True, eq=False)
class SampleSet(PointSet):
    """Rows drawn from a domain, each with weight ``1/m``."""

    origin_seed: int | None = None
    atom_index: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.weights.size

    def rows(self) -> Iterator[tuple[MultiViewPoint, int | None]]:
        for i in range(self.m):
            yield self.point(i), (None if self.labels is None else int(self.labels[i]))

    def unlabeled(self) -> "SampleSet":
        return SampleSet(self.schema, self.views, self.weights, None,
                         self.origin_seed, self.atom_index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None and other.labels is not None
            and np.array_equal(self.labels, other.labels))
        return (self.schema == other.schema and same_labels
                and all(np.array_equal(a, b) for a, b in zip(self.views, other.views)))

    __hash__ = None  # type: ignore[assignment]


def make_sample(schema: Schema, views: Sequence[np.ndarray], labels=None,
                origin_seed: int | None = None, atom_index=None) -> SampleSet:
    if len(views) == 0:
        raise ValueError("no views given")
    m = np.asarray(views[0]).shape[0]
    if m < 1:
        raise ValueError("a sample needs at least one row")
    views = _stack_views(schema, views, m)
    if labels is not None:
        labels = _check_labels(labels)
        if labels.shape != (m,):
            raise ValueError("one label per row required")
    weights = _freeze(np.full(m, 1.0 / m))
    if atom_index is not None:
        atom_index = _freeze(np.asarray(atom_index, dtype=np.int64))
    return SampleSet(schema, views, weights, labels, origin_seed, atom_index)


def draw_atom_indices(domain: FiniteDomain, m: int, seed: int) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be >= 1")
    return categorical_draws(domain.weights, m, stream(seed, 0))


def draw_sample(domain: FiniteDomain, m: int, labeled: bool, seed: int) -> SampleSet:
    """``m`` i.i.d. draws from the atom distribution of ``domain``."""
    idx = draw_atom_indices(domain, m, seed)
    return make_sample(domain.schema, [v[idx] for v in domain.views],
                       domain.labels[idx] if labeled else None,
                       origin_seed=int(seed), atom_index=idx)


def synth_shift_pair(n_views: int, d_per_view: Sequence[int], atoms_per_domain: int,
                     shift: float, noisy_views: Iterable[int] = (), seed: int = 0,
                     separation: float = 1.0) -> tuple[FiniteDomain, FiniteDomain]:
    """Source/target domains sharing labels, target moved by ``shift``.

    Informative views place atom features around ``label * center_v``;
    views in ``noisy_views`` draw features independently of the label.
    The target translates every atom along a per-view direction, adds a
    per-atom jitter, and mixes the atom probabilities toward a fixed random
    reweighting; all three scale linearly with ``shift``, so ``shift = 0``
    reproduces the source atom for atom.
    """
    if not 0.0 <= shift <= 1.0:
        raise ValueError(f"shift must lie in [0, 1], got {shift}")
    if atoms_per_domain < 2:
        raise ValueError("atoms_per_domain must be >= 2")
    schema = Schema(n_views, d_per_view)
    noisy = set(int(v) for v in noisy_views)
    if not noisy <= set(range(n_views)):
        raise ValueError(f"noisy views {sorted(noisy)} outside [0, {n_views})")

    rng = stream(seed, 1)
    n = atoms_per_domain
    labels = np.where(np.arange(n) % 2 == 0, 1, -1)
    labels = labels[rng.permutation(n)]

    src_views, tgt_views = [], []
    for v, d in enumerate(schema.dims):
        center = rng.normal(size=d)
        center *= separation / max(np.linalg.norm(center), 1e-12)
        noise = rng.normal(size=(n, d))
        direction = rng.normal(size=d)
        direction /= max(np.linalg.norm(direction), 1e-12)
        jitter = rng.normal(scale=0.5, size=(n, d))
        if v in noisy:
            xs = noise
        else:
            xs = labels[:, None] * center[None, :] + noise
        src_views.append(xs)
        tgt_views.append(xs + shift * (2.0 * direction[None, :] + jitter))

    p_src = rng.dirichlet(np.full(n, 2.0))
    p_src /= p_src.sum()
    reweight = rng.dirichlet(np.full(n, 0.5))
    p_tgt = (1.0 - shift) * p_src + shift * reweight
    p_tgt /= p_tgt.sum()
    source = _make_domain(schema, src_views, labels, p_src)
    if shift == 0.0:
        return source, source
    return source, _make_domain(schema, tgt_views, labels, p_tgt)


# -- file formats ---------------------------------------------------------

def domain_to_json(domain: FiniteDomain, role: str) -> dict:
    atoms = []
    for i in range(domain.n_atoms):
        atoms.append({"views": [v[i].tolist() for v in domain.views],
                      "label": int(domain.labels[i]), "prob": float(domain.weights[i])})
    return {"role": role, "schema": domain.schema.to_json(), "atoms": atoms}


def domain_from_json(obj: dict) -> FiniteDomain:
    schema = Schema.from_json(obj["schema"])
    return make_finite_domain(schema, [(a["views"], a["label"], a["prob"]) for a in obj["atoms"]])


def write_domain(domain: FiniteDomain, path: str | os.PathLike, role: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_jsonfmt.dumps(domain_to_json(domain, role)) + "\n")


def read_domain(path: str | os.PathLike) -> FiniteDomain:
    with open(path, encoding="utf-8") as fh:
        return domain_from_json(_jsonfmt.loads(fh.read()))


def write_sample_jsonl(sample: SampleSet, path: str | os.PathLike) -> None:
    """JSON-lines: a header, then one ``{"views", "label"?}`` object per row."""
    header = {"schema": sample.schema.to_json(), "labeled": sample.labeled}
    if sample.origin_seed is not None:
        header["origin_seed"] = int(sample.origin_seed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_jsonfmt.dumps(header) + "\n")
        for i in range(sample.m):
            row = {"views": [v[i].tolist() for v in sample.views]}
            if sample.labeled:
                row["label"] = int(sample.labels[i])
            fh.write(_jsonfmt.dumps(row) + "\n")


def read_sample_jsonl(path: str | os.PathLike) -> SampleSet:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = _jsonfmt.loads(lines[0])
    schema = Schema.from_json(header["schema"])
    labeled = bool(header["labeled"])
    rows = [_jsonfmt.loads(ln) for ln in lines[1:]]
    if not rows:
        raise ValueError(f"{path}: no rows")
    for r in rows:
        if len(r["views"]) != schema.n_views:
            raise SchemaMismatchError(f"{path}: row has {len(r['views'])} views")
        if any(len(x) != d for x, d in zip(r["views"], schema.dims)):
            raise SchemaMismatchError(f"{path}: row dimensions do not match header")
        if labeled != ("label" in r):
            raise ValueError(f"{path}: rows must be all labeled or all unlabeled")
    views = [np.array([r["views"][v] for r in rows], dtype=float).reshape(len(rows), d)
             for v, d in enumerate(schema.dims)]
    labels = [r["label"] for r in rows] if labeled else None
    return make_sample(schema, views, labels, origin_seed=header.get("origin_seed"))
