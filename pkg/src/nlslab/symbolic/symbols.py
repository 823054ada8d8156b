"""Trilinear symbols c(xi1, xi2, xi3), hypothesis checks and Galilean shifts."""
from __future__ import annotations

import csv
import hashlib
import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import expr as _expr


@dataclass(frozen=True, eq=False)
class TrilinearSymbol:
    """Symbol of a translation-invariant trilinear form C(u, conj(u), u).

    ``evaluator`` must already be symmetric in (xi1, xi3); use the
    constructors below, which symmetrize when needed.
    """

    evaluator: Callable = field(repr=False)
    spec: str = ""
    name: str = ""
    constant: complex | None = None
    shift: float = 0.0
    hypotheses: tuple[str, ...] = ()
    lowrank: object = field(default=None, repr=False, compare=False)

    def __call__(self, x1, x2, x3) -> np.ndarray:
        x1, x2, x3 = (np.asarray(v, dtype=float) for v in (x1, x2, x3))
        if self.shift:
            x1, x2, x3 = x1 - self.shift, x2 - self.shift, x3 - self.shift
        if self.constant is not None:
            shape = np.broadcast(x1, x2, x3).shape
            return np.full(shape, self.constant, dtype=complex)
        return np.asarray(self.evaluator(x1, x2, x3), dtype=complex)

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    @property
    def is_zero(self) -> bool:
        return self.constant is not None and self.constant == 0

    def fingerprint(self) -> str:
        text = f"{self.spec}|shift={self.shift!r}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_lowrank(self, decomposition) -> "TrilinearSymbol":
        return replace(self, lowrank=decomposition)


def constant_symbol(value: complex, name: str = "") -> TrilinearSymbol:
    value = complex(value)
    return TrilinearSymbol(lambda a, b, c: np.full(np.broadcast(a, b, c).shape, value),
                           spec=repr(value.real if value.imag == 0 else value),
                           name=name or "constant", constant=value)


def _is_symmetric(evaluator, samples: int = 64, seed: int = 7) -> bool:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-6, 6, size=(3, samples))
    try:
        a = evaluator(pts[0], pts[1], pts[2])
        b = evaluator(pts[2], pts[1], pts[0])
    except _expr.EvaluationError:
        return False
    scale = 1.0 + np.max(np.abs(a))
    return bool(np.max(np.abs(a - b)) <= 1e-14 * scale)


def symmetrize(evaluator: Callable) -> Callable:
    """(c(x1,x2,x3) + c(x3,x2,x1)) / 2, skipped when already symmetric."""
    if _is_symmetric(evaluator):
        return evaluator
    return lambda x1, x2, x3: 0.5 * (evaluator(x1, x2, x3) + evaluator(x3, x2, x1))


def parse_symbol(text: str, name: str = "", hypotheses: tuple[str, ...] = ()) -> TrilinearSymbol:
    """Compile an expression in x1, x2, x3 into a symmetrized symbol."""
    tree = _expr.parse(text)
    if isinstance(tree, _expr.Num):
        sym = constant_symbol(tree.value, name or text.strip())
        return replace(sym, spec=text.strip(), hypotheses=tuple(hypotheses))
    if _expr.swap(tree, "x1", "x3") == tree:
        evaluator = lambda x1, x2, x3, _t=tree: _expr.evaluate(_t, x1, x2, x3)
    else:
        evaluator = symmetrize(lambda x1, x2, x3, _t=tree: _expr.evaluate(_t, x1, x2, x3))
    return TrilinearSymbol(evaluator, spec=text.strip(), name=name or text.strip(),
                           hypotheses=tuple(hypotheses))


def galilean_shift(c: TrilinearSymbol, k: float) -> TrilinearSymbol:
    """xi -> c(xi1 - k, xi2 - k, xi3 - k)."""
    if k == 0:
        return c
    lowrank = c.lowrank.shifted(k) if c.lowrank is not None else None
    return replace(c, shift=c.shift + float(k), lowrank=lowrank)


def read_symbol_file(path) -> TrilinearSymbol:
    """Symbol spec file: '# key: value' metadata lines, then the expression.

    Recognised keys are ``name`` and ``hypotheses`` (comma separated).
    A ``table`` key points to a CSV table instead of an expression.
    """
    path = Path(path)
    meta: dict[str, str] = {}
    body = []
    for line in path.read_text().splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition(":")
            if sep:
                meta[key.strip().lower()] = value.strip()
        elif stripped:
            body.append(stripped)
    hyps = tuple(h.strip() for h in meta.get("hypotheses", "").split(",") if h.strip())
    if "table" in meta:
        table = Path(meta["table"])
        if not table.is_absolute():
            table = path.parent / table
        sym = tabulated_symbol(table)
        return replace(sym, name=meta.get("name", sym.name), hypotheses=hyps)
    if not body:
        raise _expr.ParseError(f"{path}: no expression", 0)
    return parse_symbol(" ".join(body), name=meta.get("name", ""), hypotheses=hyps)


def tabulated_symbol(path, name: str = "") -> TrilinearSymbol:
    """Symbol from a CSV of (xi1, xi2, xi3, re, im) rows on a tensor grid.

    Values are trilinearly interpolated; points outside the table are an error.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = []
        for row in reader:
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row[:5]])
            except ValueError:
                continue  # header
    data = np.array(rows)
    if data.ndim != 2 or data.shape[1] != 5:
        raise ValueError(f"{path}: expected five numeric columns")
    axes = [np.unique(data[:, j]) for j in range(3)]
    shape = tuple(len(a) for a in axes)
    if np.prod(shape) != len(data):
        raise ValueError(f"{path}: rows do not form a full tensor grid")
    idx = tuple(np.searchsorted(axes[j], data[:, j]) for j in range(3))
    values = np.empty(shape, dtype=complex)
    values[idx] = data[:, 3] + 1j * data[:, 4]
    return symbol_from_table(axes, values, spec=f"table:{hashlib.sha256(path.read_bytes()).hexdigest()[:16]}",
                             name=name or path.stem)


def symbol_from_table(axes, values, spec: str = "table", name: str = "table") -> TrilinearSymbol:
    interp = RegularGridInterpolator(tuple(axes), np.asarray(values, dtype=complex),
                                     method="linear", bounds_error=True)

    def evaluator(x1, x2, x3):
        shape = np.broadcast(x1, x2, x3).shape
        pts = np.stack([np.broadcast_to(v, shape).ravel() for v in (x1, x2, x3)], axis=-1)
        try:
            out = interp(pts)
        except ValueError as exc:
            raise _expr.EvaluationError("point outside the tabulated box") from exc
        return out.reshape(shape)

    return TrilinearSymbol(symmetrize(evaluator), spec=spec, name=name)


def write_symbol_table(path, c: TrilinearSymbol, axes) -> None:
    """Tabulate ``c`` on the tensor grid ``axes`` as CSV."""
    g1, g2, g3 = np.meshgrid(*axes, indexing="ij")
    vals = c(g1, g2, g3)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["xi1", "xi2", "xi3", "re", "im"])
        for p, v in zip(zip(g1.ravel(), g2.ravel(), g3.ravel()), vals.ravel()):
            writer.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                             repr(float(v.real)), repr(float(v.imag))])


# hypothesis checks -----------------------------------------------------------

_STENCILS = {
    0: (np.array([0]), np.array([1.0])),
    1: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
    4: (np.array([-2, -1, 0, 1, 2]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


@dataclass
class HypothesisReport:
    h1_max_derivative_bounds: dict[int, float]
    h2_max_imag_on_slice: float
    h3_min_diagonal: float
    box: float
    n_samples: int

    @property
    def h1(self) -> bool:
        return all(np.isfinite(v) for v in self.h1_max_derivative_bounds.values())

    @property
    def h2(self) -> bool:
        return self.h2_max_imag_on_slice < 1e-10

    @property
    def h3(self) -> bool:
        return self.h3_min_diagonal > 0

    @property
    def verdict(self) -> dict[str, bool]:
        return {"H1": self.h1, "H2": self.h2, "H3": self.h3}

    def as_dict(self) -> dict:
        return {
            "box": self.box,
            "n_samples": self.n_samples,
            "h1_max_derivative_bounds": {str(k): v for k, v in self.h1_max_derivative_bounds.items()},
            "h2_max_imag_on_slice": self.h2_max_imag_on_slice,
            "h3_min_diagonal": self.h3_min_diagonal,
            "verdict": self.verdict,
        }


def _multi_indices(order: int):
    for alpha in itertools.product(range(order + 1), repeat=3):
        if sum(alpha) == order:
            yield alpha


def derivative_bounds(c: TrilinearSymbol, points: np.ndarray, max_order: int = 4,
                      step: float = 0.05) -> dict[int, float]:
    """Sup over points and multi-indices of |d^alpha c| for each order."""
    bounds = {}
    for order in range(max_order + 1):
        best = 0.0
        for alpha in _multi_indices(order):
            acc = np.zeros(points.shape[1], dtype=complex)
            stencils = [_STENCILS[a] for a in alpha]
            for offs in itertools.product(*[range(len(s[0])) for s in stencils]):
                w = np.prod([stencils[j][1][o] for j, o in enumerate(offs)])
                shift = np.array([stencils[j][0][o] for j, o in enumerate(offs)], dtype=float)
                p = points + step * shift[:, None]
                acc += w * c(p[0], p[1], p[2])
            best = max(best, float(np.max(np.abs(acc))) / step ** order)
        bounds[order] = best
    return bounds


def check_hypotheses(c: TrilinearSymbol, box: float = 10.0, n_samples: int = 1000,
                     seed: int = 0) -> HypothesisReport:
    """Sample (H1) derivative bounds, (H2) the conservative slice, (H3) the diagonal."""
    if box <= 0:
        raise ValueError("box must be positive")
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = np.random.default_rng(seed)
    inner = max(box - 0.2, box / 2)  # keep stencils inside the box
    pts = rng.uniform(-inner, inner, size=(3, n_samples))
    h1 = derivative_bounds(c, pts)
    m = int(np.ceil(np.sqrt(n_samples)))
    s = np.linspace(-box, box, m)
    xi, eta = np.meshgrid(s, s, indexing="ij")
    h2 = float(np.max(np.abs(np.imag(c(xi, xi, eta)))))
    d = np.linspace(-box, box, n_samples)
    h3 = float(np.min(np.real(c(d, d, d))))
    return HypothesisReport(h1, h2, h3, box, n_samples)
