"""Lattice Green's function G_d(x) for simple random walk on Z^d, d >= 3.

Evaluation uses the one-dimensional product-of-Bessels integral
    G_d(x) = int_0^inf e^{-t} prod_i I_{|x_i|}(t/d) dt
           = int_0^inf prod_i ive(|x_i|, t/d) dt
where ive(n, z) = e^{-z} I_n(z) is the exponentially scaled modified Bessel
function. The integrand decays like (2*pi*t/d)^{-d/2}, so the half-infinite
integral is split at a truncation point T: adaptive quadrature on [0, T] plus
a two-term analytic tail from the large-argument Bessel expansion.

Beyond a crossover radius the asymptotic form c(d) * ||x||^{2-d} is used,
with c(d) calibrated by least squares against quadrature values.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import ive

from .lattice import Point


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls evaluation of the half-infinite Bessel-product integral."""
    truncation: float = 4.0e4
    abs_tol_origin: float = 1e-9
    abs_tol: float = 1e-8
    limit: int = 400  # max adaptive subintervals

    def key(self) -> str:
        blob = json.dumps([self.truncation, self.abs_tol_origin,
                           self.abs_tol, self.limit])
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _integrand(t: np.ndarray, orders: tuple[int, ...], d: int) -> np.ndarray:
    z = t / d
    out = np.ones_like(np.asarray(t, dtype=float))
    for n in orders:
        out = out * ive(n, z)
    return out


def _tail(T: float, orders: tuple[int, ...], d: int) -> float:
    """Analytic tail int_T^inf using the two-term uniform Bessel expansion:
    ive(n, z) ~ (2 pi z)^{-1/2} (1 - (4n^2 - 1)/(8z)).
    """
    A = (d / (2 * math.pi)) ** (d / 2)
    # product correction sum: - sum_i (4 n_i^2 - 1)/(8 z), z = t/d
    corr = sum(4 * n * n - 1 for n in orders) * d / 8.0
    p = d / 2.0
    # int_T^inf A t^-p dt - int_T^inf A*corr t^-(p+1) dt
    lead = A * T ** (1 - p) / (p - 1)
    nxt = A * corr * T ** (-p) / p
    return lead - nxt


def _quadrature(orders: tuple[int, ...], d: int, spec: QuadratureSpec,
                tol: float) -> float:
    T = spec.truncation
    val, _ = integrate.quad(
        _integrand, 0.0, T, args=(orders, d),
        epsabs=tol / 2, epsrel=1e-12, limit=spec.limit,
    )
    return val + _tail(T, orders, d)


def _canon(x: Point) -> tuple[int, ...]:
    return tuple(sorted(abs(c) for c in x))


@dataclass
class GreenTable:
    """Memoized Green's function values for a fixed dimension.

    Values are keyed by sorted absolute coordinates (the full symmetry class).
    Exact quadrature inside `crossover_radius`, asymptotic form beyond.
    """
    dimension: int
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    crossover_radius: float = 30.0
    memo: dict = field(default_factory=dict)
    _bmemo: dict = field(default_factory=dict, repr=False)
    _frozen: bool = False
    _c: Optional[float] = None
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def __post_init__(self):
        if self.dimension < 3:
            raise ValueError("walk recurrent: Green's function diverges")

    # -- core evaluation ----------------------------------------------------

    def _exact(self, key: tuple[int, ...]) -> float:
        try:
            return self.memo[key]
        except KeyError:
            pass
        if self._frozen:
            raise RuntimeError("GreenTable frozen; missing key %r" % (key,))
        tol = self.spec.abs_tol_origin if not any(key) else self.spec.abs_tol
        with self._lock:
            if key not in self.memo:
                self.memo[key] = _quadrature(key, self.dimension, self.spec, tol)
        return self.memo[key]

    def origin(self) -> float:
        return self._exact((0,) * self.dimension)

    def __call__(self, x: Point) -> float:
        key = _canon(x)
        r2 = sum(c * c for c in key)
        if r2 > self.crossover_radius ** 2:
            return self.asymptotic_constant() * r2 ** ((2 - self.dimension) / 2)
        return self._exact(key)

    def green(self, x: Point) -> float:
        return self(x)

    def many(self, disps: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over an (k, d) array of displacements."""
        disps = np.asarray(disps, dtype=np.int64)
        flat = disps.reshape(-1, self.dimension)
        r2 = (flat.astype(np.float64) ** 2).sum(axis=1)
        out = np.empty(len(flat))
        far = r2 > self.crossover_radius**2
        if far.any():
            out[far] = self.asymptotic_constant() * r2[far] ** ((2 - self.dimension) / 2)
        if not far.all():
            near = np.flatnonzero(~far)
            keys = np.sort(np.abs(flat[near]), axis=1)
            # near keys have coordinates <= crossover_radius < 64, so they
            # pack into a single int64 code for a vectorized unique-lookup
            codes = keys @ (64 ** np.arange(self.dimension, dtype=np.int64))
            uniq, first, inv = np.unique(codes, return_index=True,
                                         return_inverse=True)
            bmemo = self._bmemo
            vals = np.empty(len(uniq))
            for i, c in enumerate(uniq):
                val = bmemo.get(int(c))
                if val is None:
                    key = tuple(int(v) for v in keys[first[i]])
                    val = bmemo[int(c)] = self._exact(key)
                vals[i] = val
            out[near] = vals[inv]
        return out.reshape(disps.shape[:-1])

    # -- asymptotics ---------------------------------------------------------

    def asymptotic_constant(self) -> float:
        """c(d) fitted so G(x) ~ c(d) ||x||^{2-d}, over the shell [15, 30]."""
        if self._c is None:
            with self._lock:
                if self._c is None:
                    self._c = self._fit_constant()
        return self._c

    def _fit_constant(self, radii=(15.0, 30.0)) -> float:
        d = self.dimension
        lo, hi = radii
        # Axis displacements only: corrections to the power law are
        # direction-dependent, so a single direction family extrapolates
        # cleanly; the fitted constant itself is isotropic.
        norms, vals = [], []
        for r in range(int(lo), int(hi) + 1):
            key = _canon((r,) + (0,) * (d - 1))
            norms.append(float(r))
            vals.append(self._exact(key) * float(r) ** (d - 2))
        # G(x)*||x||^{d-2} = c + b/||x||^2 + ...; fit out the first correction.
        norms = np.asarray(norms)
        design = np.column_stack([np.ones_like(norms), norms ** -2.0])
        coef, *_ = np.linalg.lstsq(design, np.asarray(vals), rcond=None)
        return float(coef[0])

    def freeze(self) -> "GreenTable":
        self.asymptotic_constant()
        self._frozen = True
        return self

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        rows = [{"key": list(k), "value": v} for k, v in sorted(self.memo.items())]
        payload = {
            "dimension": self.dimension,
            "spec": self.spec.key(),
            "crossover_radius": self.crossover_radius,
            "asymptotic_constant": self._c,
            "memo": rows,
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path: str | Path, spec: Optional[QuadratureSpec] = None) -> "GreenTable":
        payload = json.loads(Path(path).read_text())
        spec = spec or QuadratureSpec()
        if payload["spec"] != spec.key():
            raise ValueError("cache written with a different quadrature spec")
        table = cls(dimension=payload["dimension"], spec=spec,
                    crossover_radius=payload["crossover_radius"])
        table.memo = {tuple(r["key"]): r["value"] for r in payload["memo"]}
        table._c = payload["asymptotic_constant"]
        return table


_TABLES: dict = {}
_TABLES_LOCK = threading.Lock()


def default_table(d: int, spec: Optional[QuadratureSpec] = None) -> GreenTable:
    """Shared, memoizing table for dimension d (one per quadrature spec)."""
    spec = spec or QuadratureSpec()
    key = (d, spec.key())
    with _TABLES_LOCK:
        table = _TABLES.get(key)
        if table is None:
            table = _TABLES[key] = GreenTable(d, spec)
    return table


def green_origin(d: int, spec: Optional[QuadratureSpec] = None) -> float:
    """G_d(o) = int_0^inf e^{-t} I_0(t/d)^d dt."""
    if d < 3:
        raise ValueError("walk recurrent: Green's function diverges")
    return default_table(d, spec).origin()


def green(d: int, x: Point, spec: Optional[QuadratureSpec] = None,
          table: Optional[GreenTable] = None) -> float:
    if table is not None:
        return table(x)
    return default_table(d, spec)(x)


def asymptotic_constant(d: int, spec: Optional[QuadratureSpec] = None) -> float:
    return default_table(d, spec).asymptotic_constant()
