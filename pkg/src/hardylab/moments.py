"""Multi-indices, moments, moment-matching polynomial projections, and the
local oscillation functional together with its dual-norm characterization.

The projection P_B^N(f) solves the Gram system over monomials scaled by the
ball radius, G c = b with G_ab = int_B ((y-x0)/r)^(a+b) dy; this is the
L2(B)-orthogonal projection onto polynomials of degree <= N and matches the
moments of f over B up to order N exactly at the quadrature level.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericalError
from .grid import Ball, GridFunction, GridSpec

GRAM_CONDITION_LIMIT = 1e12

MultiIndex = tuple[int, ...]


def as_multiindex(alpha, dim: int | None = None) -> MultiIndex:
    """Normalize alpha to a tuple of nonnegative ints, optionally checking dim."""
    if isinstance(alpha, int):
        alpha = (alpha,)
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index entries must be nonnegative, got {alpha}")
    if dim is not None and len(alpha) != dim:
        raise ValueError(f"multi-index {alpha} has wrong dimension (want {dim})")
    return alpha


def order(alpha: MultiIndex) -> int:
    return sum(alpha)


def multiindices(dim: int, degree: int) -> list[MultiIndex]:
    """All multi-indices with |alpha| <= degree, sorted by (order, lexicographic)."""
    out = [
        a
        for a in itertools.product(range(degree + 1), repeat=dim)
        if sum(a) <= degree
    ]
    out.sort(key=lambda a: (sum(a), a))
    return out


@dataclass(frozen=True)
class PolySpace:
    """Polynomials of degree <= degree on R^dim, with an ordered monomial basis."""

    dim: int
    degree: int
    basis: tuple[MultiIndex, ...] = field(init=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        object.__setattr__(self, "basis", tuple(multiindices(self.dim, self.degree)))
        expected = math.comb(self.degree + self.dim, self.dim)
        assert len(self.basis) == len(set(self.basis)) == expected

    @property
    def dimension(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class HardyIndex:
    """The integrability index p in (0,1] with its cancellation bookkeeping.

    gamma_p = dim*(1/p - 1), N_p = floor(gamma_p); the critical case is
    gamma_p an integer, where the top moment bound picks up the log factor.
    Values within 1e-9 of an integer are snapped, so p = 1/2 or 1/3 written
    in floating point land in the critical branch as intended.
    """

    p: float
    dim: int

    def __post_init__(self):
        if not (0 < self.p <= 1):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def gamma_p(self) -> float:
        g = self.dim * (1.0 / self.p - 1.0)
        r = round(g)
        return float(r) if abs(g - r) <= 1e-9 * max(1.0, abs(g)) else g

    @property
    def N_p(self) -> int:
        return int(math.floor(self.gamma_p))

    @property
    def critical(self) -> bool:
        return self.gamma_p == self.N_p


def _monomial(pts: np.ndarray, x0, alpha: MultiIndex) -> np.ndarray:
    out = np.ones(pts.shape[1:])
    for i, a in enumerate(alpha):
        if a:
            out = out * (pts[i] - x0[i]) ** a
    return out


def monomial_field(spec: GridSpec, x0, alpha: MultiIndex) -> GridFunction:
    """(x - x0)^alpha sampled on the grid."""
    return GridFunction(spec, _monomial(spec.points(), x0, alpha))


def _boundary_l1_fraction(f: GridFunction) -> float:
    a = np.abs(f.samples)
    total = a.sum()
    if total == 0:
        return 0.0
    m = f.spec.points_per_axis
    mask = np.zeros(f.spec.shape, dtype=bool)
    for axis in range(f.spec.dim):
        sl = [slice(None)] * f.spec.dim
        sl[axis] = 0
        mask[tuple(sl)] = True
        sl[axis] = m - 1
        mask[tuple(sl)] = True
    return float(a[mask].sum() / total)


def moment(f: GridFunction, x0, alpha) -> float | complex:
    """The moment <f, (.-x0)^alpha>; f must be supported inside the domain."""
    alpha = as_multiindex(alpha, f.spec.dim)
    if _boundary_l1_fraction(f) > 1e-12:
        raise NumericalError("moment undefined: support escapes domain")
    vals = f.samples * _monomial(f.spec.points(), x0, alpha)
    out = vals.sum() * f.spec.cell_volume
    return float(out) if f.is_real else complex(out)


@dataclass
class PolyCoeffs:
    """Coefficients c_a of P(y) = sum_a c_a ((y-x0)/r)^a over a PolySpace."""

    space: PolySpace
    center: tuple[float, ...]
    radius: float
    coeffs: np.ndarray

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape[1:], dtype=self.coeffs.dtype)
        for a, c in zip(self.space.basis, self.coeffs):
            out = out + c * _monomial(pts, self.center, a) / self.radius ** order(a)
        return out

    def on_grid(self, spec: GridSpec) -> GridFunction:
        return GridFunction(spec, self.evaluate(spec.points()))

    def to_text(self) -> str:
        lines = [f"# poly dim={self.space.dim} degree={self.space.degree} "
                 f"center={','.join(repr(float(c)) for c in self.center)} radius={float(self.radius)!r}"]
        complex_ = np.iscomplexobj(self.coeffs)
        for a, c in zip(self.space.basis, self.coeffs):
            val = f"{float(c.real)!r} {float(c.imag)!r}" if complex_ else f"{float(c)!r}"
            lines.append(f"{','.join(map(str, a))} {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolyCoeffs":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        head = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split() if "=" in tok)
        dim, degree = int(head["dim"]), int(head["degree"])
        center = tuple(float(v) for v in head["center"].split(","))
        radius = float(head["radius"])
        space = PolySpace(dim, degree)
        coeffs = {}
        for ln in lines[1:]:
            key, *vals = ln.split()
            a = tuple(int(v) for v in key.split(","))
            coeffs[a] = float(vals[0]) if len(vals) == 1 else complex(float(vals[0]), float(vals[1]))
        arr = np.array([coeffs[a] for a in space.basis])
        return cls(space, center, radius, arr)


def _ball_quadrature(f: GridFunction, ball: Ball):
    mask = ball.mask(f.spec)
    npts = int(mask.sum())
    if npts == 0:
        raise NumericalError("degenerate region")
    return mask, npts


def _projection_system(f: GridFunction, ball: Ball, degree: int, weight: np.ndarray | None):
    spec = f.spec
    space = PolySpace(spec.dim, degree)
    mask, npts = _ball_quadrature(f, ball)
    if npts < space.dimension:
        raise NumericalError(
            f"degenerate region: ball holds {npts} grid points < {space.dimension} basis functions"
        )
    pts = spec.points()
    cols = np.stack(
        [
            (_monomial(pts, ball.center, a) / ball.radius ** order(a))[mask]
            for a in space.basis
        ],
        axis=1,
    )
    w = np.ones(npts) if weight is None else weight[mask]
    h = spec.cell_volume
    G = (cols * w[:, None]).T @ cols * h
    b = (cols * w[:, None]).T @ f.samples[mask] * h
    return space, mask, cols, G, b


def _solve_gram(G: np.ndarray, b: np.ndarray) -> np.ndarray:
    if np.linalg.cond(G) > GRAM_CONDITION_LIMIT:
        raise NumericalError("ill-conditioned projection (N too large for ball resolution)")
    c, low = linalg.cho_factor(G)
    if np.iscomplexobj(b):
        return linalg.cho_solve((c, low), b.real) + 1j * linalg.cho_solve((c, low), b.imag)
    return linalg.cho_solve((c, low), b)


def poly_project(f: GridFunction, ball: Ball, degree: int) -> PolyCoeffs:
    """L2(B)-orthogonal projection of f onto polynomials of degree <= N.

    Monomials are scaled by r^{-|a|} so the Gram condition number does not
    depend on the ball radius; a condition estimate above 1e12 is a hard
    failure, since a silent loss of moment matching would corrupt every
    oscillation value downstream.
    """
    space, _, _, G, b = _projection_system(f, ball, degree, None)
    coeffs = _solve_gram(G, b)
    return PolyCoeffs(space, ball.center, ball.radius, coeffs)


def weighted_poly_project(f: GridFunction, ball: Ball, degree: int, weight: GridFunction) -> PolyCoeffs:
    """Coefficients Q with int_B w*(f - Q)*(y-x0)^b dy = 0 for all |b| <= N.

    Used by the atom generator: subtracting w*Q from w*f kills moments while
    keeping the smooth edge cutoff w.
    """
    space, _, _, G, b = _projection_system(f, ball, degree, weight.samples)
    coeffs = _solve_gram(G, b)
    return PolyCoeffs(space, ball.center, ball.radius, coeffs)


def ball_measure(spec: GridSpec, ball: Ball) -> float:
    """Quadrature measure of the discrete ball (not the analytic volume)."""
    return float(ball.mask(spec).sum()) * spec.cell_volume


def match_moments_with_bump(spec: GridSpec, ball: Ball, degree: int,
                            weight: GridFunction, targets: np.ndarray) -> GridFunction:
    """A smooth function q = weight * (polynomial) supported in the ball whose
    raw moments about the ball center equal `targets` (ordered like the
    PolySpace basis) exactly at the quadrature level."""
    space = PolySpace(spec.dim, degree)
    targets = np.asarray(targets)
    if targets.shape != (space.dimension,):
        raise ValueError("targets must match the polynomial basis size")
    mask, npts = _ball_quadrature(weight, ball)
    if npts < space.dimension:
        raise NumericalError("degenerate region: too few grid points for moment matching")
    pts = spec.points()
    cols = np.stack(
        [
            (_monomial(pts, ball.center, a) / ball.radius ** order(a))[mask]
            for a in space.basis
        ],
        axis=1,
    )
    w = weight.samples[mask]
    G = (cols * w[:, None]).T @ cols * spec.cell_volume
    scaled = targets / np.array([ball.radius ** order(a) for a in space.basis])
    d = _solve_gram(G, scaled)
    out = np.zeros(spec.shape, dtype=d.dtype)
    out[mask] = w * (cols @ d)
    return GridFunction(spec, out)


def local_oscillation(f: GridFunction, ball: Ball, degree: int) -> float:
    """(|B|^{-1} int_B |f - P_B^N(f)|^2)^{1/2} with the discrete ball measure."""
    proj = poly_project(f, ball, degree)
    mask = ball.mask(f.spec)
    resid = f.samples[mask] - proj.evaluate(f.spec.points())[mask]
    return float(np.sqrt(np.sum(np.abs(resid) ** 2) / mask.sum()))


def psi(idx: HardyIndex, alpha, t: float) -> float:
    """The moment decay modulus: t^gamma, with the extra [log(1+1/t)]^{-1/p}
    factor in the integer-critical case |alpha| = gamma_p = N_p."""
    alpha = as_multiindex(alpha, idx.dim)
    if not (0 < t < 1):
        raise ValueError(f"t must lie in (0, 1), got {t}")
    k = order(alpha)
    g = idx.gamma_p
    if k < g:
        return float(t**g)
    if k == g and idx.critical:
        return float(t**g * math.log1p(1.0 / t) ** (-1.0 / idx.p))
    raise ValueError(
        f"|alpha| = {k} outside the admissible range: need |alpha| < gamma_p"
        f" = {g}, or |alpha| = gamma_p with gamma_p an integer"
    )


def _smooth_noise_on_ball(spec: GridSpec, ball: Ball, rng: np.random.Generator) -> np.ndarray:
    """Band-limited noise restricted to the ball; correlation length ~ r/2."""
    noise = rng.standard_normal(spec.shape)
    ell = ball.radius / 2.0
    xi = spec.frequencies()
    xi2 = np.sum(xi**2, axis=0)
    sm = np.fft.ifftn(np.exp(-(ell**2) * xi2 / 2.0) * np.fft.fftn(noise)).real
    sm[~ball.mask(spec)] = 0.0
    return sm


def dual_norm_check(
    f: GridFunction,
    ball: Ball,
    degree: int,
    trials: int,
    seed: int = 0,
    include_deterministic: bool = True,
) -> tuple[float, float]:
    """Probe the identity sup{|<f,psi>| : psi in L2(B), moments 0, ||psi|| <= 1}
    = ||f - P_B^N(f)||_{L2(B)}.

    Returns (lhs, rhs): lhs maximizes over `trials` random moment-free test
    functions (plus, when requested, the extremal candidate (f-P)/||f-P||,
    which makes lhs = rhs up to solver roundoff); rhs is the projection
    residual norm. lhs <= rhs always, by Cauchy-Schwarz at the discrete level.
    """
    spec = f.spec
    mask = ball.mask(spec)
    h = spec.cell_volume
    proj = poly_project(f, ball, degree)
    resid = f.samples.copy().astype(f.samples.dtype)
    resid[~mask] = 0
    resid[mask] -= proj.evaluate(spec.points())[mask]
    rhs = float(np.sqrt(np.sum(np.abs(resid[mask]) ** 2) * h))

    rng = np.random.default_rng(seed)
    lhs = 0.0
    candidates = []
    for _ in range(trials):
        candidates.append(_smooth_noise_on_ball(spec, ball, rng))
    if include_deterministic and rhs > 0:
        candidates.append(resid.copy())
    for cand in candidates:
        g = GridFunction(spec, cand)
        p = poly_project(g, ball, degree)
        v = cand.copy()
        v[mask] = v[mask] - p.evaluate(spec.points())[mask]
        v[~mask] = 0
        nrm = np.sqrt(np.sum(np.abs(v[mask]) ** 2) * h)
        if nrm < 1e-14:
            continue
        pairing = np.abs(np.sum(f.samples[mask] * np.conj(v[mask])) * h) / nrm
        lhs = max(lhs, float(pairing))
    return lhs, rhs
