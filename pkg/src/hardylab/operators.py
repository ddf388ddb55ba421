"""Linear operators (Fourier multipliers, convolution kernels, dense matrices,
pointwise multipliers, compositions), adjoints, windowed monomial pairings,
the cancellation-condition tester, and sample-based kernel checkers.

Adjoints are Hermitian (conjugate symbol / conjugate transpose); for the real
windowed monomials fed to `tstar_monomial` this agrees with the pairing-based
definition <T*[m], a> = <m, Ta>.

Since the monomial is not integrable, T*[(.-x0)^alpha] is realized through a
smooth window equal to 1 on B(x0, W) and 0 outside B(x0, 2W). Every such
computation carries a window-sensitivity certificate: the same field at W/2,
compared on B(x0, W/4) and normalized by the size of the windowed monomial,
must move by at most 10%, otherwise the kernel tail is too heavy for the
truncation to mean anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .grid import (
    Ball,
    GridFunction,
    GridSpec,
    convolve,
    fourier_multiplier,
    reflect,
    sample_function,
)
from .maximal import quintic_step
from .moments import (
    HardyIndex,
    as_multiindex,
    dual_norm_check,
    local_oscillation,
    monomial_field,
    psi,
)

MATERIALIZE_CAP = 128


# ---------------------------------------------------------------------------
# operator variants


class OperatorSpec:
    """Base class: a linear operator with application and adjoint application."""

    name: str = "operator"
    params: dict = {}

    @property
    def translation_invariant(self) -> bool:
        return False

    def apply(self, f: GridFunction) -> GridFunction:
        raise NotImplementedError

    def adjoint(self) -> "OperatorSpec":
        raise NotImplementedError

    def adjoint_apply(self, g: GridFunction) -> GridFunction:
        return self.adjoint().apply(g)


@dataclass
class MultiplierOp(OperatorSpec):
    """Fourier multiplier with a closed-form symbol xi -> complex."""

    symbol: object
    name: str = "multiplier"
    params: dict = field(default_factory=dict)

    @property
    def translation_invariant(self) -> bool:
        return True

    def apply(self, f: GridFunction) -> GridFunction:
        return fourier_multiplier(f, self.symbol)

    def adjoint(self) -> "MultiplierOp":
        sym = self.symbol
        return MultiplierOp(lambda xi: np.conj(sym(xi)), name=f"{self.name}*", params=self.params)


@dataclass
class KernelOp(OperatorSpec):
    """Convolution with a sampled kernel k: (Tf)(x) = (k * f)(x)."""

    kernel: GridFunction
    name: str = "kernel"
    params: dict = field(default_factory=dict)

    @property
    def translation_invariant(self) -> bool:
        return True

    def apply(self, f: GridFunction) -> GridFunction:
        if f.spec != self.kernel.spec:
            raise ValueError("grid mismatch")
        return convolve(f, self.kernel)

    def adjoint(self) -> "KernelOp":
        return KernelOp(reflect(self.kernel).conj(), name=f"{self.name}*", params=self.params)


@dataclass
class MatrixOp(OperatorSpec):
    """Dense kernel samples A with (Tf)_i = h^dim * sum_j A_ij f_j."""

    matrix: np.ndarray
    spec: GridSpec
    name: str = "matrix"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.spec.num_samples
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix must be {n} x {n}")

    def apply(self, f: GridFunction) -> GridFunction:
        if f.spec != self.spec:
            raise ValueError("grid mismatch")
        out = self.spec.cell_volume * (self.matrix @ f.samples.ravel())
        return GridFunction(self.spec, out.reshape(self.spec.shape))

    def adjoint(self) -> "MatrixOp":
        return MatrixOp(self.matrix.conj().T.copy(), self.spec, name=f"{self.name}*",
                        params=self.params)


@dataclass
class PointwiseOp(OperatorSpec):
    """Multiplication by a fixed grid function (sign flips, modulations, ...).

    Not expressible as a multiplier or convolution kernel; kept as its own
    variant so the pathological catalog entries do not need dense matrices.
    """

    factor: GridFunction
    name: str = "pointwise"
    params: dict = field(default_factory=dict)

    @property
    def translation_invariant(self) -> bool:
        return False

    def apply(self, f: GridFunction) -> GridFunction:
        if f.spec != self.factor.spec:
            raise ValueError("grid mismatch")
        return self.factor * f

    def adjoint(self) -> "PointwiseOp":
        return PointwiseOp(self.factor.conj(), name=f"{self.name}*", params=self.params)


@dataclass
class CompositionOp(OperatorSpec):
    """Pipeline [T1, T2, ...]: f -> ... (T2 (T1 f))."""

    parts: list
    name: str = "composition"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composition must be non-empty")

    @property
    def translation_invariant(self) -> bool:
        return all(p.translation_invariant for p in self.parts)

    def apply(self, f: GridFunction) -> GridFunction:
        for part in self.parts:
            f = part.apply(f)
        return f

    def adjoint(self) -> "CompositionOp":
        return CompositionOp([p.adjoint() for p in reversed(self.parts)],
                             name=f"{self.name}*", params=self.params)


def materialize(T: OperatorSpec, spec: GridSpec) -> MatrixOp:
    """Dense matrix of T from its action on single-cell unit-mass spikes.

    An oracle only: memory is O(m^{2 dim}), capped at m <= 128 per axis.
    """
    if spec.points_per_axis > MATERIALIZE_CAP:
        raise ValueError(f"materialization capped at m <= {MATERIALIZE_CAP}")
    n = spec.num_samples
    h = spec.cell_volume
    cols = np.empty((n, n), dtype=np.complex128)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0 / h
        cols[:, j] = T.apply(GridFunction(spec, e.reshape(spec.shape))).samples.ravel()
    if np.max(np.abs(cols.imag)) == 0:
        cols = cols.real.copy()
    return MatrixOp(cols, spec, name=f"{T.name}.matrix", params=dict(T.params))


# ---------------------------------------------------------------------------
# windowed monomials and the cancellation test


def smooth_window(spec: GridSpec, center, W: float) -> GridFunction:
    """Radial window equal to 1 on B(center, W), 0 outside B(center, 2W)."""
    pts = spec.points()
    d2 = np.zeros(spec.shape)
    for i in range(spec.dim):
        d2 += (pts[i] - center[i]) ** 2
    dist = np.sqrt(d2)
    return GridFunction(spec, 1.0 - quintic_step(dist / W - 1.0))


WINDOW_SENSITIVITY_LIMIT = 0.10


@dataclass
class TStarMonomial:
    """adjoint_apply(T, window * (.-x0)^alpha) plus its stability certificate."""

    field: GridFunction
    x0: tuple[float, ...]
    alpha: tuple[int, ...]
    window_radius: float
    sensitivity: float


def _rms_over(f: GridFunction, ball: Ball) -> float:
    mask = ball.mask(f.spec)
    if not mask.any():
        raise NumericalError("degenerate region")
    return float(np.sqrt(np.mean(np.abs(f.samples[mask]) ** 2)))


def tstar_monomial(T: OperatorSpec, x0, alpha, W: float, spec: GridSpec) -> TStarMonomial:
    """T* applied to the windowed monomial, with window-sensitivity control.

    The sensitivity is the rms difference between the W and W/2 computations
    on B(x0, W/4), normalized by the rms of the windowed monomial itself on
    B(x0, 2W); above 10% the truncation of the non-integrable monomial is not
    trustworthy and the computation fails.
    """
    x0 = tuple(float(c) for c in x0)
    alpha = as_multiindex(alpha, spec.dim)
    if W > spec.half_width / 2.0:
        raise ValueError("window radius W must be at most L/2")
    if not Ball(x0, 2.0 * W).fits_in(spec):
        raise ValueError("window support B(x0, 2W) escapes the domain")
    mono = monomial_field(spec, x0, alpha)

    def run(radius: float) -> GridFunction:
        return T.adjoint_apply(smooth_window(spec, x0, radius) * mono)

    f_full = run(W)
    f_half = run(W / 2.0)
    scale = _rms_over(smooth_window(spec, x0, W) * mono, Ball(x0, 2.0 * W))
    sens = _rms_over(f_full - f_half, Ball(x0, W / 4.0)) / max(scale, 1e-300)
    if sens > WINDOW_SENSITIVITY_LIMIT:
        raise NumericalError("T* monomial not stable: kernel tail too heavy")
    return TStarMonomial(f_full, x0, alpha, W, float(sens))


@dataclass
class CancellationRow:
    ball: Ball
    alpha: tuple[int, ...]
    oscillation: float
    psi_value: float
    ratio: float
    window_radius: float
    window_sensitivity: float
    dual_gap: float


@dataclass
class CancellationReport:
    operator: str
    idx: HardyIndex
    rows: list[CancellationRow]

    def ratios(self, alpha=None) -> list[float]:
        return [r.ratio for r in self.rows if alpha is None or r.alpha == tuple(alpha)]


def cancellation_test(T: OperatorSpec, idx: HardyIndex, balls, alphas,
                      spec: GridSpec, check_duality: bool = True) -> CancellationReport:
    """Measure the local oscillation of T*[(.-x0)^alpha] against the decay
    modulus psi on each ball.

    For each (B, alpha): f = tstar_monomial(T, x0, alpha, W = max(8r, 1)),
    oscillation = (fint_B |f - P^{N_p}_B f|^2)^{1/2}, ratio = oscillation /
    psi(r). The duality identity behind this functional is re-validated per
    row by the deterministic dual-norm check; the gap is recorded.
    """
    rows = []
    for ball in balls:
        if not ball.radius < 1.0:
            raise ValueError("cancellation balls need r < 1")
        W = max(8.0 * ball.radius, 1.0)
        for alpha in alphas:
            alpha = as_multiindex(alpha, spec.dim)
            ts = tstar_monomial(T, ball.center, alpha, W, spec)
            osc = local_oscillation(ts.field, ball, idx.N_p)
            psival = psi(idx, alpha, ball.radius)
            gap = float("nan")
            if check_duality:
                lhs, rhs = dual_norm_check(ts.field, ball, idx.N_p, trials=0)
                gap = abs(lhs - rhs)
            rows.append(CancellationRow(ball, alpha, float(osc), float(psival),
                                        float(osc / psival), W, ts.sensitivity, gap))
    return CancellationReport(T.name, idx, rows)


# ---------------------------------------------------------------------------
# sample-based kernel condition checkers


def _materialized_kernel(T: OperatorSpec, spec: GridSpec) -> GridFunction:
    if not T.translation_invariant:
        raise NumericalError(f"operator {T.name!r} is not translation-invariant")
    h = spec.cell_volume
    e = np.zeros(spec.shape)
    center = tuple(spec.points_per_axis // 2 for _ in range(spec.dim))
    e[center] = 1.0 / h
    return T.apply(GridFunction(spec, e))


@dataclass
class KernelSizeReport:
    operator: str
    mu: float
    fitted_C: float
    argmax_distance: float
    n_samples: int
    no_off_diagonal: bool

    def to_text(self) -> str:
        if self.no_off_diagonal:
            return f"kernel-size {self.operator}: no off-diagonal kernel\n"
        return (f"kernel-size {self.operator}: mu={self.mu!r} fitted_C={self.fitted_C!r} "
                f"at |u|={self.argmax_distance!r} over {self.n_samples} samples\n")


def kernel_size_check(T: OperatorSpec, mu: float, spec: GridSpec,
                      sample_pairs=None) -> KernelSizeReport:
    """Fitted constant in |k(u)| <= C min(|u|^-n, |u|^-n-mu), sampled at grid
    offsets with |u| >= 4h (default: every such offset)."""
    k = _materialized_kernel(T, spec)
    pts = spec.points()
    center = (0.0,) * spec.dim
    d2 = np.zeros(spec.shape)
    for i in range(spec.dim):
        d2 += (pts[i] - center[i]) ** 2
    dist = np.sqrt(d2)
    if sample_pairs is not None:
        u = np.array([[xi - yi for xi, yi in zip(x, y)] for x, y in sample_pairs])
        dvals = np.linalg.norm(u, axis=1)
        idxs = [tuple(int(round((c + spec.half_width) / spec.spacing)) % spec.points_per_axis
                      for c in row) for row in u]
        kvals = np.array([abs(k.samples[i]) for i in idxs])
    else:
        sel = dist >= 4.0 * spec.spacing
        dvals = dist[sel]
        kvals = np.abs(k.samples[sel])

    diag = abs(k.samples[tuple(spec.points_per_axis // 2 for _ in range(spec.dim))])
    off_max = float(kvals.max(initial=0.0))
    if off_max <= 1e-12 * max(diag, 1e-300):
        return KernelSizeReport(T.name, mu, 0.0, 0.0, int(dvals.size), True)

    envelope = np.minimum(dvals ** (-spec.dim * 1.0), dvals ** (-(spec.dim + mu)))
    ratios = kvals / envelope
    i = int(np.argmax(ratios))
    return KernelSizeReport(T.name, mu, float(ratios[i]), float(dvals[i]),
                            int(dvals.size), False)


@dataclass
class KernelHolderReport:
    operator: str
    delta: float
    sigma: float
    fitted_C: float
    n_triples: int

    def to_text(self) -> str:
        return (f"kernel-holder {self.operator}: delta={self.delta!r} sigma={self.sigma!r} "
                f"fitted_C={self.fitted_C!r} over {self.n_triples} triples\n")


def default_holder_triples(spec: GridSpec, sigma: float, n_anchor: int = 6,
                           n_sep: int = 6) -> list:
    """Triples (x, y, z) on the grid with |x - z| >= 2 |y - z|^sigma.

    Separations |y - z| sweep from one cell upward along the first axis; the
    distances |x - z| sweep both multiples of the admissibility floor and a
    fixed ladder of absolute probes, so that jump discontinuities at O(1)
    distances are straddled by one-cell separations (the refinement probe).
    """
    h = spec.spacing
    L = spec.half_width
    axis_dirs = [np.eye(spec.dim)[i] for i in range(spec.dim)]
    probes = [c * L for c in (0.0625, 0.09375, 0.125, 0.1875, 0.25, 0.375, 0.5)]
    triples = []
    rng_anchors = np.linspace(-L / 8, L / 8, n_anchor)
    for za in rng_anchors:
        z = np.zeros(spec.dim)
        z[0] = round(za / h) * h
        for ksep in range(n_sep):
            s = h * 2**ksep
            if s > L / 8:
                break
            y = z + s * axis_dirs[0]
            dmin = 2.0 * s**sigma
            cands = [dmin * fac for fac in (1.0, 1.5, 2.0, 3.0, 5.0)]
            cands += [d for d in probes if d >= dmin]
            for d in cands:
                if d > L / 2:
                    continue
                d = max(round(d / h), 1) * h
                if d < dmin:
                    d += h
                for direction in axis_dirs:
                    x = z + d * direction
                    if np.max(np.abs(x)) < L - 2 * h and np.max(np.abs(y)) < L - 2 * h:
                        triples.append((tuple(x), tuple(y), tuple(z)))
    return triples


def kernel_holder_check(T: OperatorSpec, delta: float, sigma: float, spec: GridSpec,
                        sample_triples=None) -> KernelHolderReport:
    """Fitted constant in the kernel regularity bound
    |K(x,y)-K(x,z)| + |K(y,x)-K(z,x)| <= C |y-z|^delta / |x-z|^{n+delta/sigma}
    over sample triples with |x-z| >= 2 |y-z|^sigma."""
    if not (0 < delta <= 1 and 0 < sigma <= 1):
        raise ValueError("need delta, sigma in (0, 1]")
    k = _materialized_kernel(T, spec)
    if sample_triples is None:
        sample_triples = default_holder_triples(spec, sigma)

    h = spec.spacing
    m = spec.points_per_axis

    def k_at(u):
        i = tuple(int(round((c + spec.half_width) / h)) % m for c in u)
        return k.samples[i]

    best = 0.0
    used = 0
    for x, y, z in sample_triples:
        x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
        dyz = float(np.linalg.norm(y - z))
        dxz = float(np.linalg.norm(x - z))
        if dyz < h / 2 or dxz < 2.0 * dyz**sigma:
            continue
        used += 1
        num = abs(k_at(x - y) - k_at(x - z)) + abs(k_at(y - x) - k_at(z - x))
        best = max(best, num * dxz ** (spec.dim + delta / sigma) / dyz**delta)
    if used == 0:
        raise NumericalError("no admissible triples at current resolution")
    return KernelHolderReport(T.name, delta, sigma, float(best), used)


# ---------------------------------------------------------------------------
# builtin catalog


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    description: str
    defaults: tuple = ()
    claimed: tuple = ()
    pathological: bool = False

    def claims(self) -> dict:
        return dict(self.claimed)


def _xi_norm(xi):
    return np.sqrt(np.sum(xi**2, axis=0))


def _jap(xi):
    """Japanese bracket <xi> = sqrt(1 + |xi|^2)."""
    return np.sqrt(1.0 + np.sum(xi**2, axis=0))


_CATALOG = [
    CatalogEntry("identity", "multiplier", "symbol 1", (), (("mu", 4.0), ("delta", 1.0), ("sigma", 1.0))),
    CatalogEntry("gaussian", "multiplier", "smoothing exp(-(w|xi|)^2/4) at width w",
                 (("width", 0.05),), (("mu", 4.0), ("delta", 1.0), ("sigma", 1.0))),
    CatalogEntry("riesz", "multiplier", "inhomogeneous Riesz -i xi_1/<xi>",
                 (), (("mu", 1.0), ("delta", 1.0), ("sigma", 1.0))),
    CatalogEntry("bessel-phase", "multiplier", "imaginary-order Bessel <xi>^{i beta}",
                 (("beta", 1.0),), (("mu", 1.0), ("delta", 1.0), ("sigma", 1.0))),
    CatalogEntry("order-zero", "multiplier", "<xi>^{-1} (1 + i xi_1)",
                 (), (("mu", 1.0), ("delta", 1.0), ("sigma", 1.0))),
    CatalogEntry("strongly-singular", "multiplier",
                 "e^{i |xi|^b} <xi>^{-a}; L^q -> L^2 bookkeeping 1/q = 1/2 + beta/n, "
                 "beta = a = n(1-sigma)/2, sigma = b",
                 (("b", 0.5), ("a", None)), (("mu", 1.0), ("delta", 1.0), ("sigma", 0.5))),
    CatalogEntry("truncated-power", "kernel", "|u|^{-n-mu} cut smoothly below |u|=1 "
                 "and near the half-domain", (("mu", 1.0),), (("mu", 1.0),)),
    CatalogEntry("jump-kernel", "kernel", "bounded kernel with a jump across |u1| = c",
                 (("c", 0.5),), (), True),
    CatalogEntry("sign-mult", "pointwise", "multiplication by sign(x1)", (), (), True),
    CatalogEntry("halfpower-mult", "pointwise", "multiplication by |x1|^{1/2} cutoff", (), (), True),
    CatalogEntry("modulation", "pointwise", "multiplication by e^{i x . xi0}",
                 (("xi0", 8.0),), (), True),
]


def builtin_operators() -> dict[str, CatalogEntry]:
    """Named catalog of builtin operators with parameter metadata."""
    return {e.name: e for e in _CATALOG}


def get_operator(name: str, spec: GridSpec, **params) -> OperatorSpec:
    """Instantiate a catalog operator on a grid; params override the defaults."""
    try:
        entry = builtin_operators()[name]
    except KeyError:
        raise KeyError(f"unknown operator {name!r}; see builtin_operators()") from None
    opts = dict(entry.defaults)
    opts.update(params)
    meta = {**entry.claims(), **opts}

    if name == "identity":
        return MultiplierOp(lambda xi: np.ones(xi.shape[1:]), name=name, params=meta)
    if name == "gaussian":
        w = float(opts["width"])
        return MultiplierOp(lambda xi: np.exp(-(w**2) * np.sum(xi**2, axis=0) / 4.0),
                            name=name, params=meta)
    if name == "riesz":
        return MultiplierOp(lambda xi: -1j * xi[0] / _jap(xi), name=name, params=meta)
    if name == "bessel-phase":
        b = float(opts["beta"])
        return MultiplierOp(lambda xi: _jap(xi) ** (1j * b), name=name, params=meta)
    if name == "order-zero":
        return MultiplierOp(lambda xi: (1.0 + 1j * xi[0]) / _jap(xi), name=name, params=meta)
    if name == "strongly-singular":
        b = float(opts["b"])
        a = opts["a"]
        a = spec.dim * (1.0 - b) / 2.0 if a is None else float(a)
        meta["a"] = a
        meta["beta"] = a
        meta["sigma"] = b
        meta["q"] = 1.0 / (0.5 + a / spec.dim)
        return MultiplierOp(
            lambda xi: np.exp(1j * _xi_norm(xi) ** b) * _jap(xi) ** (-a),
            name=name, params=meta)
    if name == "truncated-power":
        mu = float(opts["mu"])
        L = spec.half_width

        def kern(pts):
            u = np.sqrt(np.sum(pts**2, axis=0))
            with np.errstate(divide="ignore"):
                vals = np.where(u > 0, u, 1.0) ** (-(spec.dim + mu))
            vals = vals * quintic_step(2.0 * u - 1.0)  # zero below |u| = 1/2
            vals = vals * (1.0 - quintic_step(u / (0.40 * L) - 1.0))  # zero beyond 0.8 L
            return vals

        return KernelOp(sample_function(spec, kern), name=name, params=meta)
    if name == "jump-kernel":
        c = float(opts["c"])

        def kern(pts):
            u2 = np.sum(pts**2, axis=0)
            return np.exp(-u2) * (1.0 + 0.5 * np.sign(np.abs(pts[0]) - c))

        return KernelOp(sample_function(spec, kern), name=name, params=meta)
    if name == "sign-mult":
        return PointwiseOp(sample_function(spec, lambda p: np.sign(p[0])), name=name, params=meta)
    if name == "halfpower-mult":
        def factor(pts):
            r2 = np.sum(pts**2, axis=0)
            return np.sqrt(np.abs(pts[0])) * (1.0 - quintic_step(np.sqrt(r2) / 1.5 - 1.0))

        return PointwiseOp(sample_function(spec, factor), name=name, params=meta)
    if name == "modulation":
        xi0 = opts["xi0"]
        xi0 = (float(xi0),) * spec.dim if np.isscalar(xi0) else tuple(map(float, xi0))
        meta["xi0"] = xi0

        def factor(pts):
            phase = np.zeros(pts.shape[1:])
            for i in range(spec.dim):
                phase = phase + xi0[i] * pts[i]
            return np.exp(1j * phase)

        return PointwiseOp(sample_function(spec, factor), name=name, params=meta)
    raise AssertionError(f"catalog entry {name} without builder")
