"""Glued approximate Ricci-flat structure on the resolved quotient torus.

The unit 4-torus is quotiented by the negation involution, which has the
sixteen half-lattice fixed points.  Around each fixed point the flat
Kahler potential is corrected toward the Eguchi-Hanson one through a
smooth radial cutoff, producing a (1,1) coefficient field that is flat
far from the sites, exactly the Eguchi-Hanson form close to them, and
interpolates in the annuli in between.  The volume-ratio constant and
the resulting error density live here as well.

Conventions: the flat form carries coefficient matrix identity/2, the
2-form density of a coefficient field h is 8 det h per coordinate
volume, and the complex volume form density is the constant 4.
"""

from __future__ import annotations

import itertools
import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .eguchi_hanson import (
    EhParams,
    complex_to_resolving,
    kahler_potential_u_chart,
    radial_hessian_derivs,
    resolving_to_complex,
)

log = logging.getLogger(__name__)

# density of the squared flat coefficient field per 8 det(h), and of the
# complex volume form, in the fixed coordinate frame
OMEGA_SQ_DENSITY_FACTOR = 8.0
CHI_CHIBAR_DENSITY = 4.0

_MAGIC = b"KMF1"
_VERSION = 1


# ---------------------------------------------------------------------------
# torus, involution, fixed points


def involution(x):
    """Negation modulo the unit lattice."""
    return (-np.asarray(x, dtype=float)) % 1.0


def fixed_points():
    """The sixteen half-lattice points fixed by the involution."""
    return np.array(list(itertools.product((0.0, 0.5), repeat=4)))


def wrap_displacement(delta):
    """Reduce a lattice displacement to the centered fundamental cell."""
    d = np.asarray(delta, dtype=float)
    return d - np.round(d)


@dataclass(frozen=True)
class TorusGrid:
    """Cell-centered n^4 sampling of the unit torus.

    Nodes sit at (k + 1/2)/n per axis, so no node ever coincides with a
    half-lattice fixed point while the node set stays invariant under
    the involution.
    """

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"grid resolution must be even and at least 8, got {self.n}")

    @property
    def spacing(self):
        return 1.0 / self.n

    def axis_coordinates(self):
        return (np.arange(self.n) + 0.5) / self.n

    def nodes(self):
        ax = self.axis_coordinates()
        mesh = np.meshgrid(ax, ax, ax, ax, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def node_count(self):
        return self.n**4

    def involution_index_map(self):
        """Permutation sending each node index to its involution image."""
        idx = np.arange(self.n)
        mirrored = self.n - 1 - idx
        grids = np.meshgrid(mirrored, mirrored, mirrored, mirrored, indexing="ij")
        flat = ((grids[0] * self.n + grids[1]) * self.n + grids[2]) * self.n + grids[3]
        return flat.reshape(-1)


# ---------------------------------------------------------------------------
# blow-up charts


def blowup_transition(direction, p):
    """Transition between the two blow-up coordinate charts.

    direction "12" sends (x, t) to (1/t, x t); direction "21" sends
    (s, y) to (s y, 1/s).  Entries may be complex.
    """
    u, v = complex(p[0]), complex(p[1])
    if direction == "12":
        if v == 0:
            raise ValueError("chart overlap requires a nonzero second coordinate")
        return (1.0 / v, u * v)
    if direction == "21":
        if u == 0:
            raise ValueError("chart overlap requires a nonzero first coordinate")
        return (u * v, 1.0 / u)
    raise ValueError(f"direction must be '12' or '21', got {direction!r}")


def transition_cr_residual(direction, p, step=1e-6):
    """Max Cauchy-Riemann defect of the transition map by central
    differences in the four underlying real coordinates."""
    p = (complex(p[0]), complex(p[1]))

    def as_real(q):
        return np.array([q[0].real, q[0].imag, q[1].real, q[1].imag])

    def from_real(c):
        return (c[0] + 1j * c[1], c[2] + 1j * c[3])

    base = as_real(p)
    J = np.empty((4, 4))
    for j in range(4):
        cp, cm = base.copy(), base.copy()
        cp[j] += step
        cm[j] -= step
        J[:, j] = (as_real(blowup_transition(direction, from_real(cp)))
                   - as_real(blowup_transition(direction, from_real(cm)))) / (2 * step)
    worst = 0.0
    for out in (0, 2):
        for inp in (0, 2):
            worst = max(
                worst,
                abs(J[out, inp] - J[out + 1, inp + 1]),
                abs(J[out, inp + 1] + J[out + 1, inp]),
            )
    return worst


def radial_factor(v):
    """Split a punctured-ball point into (radius, unit direction)."""
    v = np.asarray(v, dtype=float)
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise ValueError("radial factorization undefined at the singular point")
    return r, v / r


def radial_assemble(r, unit):
    return r * np.asarray(unit, dtype=float)


def eh_chart_map(site, x, zeta=None):
    """Map a punctured-ball torus point to Eguchi-Hanson resolving-chart
    coordinates; the fiber angle is reported modulo 2 pi, which makes the
    two involution-related lifts agree."""
    v = wrap_displacement(np.asarray(x, dtype=float) - np.asarray(site, dtype=float))
    r = np.linalg.norm(v)
    if r == 0.0:
        raise ValueError(
            f"chart map undefined at the singular point {tuple(float(c) for c in np.asarray(site, dtype=float))}"
        )
    if zeta is not None and r >= zeta:
        raise ValueError(f"point at distance {r:.6g} outside the gluing ball of radius {zeta:.6g}")
    return complex_to_resolving()(v)


def eh_chart_inverse(site, eh_coords):
    v = resolving_to_complex()(np.asarray(eh_coords, dtype=float))
    return (np.asarray(site, dtype=float) + v) % 1.0


# ---------------------------------------------------------------------------
# cutoff


def _profile_terms(s):
    """exp-smoothstep profile A/(A+B) with A = exp(-1/s), B = exp(-1/(1-s)),
    together with first and second derivatives; s strictly inside (0, 1)."""
    s = np.asarray(s, dtype=float)
    A = np.exp(-1.0 / s)
    B = np.exp(-1.0 / (1.0 - s))
    Ap = A / s**2
    Bp = -B / (1.0 - s) ** 2
    App = A * (1.0 - 2.0 * s) / s**4
    Bpp = B * (2.0 * s - 1.0) / (1.0 - s) ** 4
    denom = A + B
    p = A / denom
    num1 = Ap * B - A * Bp
    p1 = num1 / denom**2
    p2 = ((App * B - A * Bpp) * denom - 2.0 * num1 * (Ap + Bp)) / denom**3
    return p, p1, p2


def cutoff_beta(zeta, t):
    """Smooth cutoff in [0, 1]: one up to zeta/4, zero from zeta/2 on."""
    return cutoff_beta_derivs(zeta, t)[0]


def cutoff_beta_derivs(zeta, t):
    """Cutoff value with first and second t-derivatives (analytic)."""
    if zeta <= 0:
        raise ValueError(f"gluing radius must be positive, got {zeta}")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    b = np.zeros_like(t)
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    b[t <= zeta / 4.0] = 1.0
    mid = (t > zeta / 4.0) & (t < zeta / 2.0)
    if np.any(mid):
        scale = 4.0 / zeta
        s = (zeta / 2.0 - t[mid]) * scale
        p, p1, p2 = _profile_terms(s)
        b[mid] = p
        b1[mid] = -scale * p1
        b2[mid] = scale**2 * p2
    if scalar:
        return float(b[0]), float(b1[0]), float(b2[0])
    return b, b1, b2


# ---------------------------------------------------------------------------
# gluing correction


def gluing_correction_G(a, r):
    """Radial-chart difference between the Eguchi-Hanson potential and the
    flat one: (a^2/4) log((r^2 - a^2)/(r^2 + a^2)), for r > a."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= a):
        raise ValueError(f"correction requires r > a, got r={r} with a={a}")
    return (a**2 / 4.0) * np.log((r**2 - a**2) / (r**2 + a**2))


def ball_correction_derivs(a, w):
    """Resolving-chart correction phi_a(u) - u^2/2 as a function of the
    squared ball radius w = u^2, with first and second w-derivatives.

    This is the version entering the glued potential: it is defined for
    every positive ball radius, not only above the bolt radius.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError(f"squared radius must be positive, got {w}")
    u = np.sqrt(w)
    g = kahler_potential_u_chart(EhParams(a), u) - w / 2.0
    fw, fww = radial_hessian_derivs(a, w)
    return g, fw - 0.5, fww


# ---------------------------------------------------------------------------
# glued model and field


@dataclass(frozen=True)
class GluedModel:
    """Shared gluing data: one deformation parameter for all sixteen
    sites and one gluing radius.

    The enforced regime is 0 < zeta < 1/2 (the radius-zeta/2 support
    balls stay pairwise disjoint) and 0 < a < zeta/2; the conservative
    declared regime a <= zeta/8, zeta <= 1/4 is logged when left.
    """

    a: float
    zeta: float = 1.0 / 9.0
    cutoff: str = "exp_smoothstep"
    sites: np.ndarray = field(default_factory=fixed_points)

    def __post_init__(self):
        if not (0.0 < self.zeta < 0.5):
            raise ValueError(f"gluing radius must lie in (0, 1/2), got zeta={self.zeta}")
        if not (0.0 < self.a < self.zeta / 2.0):
            raise ValueError(
                f"deformation parameter must lie in (0, zeta/2) = (0, {self.zeta / 2.0:.6g}), got a={self.a}"
            )
        if self.cutoff != "exp_smoothstep":
            raise ValueError(f"unknown cutoff profile {self.cutoff!r}")
        if self.a > self.zeta / 8.0:
            log.info("a=%.4g exceeds the conservative bound zeta/8=%.4g", self.a, self.zeta / 8.0)
        if self.zeta > 0.25:
            log.info("zeta=%.4g exceeds the conservative bound 1/4", self.zeta)


@dataclass
class Field11:
    """Grid samples of a Hermitian 2x2 coefficient field h_{i jbar}."""

    n: int
    a: float
    zeta: float
    data: np.ndarray
    lam: float | None = None

    def __post_init__(self):
        shape = (self.n,) * 4 + (2, 2)
        if self.data.shape != shape:
            raise ValueError(f"field data must have shape {shape}, got {self.data.shape}")

    def flat(self):
        return self.data.reshape(-1, 2, 2)

    def det(self):
        d = self.data
        return (d[..., 0, 0].real * d[..., 1, 1].real - np.abs(d[..., 0, 1]) ** 2)

    def min_eigenvalue(self):
        d = self.data
        tr = 0.5 * (d[..., 0, 0].real + d[..., 1, 1].real)
        gap = np.sqrt(
            (0.5 * (d[..., 0, 0].real - d[..., 1, 1].real)) ** 2 + np.abs(d[..., 0, 1]) ** 2
        )
        return float(np.min(tr - gap))

    def hermitian_defect(self):
        return float(np.max(np.abs(self.data - np.conj(np.swapaxes(self.data, -1, -2)))))


def site_contribution(model, v):
    """Hermitian contribution of one site at wrapped displacements v
    (shape (..., 4)); zero outside the radius-zeta/2 ball."""
    v = np.asarray(v, dtype=float)
    w = np.sum(v**2, axis=-1)
    u = np.sqrt(w)
    out = np.zeros(v.shape[:-1] + (2, 2), dtype=complex)
    mask = (u > 0) & (u < model.zeta / 2.0)
    if not np.any(mask):
        return out
    um, wm, vm = u[mask], w[mask], v[mask]
    beta, beta_t, beta_tt = cutoff_beta_derivs(model.zeta, um)
    beta_w = np.where(beta_t != 0.0, beta_t / (2.0 * um), 0.0)
    beta_ww = np.where(beta_tt != 0.0, (beta_tt - np.where(um > 0, beta_t / um, 0.0)) / (4.0 * wm), 0.0)
    g, gw, gww = ball_correction_derivs(model.a, wm)
    f_w = beta_w * g + beta * gw
    f_ww = beta_ww * g + 2.0 * beta_w * gw + beta * gww
    z = np.stack([vm[:, 0] + 1j * vm[:, 1], vm[:, 2] + 1j * vm[:, 3]], axis=-1)
    outer = np.conj(z)[:, :, None] * z[:, None, :]
    block = f_w[:, None, None] * np.eye(2) + f_ww[:, None, None] * outer
    out[mask] = block
    return out


def omega0_at(model, x):
    """Pointwise coefficient matrix of the glued form at a torus point."""
    x = np.asarray(x, dtype=float)
    h = 0.5 * np.eye(2, dtype=complex)
    for site in model.sites:
        v = wrap_displacement(x - site)
        if np.linalg.norm(v) == 0.0:
            raise ValueError(
                f"glued form singular at the fixed point {tuple(float(c) for c in site)}"
            )
        h = h + site_contribution(model, v)
    return h


def build_omega0(model, grid, check_positive=True):
    """Assemble the glued coefficient field on the grid.

    The result is flat outside every radius-zeta/2 ball, exactly the
    Eguchi-Hanson Hessian inside the radius-zeta/4 balls, and invariant
    under the involution node-for-node.
    """
    nodes = grid.nodes()
    h = np.zeros((grid.node_count(), 2, 2), dtype=complex)
    h[:, 0, 0] = 0.5
    h[:, 1, 1] = 0.5
    touched = np.zeros(grid.node_count(), dtype=bool)
    for site in model.sites:
        v = wrap_displacement(nodes - site)
        contrib = site_contribution(model, v)
        nz = np.abs(contrib).sum(axis=(1, 2)) > 0
        touched |= nz
        h += contrib
    if not np.any(touched):
        log.info(
            "grid n=%d has no nodes inside any gluing ball (zeta=%.4g): field is exactly flat",
            grid.n, model.zeta,
        )
    out = Field11(grid.n, model.a, model.zeta, h.reshape((grid.n,) * 4 + (2, 2)))
    if check_positive:
        mineig = out.min_eigenvalue()
        if mineig <= 0:
            flat_idx = int(np.argmin(
                0.5 * (h[:, 0, 0].real + h[:, 1, 1].real)
                - np.sqrt((0.5 * (h[:, 0, 0].real - h[:, 1, 1].real)) ** 2 + np.abs(h[:, 0, 1]) ** 2)
            ))
            node = tuple(round(float(c), 6) for c in nodes[flat_idx])
            raise ValueError(
                f"glued form not positive definite: min eigenvalue {mineig:.6g} at node "
                f"{node}; the deformation parameter a={model.a} is too large for zeta={model.zeta}"
            )
    return out


def volume_ratio_lambda(model, grid, field_=None):
    """Ratio of the total squared-form density to the total complex volume
    density; equals one half for the purely flat field."""
    if field_ is None:
        field_ = build_omega0(model, grid)
    dets = field_.det()
    num = OMEGA_SQ_DENSITY_FACTOR * float(np.sum(dets))
    den = CHI_CHIBAR_DENSITY * dets.size
    lam = num / den
    if lam <= 0:
        raise ValueError(f"volume ratio must be positive, got {lam}")
    return lam


def error_density_ea(model, grid, field_=None, lam=None):
    """Pointwise density defect 1 - lam/(2 det h); zero wherever the glued
    form is exactly Ricci-flat with the global normalization."""
    if field_ is None:
        field_ = build_omega0(model, grid)
    if lam is None:
        lam = volume_ratio_lambda(model, grid, field_)
    dets = field_.det()
    if np.any(np.abs(dets) < 1e-12):
        raise ValueError("degenerate squared form: determinant underflow in the error density")
    return 1.0 - lam / (2.0 * dets)


def max_admissible_a(zeta, n, hi=None, iterations=40):
    """Largest positive-definite deformation parameter, by bisection."""
    grid = TorusGrid(n)
    lo = 0.0
    hi = hi if hi is not None else zeta / 2.0 * (1.0 - 1e-9)

    def feasible(a):
        try:
            build_omega0(GluedModel(a=a, zeta=zeta), grid)
        except ValueError:
            return False
        return True

    if feasible(hi):
        return hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# serialization


def save_field(field_, path):
    """Write the field as magic/version/N/a/zeta/lambda header plus a
    row-major complex body, with a JSON sidecar; byte-stable."""
    lam = field_.lam if field_.lam is not None else float("nan")
    header = struct.pack("<4sii3d", _MAGIC, _VERSION, field_.n, field_.a, field_.zeta, lam)
    body = np.ascontiguousarray(field_.data.astype(np.complex128)).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
    sidecar = {
        "magic": _MAGIC.decode(),
        "version": _VERSION,
        "n": field_.n,
        "a": field_.a,
        "zeta": field_.zeta,
        "lambda": None if field_.lam is None else field_.lam,
        "dtype": "complex128",
        "shape": [field_.n] * 4 + [2, 2],
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_field(path):
    with open(path, "rb") as fh:
        raw = fh.read(struct.calcsize("<4sii3d"))
        magic, version, n, a, zeta, lam = struct.unpack("<4sii3d", raw)
        if magic != _MAGIC:
            raise ValueError(f"not a coefficient-field file: bad magic {magic!r}")
        if version != _VERSION:
            raise ValueError(f"unsupported field file version {version}")
        body = fh.read()
    expect = n**4 * 4 * 16
    if len(body) != expect:
        raise ValueError(f"field body has {len(body)} bytes, expected {expect}")
    data = np.frombuffer(body, dtype=np.complex128).reshape((n,) * 4 + (2, 2)).copy()
    return Field11(n, a, zeta, data, lam=None if np.isnan(lam) else lam)
