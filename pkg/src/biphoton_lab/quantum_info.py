"""Mixedness of the reduced single-photon state.

The reduced operator is diagonal in the frequency basis, so purity and the
von Neumann entropy reduce to functionals of the spectral weights. Entropy
values are only meaningful together with an explicit convention (log base,
integration variable, differential vs. binned), which every report carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .biphoton import NORMALIZATION_TOL, SpectralDensity, SpectralGrid, build_state, signal_marginal

LEDGER_TOL = 1e-12
# reported subsystem entropy; its log base and measure are unknown
REFERENCE_ENTROPY = 6.4


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class EntropyConvention:
    log_base: str = "e"  # "2" or "e"
    variable: str = "x"  # "x" (= DL nu / 2) or "nu"
    mode: str = "differential"  # or "discrete-bins"

    def __post_init__(self):
        object.__setattr__(self, "log_base", str(self.log_base))
        if self.log_base not in ("2", "e"):
            raise ValueError(f"log_base must be '2' or 'e', got {self.log_base!r}")
        if self.variable not in ("x", "nu"):
            raise ValueError(f"variable must be 'x' or 'nu', got {self.variable!r}")
        if self.mode not in ("differential", "discrete-bins"):
            raise ValueError(f"mode must be 'differential' or 'discrete-bins', got {self.mode!r}")

    @property
    def log_factor(self) -> float:
        """Divide natural-log entropies by this to convert to the convention's base."""
        return math.log(2.0) if self.log_base == "2" else 1.0

    @property
    def unit(self) -> str:
        return "bits" if self.log_base == "2" else "nats"

    def tag(self) -> str:
        return f"log{self.log_base}/{self.variable}/{self.mode}"


def _check_density(density: SpectralDensity):
    w = density.weights
    if np.any(w < 0):
        raise ContractViolation("negative spectral weights")
    trace = float(w.sum() * density.grid.spacing)
    if abs(trace - 1.0) > NORMALIZATION_TOL:
        raise ContractViolation(f"density not normalized (trace = {trace!r})")


def _is_single_bin(density: SpectralDensity) -> bool:
    return int(np.count_nonzero(density.weights)) == 1


def purity(density: SpectralDensity) -> float:
    """tr(rho^2) over the grid bins: sum of squared bin masses."""
    _check_density(density)
    q = density.bin_masses
    return float(np.dot(q, q))


def von_neumann_entropy(
    density: SpectralDensity, convention: EntropyConvention, DL: float | None = None
) -> float:
    """-tr(rho log rho) of the diagonal reduced state under ``convention``.

    A density with all weight in one bin is a pure state and has zero entropy
    in every mode. ``DL`` is needed for the differential entropy in x.
    """
    _check_density(density)
    if _is_single_bin(density):
        return 0.0
    if convention.mode == "discrete-bins":
        q = density.bin_masses
        q = q[q > 0]
        return float(-np.sum(q * np.log(q)) / convention.log_factor)

    p = density.weights
    dx = density.grid.spacing
    if convention.variable == "x":
        if DL is None or not DL > 0:
            raise ValueError("differential entropy in x = DL nu / 2 requires DL > 0")
        # p_x = p_nu * d nu / d x
        jac = 2.0 / DL
        p = p * jac
        dx = dx / jac
    integrand = np.zeros_like(p)
    pos = p > 0
    integrand[pos] = -p[pos] * np.log(p[pos])
    return float(np.trapezoid(integrand, dx=dx) / convention.log_factor)


@dataclass(frozen=True)
class EntropyReport:
    S_sub: float
    S_total: float
    S_A: float
    S_B: float
    S_AgivenB: float
    S_BgivenA: float
    S_mutual: float
    purity: float | None = None
    convention: EntropyConvention | None = None
    provenance: str = ""

    def identity_residuals(self) -> dict[str, float]:
        return {
            "S_total - (S_AgivenB + S_BgivenA + S_mutual)": self.S_total
            - (self.S_AgivenB + self.S_BgivenA + self.S_mutual),
            "S_A - (S_AgivenB + S_mutual)": self.S_A - (self.S_AgivenB + self.S_mutual),
            "S_B - (S_BgivenA + S_mutual)": self.S_B - (self.S_BgivenA + self.S_mutual),
            "S_A + S_BgivenA": self.S_A + self.S_BgivenA,
            "S_B + S_AgivenB": self.S_B + self.S_AgivenB,
        }

    def check(self, tol: float = LEDGER_TOL) -> None:
        bad = {k: v for k, v in self.identity_residuals().items() if abs(v) > tol}
        if bad:
            raise ContractViolation(f"entropy ledger identities violated: {bad}")

    def as_dict(self) -> dict[str, object]:
        self.check()
        d: dict[str, object] = {
            "S_sub": self.S_sub,
            "S_total": self.S_total,
            "S_A": self.S_A,
            "S_B": self.S_B,
            "S_AgivenB": self.S_AgivenB,
            "S_BgivenA": self.S_BgivenA,
            "S_mutual": self.S_mutual,
            "purity": "" if self.purity is None else self.purity,
        }
        conv = self.convention
        d["convention.log_base"] = "" if conv is None else conv.log_base
        d["convention.variable"] = "" if conv is None else conv.variable
        d["convention.mode"] = "" if conv is None else conv.mode
        d["provenance"] = self.provenance
        return d

    def to_keyvalue(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    def csv_header(self) -> str:
        return ",".join(self.as_dict())

    def to_csv_row(self) -> str:
        return ",".join(_fmt(v).replace(",", ";") for v in self.as_dict().values())


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def entropy_ledger(
    S_sub: float,
    convention: EntropyConvention | None = None,
    purity: float | None = None,
    provenance: str = "",
) -> EntropyReport:
    """Entropy bookkeeping for a pure bipartite state whose halves carry S_sub each."""
    if not S_sub >= 0:
        raise ValueError(f"subsystem entropy must be >= 0, got {S_sub}")
    S_sub = float(S_sub)
    report = EntropyReport(
        S_sub=S_sub,
        S_total=0.0,
        S_A=S_sub,
        S_B=S_sub,
        S_AgivenB=-S_sub,
        S_BgivenA=-S_sub,
        S_mutual=2.0 * S_sub,
        purity=purity,
        convention=convention,
        provenance=provenance,
    )
    report.check()
    return report


@dataclass(frozen=True)
class SweepRow:
    convention: EntropyConvention
    span_x: float  # half-width in x = DL nu / 2 kept in the integration
    n_bins: int
    entropy: float
    closest: bool = False

    @property
    def rel_dev(self) -> float:
        return (self.entropy - REFERENCE_ENTROPY) / REFERENCE_ENTROPY


def truncate(density: SpectralDensity, nu_max: float) -> SpectralDensity:
    """Restrict a density to |nu| <= nu_max (grid points) and renormalize."""
    grid = density.grid
    half = min(grid.center_index, int(math.floor(nu_max / grid.spacing + 1e-9)))
    if half < 1:
        raise ValueError(f"span {nu_max} rad/ps narrower than one grid spacing")
    sl = slice(grid.center_index - half, grid.center_index + half + 1)
    sub = SpectralGrid(grid.center_omega, half * grid.spacing, 2 * half + 1)
    return SpectralDensity.from_unnormalized(sub, density.weights[sl], density.label, density.flags)


def sinc2_density(DL: float, spacing: float, span_x: float, center_omega: float) -> SpectralDensity:
    """Signal marginal on a grid of given spacing covering |x| <= span_x."""
    grid = SpectralGrid.with_spacing(center_omega, 2.0 * span_x / DL, spacing)
    return signal_marginal(build_state(grid, DL))


def convention_sweep(
    DL: float,
    spacing: float,
    center_omega: float,
    spans_x=(10.0, 100.0, 1000.0, 10000.0),
    log_bases=("2", "e"),
    variables=("x", "nu"),
    modes=("differential", "discrete-bins"),
    target: float = REFERENCE_ENTROPY,
    rel_tol: float = 0.10,
) -> list[SweepRow]:
    """Entropy of the sinc^2 marginal over every listed convention and span.

    The row closest to ``target`` is marked only if it lies within rel_tol.
    """
    rows = []
    for span in spans_x:
        density = sinc2_density(DL, spacing, span, center_omega)
        for base in log_bases:
            for var in variables:
                for mode in modes:
                    conv = EntropyConvention(base, var, mode)
                    rows.append(
                        SweepRow(conv, float(span), density.grid.n_points, von_neumann_entropy(density, conv, DL))
                    )
    return mark_closest(rows, target, rel_tol)


def density_sweep(
    density: SpectralDensity,
    DL: float,
    log_bases=("2", "e"),
    variables=("x", "nu"),
    modes=("differential", "discrete-bins"),
    target: float = REFERENCE_ENTROPY,
    rel_tol: float = 0.10,
) -> list[SweepRow]:
    """Convention sweep over a given density without truncation."""
    span = 0.5 * DL * density.grid.nu_max
    rows = [
        SweepRow(EntropyConvention(b, v, m), span, density.grid.n_points,
                 von_neumann_entropy(density, EntropyConvention(b, v, m), DL))
        for b in log_bases
        for v in variables
        for m in modes
    ]
    return mark_closest(rows, target, rel_tol)


def mark_closest(rows: list[SweepRow], target: float, rel_tol: float) -> list[SweepRow]:
    if not rows:
        return rows
    best = min(range(len(rows)), key=lambda i: abs(rows[i].entropy - target))
    if abs(rows[best].entropy - target) > rel_tol * abs(target):
        return rows
    return [
        SweepRow(r.convention, r.span_x, r.n_bins, r.entropy, closest=(i == best)) for i, r in enumerate(rows)
    ]


def sweep_csv(rows: list[SweepRow], target: float = REFERENCE_ENTROPY) -> str:
    out = [f"log_base,variable,mode,span_x,n_bins,entropy,unit,rel_dev_from_{target:g},closest_within_10pct"]
    for r in rows:
        c = r.convention
        out.append(
            f"{c.log_base},{c.variable},{c.mode},{r.span_x:g},{r.n_bins},{r.entropy:.10g},{c.unit},"
            f"{(r.entropy - target) / target:+.6f},{'yes' if r.closest else 'no'}"
        )
    return "\n".join(out) + "\n"


def sweep_verdict(rows: list[SweepRow], target: float = REFERENCE_ENTROPY) -> str:
    flagged = [r for r in rows if r.closest]
    if flagged:
        r = flagged[0]
        return (
            f"convention {r.convention.tag()} span_x={r.span_x:g} gives {r.entropy:.4g} {r.convention.unit}, "
            f"within 10% of {target:g}"
        )
    r = min(rows, key=lambda r: abs(r.entropy - target))
    return (
        f"no convention within 10% of {target:g}; closest is {r.convention.tag()} span_x={r.span_x:g} "
        f"with {r.entropy:.4g} {r.convention.unit} ({100 * (r.entropy - target) / target:+.1f}%)"
    )

