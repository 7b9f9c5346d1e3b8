"""Principal-strata populations: exact moments, true parameters, sampling.

A population is a finite mixture of strata. Each stratum is a response type:
a pair of potential first-part enrollments ``(D1(0), D1(1))``, a second-part
response map ``D2(z, d1)``, and a mean potential outcome ``E[Y(d1, d2)]``
for each of the four treatment cells (plus an additive noise scale used
only when sampling). The instrument assignment probability ``p_z`` and a
``double_exclusion`` flag complete the spec.

Classifying a stratum by its realized-path responses yields the nine
response groups: compliers/never-takers/always-takers in the first part
crossed with the same in the second. The five complier groups are

* ``C1C2`` full compliers (induced into both parts),
* ``C1N2`` and ``A1C2`` dropouts (miss the second part),
* ``C1A2`` and ``N1C2`` late-adopters (miss the first part),

and everything a finite-sample estimator targets — first stages, reduced
form, complier shares, bound endpoints — has an exact closed form as a
probability-weighted sum over strata, computed here without simulation.

Spec objects are immutable; sampling is a pure function of (spec, n, seed).
Monte Carlo batches may therefore run concurrently as long as each batch
owns its own seeded generator and results are combined in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import yaml

from .data import ObservationTable, from_arrays
from .estimands import BINARY_DEFS, TreatmentDef
from .exceptions import SpecError

# Relative tolerance for "exact" closed-form comparisons; absorbs float
# summation order.
EXACT_TOLERANCE = 1e-10

COMPLIER_GROUPS = ("C1C2", "C1N2", "C1A2", "N1C2", "A1C2")
ALL_GROUPS = COMPLIER_GROUPS + ("N1N2", "N1A2", "A1N2", "A1A2")

FULL_EFFECT = ((1, 1), (0, 0))

# Group-specific effect identified by the reduced form: treated cell vs
# untreated cell along each group's instrument-induced path.
GROUP_EFFECT_CELLS = {
    "C1C2": ((1, 1), (0, 0)),
    "C1N2": ((1, 0), (0, 0)),
    "C1A2": ((1, 1), (0, 1)),
    "N1C2": ((0, 1), (0, 0)),
    "A1C2": ((1, 1), (1, 0)),
}

# Groups whose share enters each definition's first stage.
FIRST_STAGE_GROUPS = {
    TreatmentDef.FIRST: ("C1C2", "C1N2", "C1A2"),
    TreatmentDef.SECOND: ("C1C2", "N1C2", "A1C2"),
    TreatmentDef.BOTH: ("C1C2", "C1A2", "A1C2"),
    TreatmentDef.EITHER: ("C1C2", "C1N2", "N1C2"),
}

# Per-definition homogeneity conditions under which the IV estimand equals
# the full-treatment effect for the definition's complier groups: for each
# mover group, the full effect must equal the listed effect.
HOMOGENEITY_CONDITIONS = {
    TreatmentDef.FIRST: (
        ("C1N2", ((1, 0), (0, 0))),
        ("C1A2", ((1, 1), (0, 1))),
        ("N1C2", ((1, 1), (0, 1))),
        ("A1C2", ((1, 0), (0, 0))),
    ),
    TreatmentDef.SECOND: (
        ("C1N2", ((1, 1), (1, 0))),
        ("C1A2", ((0, 1), (0, 0))),
        ("N1C2", ((0, 1), (0, 0))),
        ("A1C2", ((1, 1), (1, 0))),
    ),
    TreatmentDef.BOTH: (
        ("C1N2", ((1, 1), (1, 0))),
        ("C1A2", ((1, 1), (0, 1))),
        ("N1C2", ((1, 1), (0, 1))),
        ("A1C2", ((1, 1), (1, 0))),
    ),
    TreatmentDef.EITHER: (
        ("C1N2", ((1, 0), (0, 0))),
        ("C1A2", ((0, 1), (0, 0))),
        ("N1C2", ((0, 1), (0, 0))),
        ("A1C2", ((1, 0), (0, 0))),
    ),
}

# Templates for the named response groups: (d1_at, d2_at) with
# d2_at[z][d1]. The complier-in-part-2 groups respond to the first part
# (C1C2) or to the instrument itself (N1C2, A1C2).
_GROUP_TEMPLATES = {
    "C1C2": ((0, 1), ((0, 1), (0, 1))),
    "C1N2": ((0, 1), ((0, 0), (0, 0))),
    "C1A2": ((0, 1), ((1, 1), (1, 1))),
    "N1C2": ((0, 0), ((0, 0), (1, 1))),
    "A1C2": ((1, 1), ((0, 0), (1, 1))),
    "N1N2": ((0, 0), ((0, 0), (0, 0))),
    "N1A2": ((0, 0), ((1, 1), (1, 1))),
    "A1N2": ((1, 1), ((0, 0), (0, 0))),
    "A1A2": ((1, 1), ((1, 1), (1, 1))),
}

_CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _close(a: float, b: float, tol: float = EXACT_TOLERANCE) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _ge(a: float, b: float, tol: float = EXACT_TOLERANCE) -> bool:
    return a >= b - tol * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Stratum:
    """One response type with its population share and mean potential outcomes."""

    prob: float
    d1_at: tuple[int, int]
    d2_at: tuple[tuple[int, int], tuple[int, int]]
    mean_y: tuple[tuple[float, float], tuple[float, float]]
    y_sd: float = 0.0

    def d1(self, z: int) -> int:
        return self.d1_at[z]

    def d2(self, z: int) -> int:
        return self.d2_at[z][self.d1_at[z]]

    def outcome_mean(self, z: int) -> float:
        return self.mean_y[self.d1(z)][self.d2(z)]

    def cell_mean(self, cell: tuple[int, int]) -> float:
        return self.mean_y[cell[0]][cell[1]]

    @property
    def monotone(self) -> bool:
        if self.d1_at[1] < self.d1_at[0]:
            return False
        return self.d2(1) >= self.d2(0)

    @property
    def z_dependent(self) -> bool:
        """True when the second-part response map depends on z directly."""
        return self.d2_at[0] != self.d2_at[1]

    def group(self) -> str:
        d10, d11 = self.d1_at
        if d11 > d10:
            g1 = "C1"
        elif d10 == 1:
            g1 = "A1"
        else:
            g1 = "N1"
        lo, hi = self.d2(0), self.d2(1)
        if hi > lo:
            g2 = "C2"
        elif lo == 1:
            g2 = "A2"
        else:
            g2 = "N2"
        return g1 + g2


def stratum(group: str, prob: float, mean_y: Mapping[tuple[int, int], float] | Sequence[float],
            y_sd: float = 0.0) -> Stratum:
    """Build a stratum of a named response group.

    ``mean_y`` maps treatment cells ``(d1, d2)`` to mean potential outcomes;
    unspecified cells default to 0. A flat sequence of four values is read
    in cell order (0,0), (0,1), (1,0), (1,1).
    """
    if group not in _GROUP_TEMPLATES:
        raise SpecError(f"unknown response group {group!r}; expected one of {ALL_GROUPS}")
    if not isinstance(mean_y, Mapping):
        values = list(mean_y)
        if len(values) != 4:
            raise SpecError("mean_y sequence must have 4 entries")
        mean_y = dict(zip(_CELLS, values))
    cells = {cell: float(mean_y.get(cell, 0.0)) for cell in _CELLS}
    d1_at, d2_at = _GROUP_TEMPLATES[group]
    return Stratum(
        prob=float(prob), d1_at=d1_at, d2_at=d2_at,
        mean_y=((cells[(0, 0)], cells[(0, 1)]), (cells[(1, 0)], cells[(1, 1)])),
        y_sd=float(y_sd),
    )


@dataclass(frozen=True)
class PopulationSpec:
    """A finite-strata population with an instrument assignment probability."""

    strata: tuple[Stratum, ...]
    p_z: float = 0.5
    double_exclusion: bool = False


@dataclass(frozen=True)
class AssumptionAudit:
    """Exactly decided flags for every maintained assumption."""

    no_movers: bool
    double_exclusion: bool
    mtr: bool
    mts: bool
    positive_response: bool
    relevance: bool
    homogeneity: dict


@dataclass(frozen=True)
class PopulationMoments:
    """Exact instrument contrasts of every estimation-relevant moment."""

    first_stage: dict
    reduced_form: float
    d1_y: float
    d2_y: float
    dand_y: float
    untreated_y: float
    gy_or: float
    gy_and: float
    kernel_y: float

    @property
    def g_or(self) -> float:
        return self.first_stage[TreatmentDef.EITHER] - self.first_stage[TreatmentDef.SECOND]

    @property
    def g_and(self) -> float:
        return self.first_stage[TreatmentDef.BOTH] - self.first_stage[TreatmentDef.SECOND]


@dataclass(frozen=True)
class DecompositionTerm:
    """One weighted group effect inside an IV-estimand decomposition."""

    group: str
    cells: tuple[tuple[int, int], tuple[int, int]]
    effect: float | None
    weight: float
    bias: bool

    @property
    def contribution(self) -> float:
        # Convention: a zero-probability group contributes 0 even though its
        # conditional effect is undefined.
        if self.weight == 0.0 or self.effect is None:
            return 0.0
        return self.weight * self.effect


@dataclass(frozen=True)
class BetaDecomposition:
    """IV estimand for one treatment definition, split into its group terms."""

    definition: TreatmentDef
    value: float | None
    denominator: float
    terms: tuple[DecompositionTerm, ...]

    @property
    def total(self) -> float:
        return sum(t.contribution for t in self.terms)


@dataclass(frozen=True)
class TrueParams:
    """Exact causal parameters of a population spec."""

    group_probs: dict
    group_effects: dict
    lafte_over_c: float
    tau: float
    beta_decomposition: dict


def validate_spec(spec: PopulationSpec) -> AssumptionAudit:
    """Check structural invariants and decide every assumption flag exactly.

    Structural violations (probabilities, monotonicity, a double-exclusion
    flag contradicted by a z-dependent response map) raise
    :class:`SpecError`; substantive assumptions (no movers, MTR, MTS,
    positive response, per-definition homogeneity) are reported as flags.
    """
    if not spec.strata:
        raise SpecError("spec has no strata")
    probs = np.array([s.prob for s in spec.strata], dtype=float)
    if (probs < 0).any():
        raise SpecError("stratum probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise SpecError(f"stratum probabilities sum to {probs.sum()!r}, not 1")
    if not 0.0 < spec.p_z < 1.0:
        raise SpecError(f"p_z must be inside (0,1), got {spec.p_z!r}")
    for i, s in enumerate(spec.strata):
        flat = (s.d1_at[0], s.d1_at[1], s.d2_at[0][0], s.d2_at[0][1],
                s.d2_at[1][0], s.d2_at[1][1])
        if any(v not in (0, 1) for v in flat):
            raise SpecError(f"stratum {i} has non-binary treatment responses")
        if s.y_sd < 0:
            raise SpecError(f"stratum {i} has negative outcome noise scale")
        if not s.monotone:
            raise SpecError(
                f"monotonicity violated in stratum {i}: "
                f"d1_at={s.d1_at}, realized d2 {s.d2(0)}->{s.d2(1)}")
        if spec.double_exclusion and s.z_dependent:
            raise SpecError(
                f"double_exclusion flag set but stratum {i}'s second-part "
                "response depends on z")

    probs_by_group = group_probs(spec)
    movers = sum(probs_by_group[g] for g in ("C1N2", "C1A2", "N1C2", "A1C2"))
    structural_de = all(not s.z_dependent for s in spec.strata)

    def mean(group, cell):
        return _group_cell_mean(spec, group, cell)

    def effect_nonneg(group, hi, lo):
        m_hi, m_lo = mean(group, hi), mean(group, lo)
        if m_hi is None:
            return True
        return _ge(m_hi - m_lo, 0.0)

    mtr = (effect_nonneg("C1N2", (1, 1), (1, 0))
           and effect_nonneg("C1A2", (0, 1), (0, 0)))

    m_ca, m_cn, m_cc = mean("C1A2", (1, 1)), mean("C1N2", (1, 1)), mean("C1C2", (1, 1))
    mts = True
    if m_cn is not None:
        if m_ca is not None and not _ge(m_ca, m_cn):
            mts = False
        if m_cc is not None and not _ge(m_cc, m_cn):
            mts = False

    m_pos = mean("C1A2", (0, 0))
    positive_response = m_pos is None or _ge(m_pos, 0.0)

    homogeneity = {}
    for definition, conditions in HOMOGENEITY_CONDITIONS.items():
        ok = True
        for group, cells in conditions:
            full = _group_effect(spec, group, FULL_EFFECT)
            other = _group_effect(spec, group, cells)
            if full is None:
                continue
            if not _close(full, other):
                ok = False
                break
        homogeneity[definition] = ok

    moments = analytic_moments(spec)
    relevance = all(moments.first_stage[d] > 0 for d in BINARY_DEFS)

    return AssumptionAudit(
        no_movers=movers == 0.0,
        double_exclusion=structural_de,
        mtr=mtr,
        mts=mts,
        positive_response=positive_response,
        relevance=relevance,
        homogeneity=homogeneity,
    )


def group_probs(spec: PopulationSpec) -> dict:
    """Probability of every response group, including the non-complier ones."""
    probs = {g: 0.0 for g in ALL_GROUPS}
    for s in spec.strata:
        probs[s.group()] += s.prob
    return probs


def _group_cell_mean(spec: PopulationSpec, group: str, cell) -> float | None:
    num = 0.0
    den = 0.0
    for s in spec.strata:
        if s.group() == group:
            num += s.prob * s.cell_mean(cell)
            den += s.prob
    if den == 0.0:
        return None
    return num / den


def _group_effect(spec: PopulationSpec, group: str, cells) -> float | None:
    hi = _group_cell_mean(spec, group, cells[0])
    if hi is None:
        return None
    lo = _group_cell_mean(spec, group, cells[1])
    return hi - lo


def analytic_moments(spec: PopulationSpec) -> PopulationMoments:
    """Exact z-arm contrasts of all estimation moments.

    Each moment is ``E[W | Z=1] - E[W | Z=0]`` computed as a
    probability-weighted sum over strata; the results do not depend on
    ``p_z``.
    """
    totals = {name: [0.0, 0.0] for name in (
        "d1", "d2", "d_and", "d_or", "d_sum", "y",
        "d1_y", "d2_y", "dand_y", "untreated_y", "gy_or", "gy_and", "kernel_y")}
    for s in spec.strata:
        for z in (0, 1):
            d1, d2 = s.d1(z), s.d2(z)
            m = s.outcome_mean(z)
            d_and = d1 * d2
            d_or = d1 + d2 - d_and
            w = s.prob
            totals["d1"][z] += w * d1
            totals["d2"][z] += w * d2
            totals["d_and"][z] += w * d_and
            totals["d_or"][z] += w * d_or
            totals["d_sum"][z] += w * (d1 + d2)
            totals["y"][z] += w * m
            totals["d1_y"][z] += w * d1 * m
            totals["d2_y"][z] += w * d2 * m
            totals["dand_y"][z] += w * d_and * m
            totals["untreated_y"][z] += w * (1 - d1) * (1 - d2) * m
            totals["gy_or"][z] += w * (d_or - d2) * m
            totals["gy_and"][z] += w * (d_and - d2) * m
            totals["kernel_y"][z] += w * (1 - d1 - d2 + 2 * d_and) * m

    def delta(name):
        return totals[name][1] - totals[name][0]

    return PopulationMoments(
        first_stage={
            TreatmentDef.FIRST: delta("d1"),
            TreatmentDef.SECOND: delta("d2"),
            TreatmentDef.BOTH: delta("d_and"),
            TreatmentDef.EITHER: delta("d_or"),
            TreatmentDef.SUM: delta("d_sum"),
        },
        reduced_form=delta("y"),
        d1_y=delta("d1_y"),
        d2_y=delta("d2_y"),
        dand_y=delta("dand_y"),
        untreated_y=delta("untreated_y"),
        gy_or=delta("gy_or"),
        gy_and=delta("gy_and"),
        kernel_y=delta("kernel_y"),
    )


def true_parameters(spec: PopulationSpec) -> TrueParams:
    """Exact group probabilities, group effects, LAFTE, tau, and decompositions.

    Raises
    ------
    SpecError
        "relevance violated in population" when the complier set is empty.
    """
    probs = group_probs(spec)
    complier_prob = sum(probs[g] for g in COMPLIER_GROUPS)
    if complier_prob == 0.0:
        raise SpecError("relevance violated in population: the complier set is empty")

    group_effects = {g: _group_effect(spec, g, GROUP_EFFECT_CELLS[g])
                     for g in COMPLIER_GROUPS}

    lafte_num = 0.0
    tau_num = 0.0
    for g in COMPLIER_GROUPS:
        if probs[g] == 0.0:
            continue
        lafte_num += probs[g] * _group_effect(spec, g, FULL_EFFECT)
        tau_num += probs[g] * group_effects[g]
    lafte = lafte_num / complier_prob
    tau = tau_num / complier_prob

    moments = analytic_moments(spec)
    decompositions = {}
    for definition in BINARY_DEFS:
        denominator = moments.first_stage[definition]
        stage_groups = FIRST_STAGE_GROUPS[definition]
        terms = []
        for g in COMPLIER_GROUPS:
            weight = probs[g] / denominator if denominator > 0 else 0.0
            terms.append(DecompositionTerm(
                group=g, cells=GROUP_EFFECT_CELLS[g], effect=group_effects[g],
                weight=weight, bias=g not in stage_groups))
        value = moments.reduced_form / denominator if denominator > 0 else None
        decompositions[definition] = BetaDecomposition(
            definition=definition, value=value, denominator=denominator,
            terms=tuple(terms))

    sum_denominator = moments.first_stage[TreatmentDef.SUM]
    sum_terms = []
    split_cells = (((1, 1), (1, 0)), ((1, 0), (0, 0)))
    for cells in split_cells:
        weight = probs["C1C2"] / sum_denominator if sum_denominator > 0 else 0.0
        sum_terms.append(DecompositionTerm(
            group="C1C2", cells=cells, effect=_group_effect(spec, "C1C2", cells),
            weight=weight, bias=False))
    for g in COMPLIER_GROUPS[1:]:
        weight = probs[g] / sum_denominator if sum_denominator > 0 else 0.0
        sum_terms.append(DecompositionTerm(
            group=g, cells=GROUP_EFFECT_CELLS[g], effect=group_effects[g],
            weight=weight, bias=False))
    decompositions[TreatmentDef.SUM] = BetaDecomposition(
        definition=TreatmentDef.SUM,
        value=moments.reduced_form / sum_denominator if sum_denominator > 0 else None,
        denominator=sum_denominator, terms=tuple(sum_terms))

    return TrueParams(
        group_probs={g: probs[g] for g in COMPLIER_GROUPS},
        group_effects=group_effects,
        lafte_over_c=lafte,
        tau=tau,
        beta_decomposition=decompositions,
    )


def sample(spec: PopulationSpec, n: int, seed: int) -> ObservationTable:
    """Draw n i.i.d. units from the population; deterministic given seed.

    Each unit draws a stratum by probability and an instrument arm by
    ``p_z``; treatments follow the stratum's response maps, and the outcome
    is the cell mean plus (when the stratum's ``y_sd`` is positive)
    independent normal noise.
    """
    if n < 1:
        raise SpecError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    strata = spec.strata
    probs = np.array([s.prob for s in strata], dtype=float)
    probs = probs / probs.sum()

    d1_tab = np.array([[s.d1(0), s.d1(1)] for s in strata], dtype=np.int64)
    d2_tab = np.array([[s.d2(0), s.d2(1)] for s in strata], dtype=np.int64)
    mean_tab = np.array([[s.outcome_mean(0), s.outcome_mean(1)] for s in strata])
    sd = np.array([s.y_sd for s in strata])

    idx = rng.choice(len(strata), size=n, p=probs)
    z = rng.binomial(1, spec.p_z, size=n)
    d1 = d1_tab[idx, z]
    d2 = d2_tab[idx, z]
    y = mean_tab[idx, z].astype(float)
    if (sd > 0).any():
        y = y + sd[idx] * rng.standard_normal(n)
    return from_arrays(z, d1, d2, y, column_names=("z", "d1", "d2", "y"))


def random_spec(rng: np.random.Generator, *, n_strata: int | None = None,
                double_exclusion: bool = False, y_sd: float = 0.0,
                mean_range: tuple[float, float] = (0.0, 10.0),
                require_full_complier: bool = True) -> PopulationSpec:
    """Draw a random valid population spec.

    Stratum probabilities come from a uniform simplex draw; response maps
    are uniform over binary maps, with draws violating monotonicity rejected
    and redrawn; cell means are uniform on ``mean_range``. With
    ``double_exclusion`` the second-part response is drawn as a function of
    the first part only and the flag is set. By default redraws until at
    least one full-complier stratum is present so that relevance holds.
    """
    lo, hi = mean_range
    d1_choices = ((0, 0), (0, 1), (1, 1))
    while True:
        k = int(n_strata) if n_strata else int(rng.integers(2, 6))
        probs = rng.dirichlet(np.ones(k))
        strata = []
        for p in probs:
            while True:
                d1_at = d1_choices[rng.integers(3)]
                if double_exclusion:
                    row = (int(rng.integers(2)), int(rng.integers(2)))
                    d2_at = (row, row)
                else:
                    d2_at = ((int(rng.integers(2)), int(rng.integers(2))),
                             (int(rng.integers(2)), int(rng.integers(2))))
                means = rng.uniform(lo, hi, size=4)
                candidate = Stratum(
                    prob=float(p), d1_at=d1_at, d2_at=d2_at,
                    mean_y=((float(means[0]), float(means[1])),
                            (float(means[2]), float(means[3]))),
                    y_sd=float(y_sd))
                if candidate.monotone:
                    strata.append(candidate)
                    break
        spec = PopulationSpec(
            strata=tuple(strata), p_z=float(rng.uniform(0.2, 0.8)),
            double_exclusion=double_exclusion)
        if not require_full_complier or any(s.group() == "C1C2" for s in strata):
            return spec


def spec_to_dict(spec: PopulationSpec) -> dict:
    return {
        "p_z": float(spec.p_z),
        "double_exclusion": bool(spec.double_exclusion),
        "strata": [
            {
                "prob": float(s.prob),
                "d1": [int(v) for v in s.d1_at],
                "d2": [[int(v) for v in row] for row in s.d2_at],
                "mean_y": [[float(v) for v in row] for row in s.mean_y],
                "y_sd": float(s.y_sd),
            }
            for s in spec.strata
        ],
    }


def spec_from_dict(payload: Mapping) -> PopulationSpec:
    if not isinstance(payload, Mapping):
        raise SpecError("population spec document must be a mapping")
    allowed = {"p_z", "double_exclusion", "strata"}
    unknown = set(payload) - allowed
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    if "strata" not in payload:
        raise SpecError("spec is missing 'strata'")
    strata = []
    for i, raw in enumerate(payload["strata"]):
        extra = set(raw) - {"prob", "d1", "d2", "mean_y", "y_sd"}
        if extra:
            raise SpecError(f"stratum {i} has unknown keys: {sorted(extra)}")
        try:
            d1_at = tuple(int(v) for v in raw["d1"])
            d2_at = tuple(tuple(int(v) for v in row) for row in raw["d2"])
            mean_y = tuple(tuple(float(v) for v in row) for row in raw["mean_y"])
            strata.append(Stratum(
                prob=float(raw["prob"]), d1_at=d1_at, d2_at=d2_at,
                mean_y=mean_y, y_sd=float(raw.get("y_sd", 0.0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed stratum {i}: {exc}") from None
        if len(d1_at) != 2 or len(d2_at) != 2 or any(len(r) != 2 for r in d2_at):
            raise SpecError(f"malformed stratum {i}: responses must be pairs")
        if len(mean_y) != 2 or any(len(r) != 2 for r in mean_y):
            raise SpecError(f"malformed stratum {i}: mean_y must be a 2x2 grid")
    return PopulationSpec(
        strata=tuple(strata),
        p_z=float(payload.get("p_z", 0.5)),
        double_exclusion=bool(payload.get("double_exclusion", False)),
    )


def save_spec(spec: PopulationSpec, path) -> None:
    """Write a spec as human-editable YAML; round-trips losslessly."""
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(spec_to_dict(spec), handle, sort_keys=False)


def load_spec(path) -> PopulationSpec:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = yaml.safe_load(handle)
    except OSError as exc:
        raise SpecError(f"unreadable spec file {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise SpecError(f"malformed spec file {path}: {exc}") from None
    return spec_from_dict(payload)
