"""Entanglement measures for phaseless probe states.

Three quantifiers are provided. The generalized geometric measure (GGM) is
1 minus the largest squared Schmidt coefficient over all bipartitions, the
bipartite entanglement entropy is the base-2 Shannon entropy of the reduced
spectrum, and the geometric measure (GM) is 1 minus the largest squared
overlap with any fully separable product state. Probe weights are real and
nonnegative, so every reduced-state problem is a real symmetric one and GM
search can be restricted to real product factors.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .states import ProbeState

_AXES = "abcdefgh"  # per-party tensor axes for einsum, batch axis is "z"


class Measure(str, enum.Enum):
    GGM = "ggm"
    ENTROPY = "entropy"
    GM = "gm"


@dataclass(frozen=True)
class EntanglementValue:
    measure: Measure
    value: float


@dataclass(frozen=True)
class BipartitionReport:
    """Bipartition achieving the largest reduced-state eigenvalue.

    ``partition`` lists the party indices on the side containing party 0.
    """

    partition: tuple[int, ...]
    max_schmidt_sq: float


def bipartitions(parties: int) -> list[tuple[int, ...]]:
    """All 2^(N-1) - 1 proper bipartitions, as the side containing party 0.

    Ordered by size then lexicographically, which fixes tie-breaking.
    """
    if parties < 2:
        raise ValueError(f"need at least 2 parties, got {parties}")
    cuts = []
    for size in range(1, parties):
        for combo in itertools.combinations(range(parties), size):
            if combo[0] == 0:
                cuts.append(combo)
    return cuts


def _cut_gram_batch(tensors: np.ndarray, parties: int, cut: tuple[int, ...]) -> np.ndarray:
    """Gram matrix of the smaller side of a cut, batched over axis 0.

    ``tensors`` holds amplitude tensors of shape (B, d, ..., d).
    """
    d = tensors.shape[1]
    rest = tuple(k for k in range(parties) if k not in cut)
    perm = (0,) + tuple(1 + k for k in cut) + tuple(1 + k for k in rest)
    da, db = d ** len(cut), d ** len(rest)
    m = tensors.transpose(perm).reshape(tensors.shape[0], da, db)
    if da <= db:
        return m @ m.transpose(0, 2, 1)
    return m.transpose(0, 2, 1) @ m


def max_schmidt_sq_batch(
    weight_rows: np.ndarray, parties: int, local_dim: int
) -> np.ndarray:
    """Largest reduced-state eigenvalue over all bipartitions, batched.

    ``weight_rows`` has shape (B, d^N); rows are probability weights.
    """
    amps = np.sqrt(np.clip(weight_rows, 0.0, None))
    tensors = amps.reshape((amps.shape[0],) + (local_dim,) * parties)
    best = np.full(amps.shape[0], -np.inf)
    for cut in bipartitions(parties):
        gram = _cut_gram_batch(tensors, parties, cut)
        lam = np.linalg.eigvalsh(gram)[:, -1]
        best = np.maximum(best, lam)
    return np.clip(best, 0.0, 1.0)


def ggm_of_weights(weight_rows: np.ndarray, parties: int, local_dim: int) -> np.ndarray:
    """Batched GGM of weight rows, 1 - max squared Schmidt coefficient."""
    return 1.0 - max_schmidt_sq_batch(weight_rows, parties, local_dim)


def ggm(state: ProbeState, return_report: bool = False):
    """GGM of a probe state, optionally with the achieving bipartition.

    Ties between bipartitions are broken by the (size, lexicographic)
    enumeration order of :func:`bipartitions`.
    """
    if state.parties < 2:
        raise ValueError("GGM needs at least 2 parties")
    tensors = np.sqrt(state.weights)[None, :].reshape(
        (1,) + (state.local_dim,) * state.parties
    )
    best_lam = -np.inf
    best_cut: tuple[int, ...] = ()
    for cut in bipartitions(state.parties):
        lam = float(np.linalg.eigvalsh(_cut_gram_batch(tensors, state.parties, cut))[0, -1])
        if lam > best_lam:
            best_lam = lam
            best_cut = cut
    best_lam = min(max(best_lam, 0.0), 1.0)
    value = EntanglementValue(Measure.GGM, 1.0 - best_lam)
    if return_report:
        return value, BipartitionReport(best_cut, best_lam)
    return value


def ggm_two_qubit_closed(w) -> float:
    """Closed-form two-qubit GGM from the four level weights.

    Evaluates (1 - sqrt(1 - 4 (sqrt(w1 w2) - sqrt(w0 w3))^2)) / 2, the
    smaller reduced-state eigenvalue of the phaseless state.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (4,):
        raise ValueError(f"expected 4 weights, got shape {w.shape}")
    if np.any(w < -1e-12):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return float(ggm_two_qubit_closed_batch(w[None, :])[0])


def ggm_two_qubit_closed_batch(w: np.ndarray) -> np.ndarray:
    """Vectorized closed-form two-qubit GGM for weight rows (B, 4)."""
    w = np.clip(w, 0.0, None)
    x = np.sqrt(w[:, 1] * w[:, 2]) - np.sqrt(w[:, 0] * w[:, 3])
    return 0.5 * (1.0 - np.sqrt(np.clip(1.0 - 4.0 * x * x, 0.0, None)))


def shannon_entropy_base2(p: np.ndarray) -> np.ndarray:
    """Base-2 Shannon entropy along the last axis, with 0 log 0 = 0."""
    p = np.clip(p, 0.0, 1.0)
    terms = np.where(p > 0.0, -p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def entropy_of_weights(weight_rows: np.ndarray, local_dim: int) -> np.ndarray:
    """Batched bipartite entanglement entropy for two-party weight rows."""
    amps = np.sqrt(np.clip(weight_rows, 0.0, None))
    m = amps.reshape(amps.shape[0], local_dim, local_dim)
    spectra = np.linalg.eigvalsh(m @ m.transpose(0, 2, 1))
    return shannon_entropy_base2(spectra)


def entropy_bipartite(state: ProbeState) -> EntanglementValue:
    """Entanglement entropy of a two-party probe, in e-bits."""
    if state.parties != 2:
        raise ValueError("entanglement entropy is defined here for 2 parties only")
    val = float(entropy_of_weights(state.weights[None, :], state.local_dim)[0])
    return EntanglementValue(Measure.ENTROPY, val)


def binary_entropy(p: float) -> float:
    """-p log2 p - (1-p) log2(1-p) on [0, 1], symmetric about 1/2."""
    if not -1e-12 <= p <= 1 + 1e-12:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    p = min(max(p, 0.0), 1.0)
    return float(shannon_entropy_base2(np.array([p, 1.0 - p])))


@dataclass(frozen=True)
class GmSearchConfig:
    """Settings for the alternating product-state search behind GM.

    Defaults saturate small systems (N <= 5, d <= 5); multiple random
    restarts guard against the known local maxima of the overlap landscape.
    """

    restarts: int = 32
    max_sweeps: int = 500
    tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_sweeps < 1 or self.tol <= 0:
            raise ValueError("restarts, max_sweeps must be >= 1 and tol > 0")


@dataclass(frozen=True)
class GmResult:
    value: EntanglementValue
    overlap_sq: float
    converged: bool
    sweeps_used: int


def _party_update_spec(parties: int, k: int) -> str:
    axes = _AXES[:parties]
    operands = ["z" + axes] + ["z" + axes[j] for j in range(parties) if j != k]
    return ",".join(operands) + "->z" + axes[k]


def _random_unit_rows(rng: np.random.Generator, batch: int, d: int) -> np.ndarray:
    v = rng.normal(size=(batch, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def alternating_overlap_ascent(
    tensors: np.ndarray,
    vecs: list[np.ndarray],
    max_sweeps: int,
    tol: float,
    trace: list | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Alternating single-party ascent of the product-state overlap.

    With all factors but one fixed, the optimal local vector is the
    normalized partial contraction, so the overlap never decreases between
    updates. ``tensors`` has shape (B, d, ..., d) and ``vecs`` one (B, d)
    start block per party; both are updated in place. Returns the squared
    overlaps, per-row convergence flags, and the sweep count used. When
    ``trace`` is a list, the post-sweep overlaps are appended to it.
    """
    parties = tensors.ndim - 1
    specs = [_party_update_spec(parties, k) for k in range(parties)]
    prev = np.zeros(tensors.shape[0])
    overlap = np.zeros(tensors.shape[0])
    converged = np.zeros(tensors.shape[0], dtype=bool)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        for k in range(parties):
            others = [vecs[j] for j in range(parties) if j != k]
            c = np.einsum(specs[k], tensors, *others)
            nrm = np.linalg.norm(c, axis=1)
            ok = nrm > 1e-300
            vecs[k] = np.where(ok[:, None], c / np.where(ok, nrm, 1.0)[:, None], vecs[k])
            overlap = np.where(ok, nrm, overlap)
        if trace is not None:
            trace.append(overlap.copy())
        converged = np.abs(overlap**2 - prev**2) < tol
        prev = overlap.copy()
        if converged.all():
            break
    return np.clip(overlap**2, 0.0, 1.0), converged, sweeps


def gm_max_overlap_sq_batch(
    tensors: np.ndarray,
    restarts: int,
    max_sweeps: int,
    tol: float,
    seed_seq: np.random.SeedSequence,
    include_positive_start: bool = True,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Best squared product-state overlap per batched amplitude tensor.

    Restart r draws its start vectors from the r-th spawn of ``seed_seq``,
    so restarts are reproducible independently of how the batch is chunked.
    One extra deterministic all-positive start is prepended by default; for
    the nonnegative amplitude tensors used here the global maximizer lies
    in the positive orthant, which that start reliably captures.
    """
    batch = tensors.shape[0]
    d = tensors.shape[1]
    parties = tensors.ndim - 1
    best = np.zeros(batch)
    best_conv = np.zeros(batch, dtype=bool)
    max_used = 0
    starts: list[list[np.ndarray]] = []
    if include_positive_start:
        uniform = np.full((batch, d), d**-0.5)
        starts.append([uniform.copy() for _ in range(parties)])
    for child in seed_seq.spawn(restarts):
        rng = np.random.default_rng(child)
        starts.append([_random_unit_rows(rng, batch, d) for _ in range(parties)])
    for vecs in starts:
        o2, converged, used = alternating_overlap_ascent(tensors, vecs, max_sweeps, tol)
        max_used = max(max_used, used)
        improved = o2 > best
        best_conv = np.where(improved, converged, best_conv)
        best = np.maximum(best, o2)
    return best, best_conv, max_used


def gm(state: ProbeState, cfg: GmSearchConfig | None = None) -> GmResult:
    """Geometric measure by multi-start alternating search.

    All restarts run as one batched ascent (restart index is the batch
    axis), each seeded from its own spawn of the config seed. Product
    factors carry real coefficients of either sign, sufficient for the
    real probe amplitudes used here. Non-convergence within the sweep
    budget returns the best value found with ``converged`` cleared.
    """
    if state.parties < 2:
        raise ValueError("GM needs at least 2 parties")
    if cfg is None:
        cfg = GmSearchConfig()
    d = state.local_dim
    tensor = np.sqrt(state.weights).reshape((d,) * state.parties)
    rows = cfg.restarts + 1  # one deterministic all-positive start plus restarts
    tensors = np.ascontiguousarray(np.broadcast_to(tensor, (rows,) + tensor.shape))
    rngs = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    ]
    vecs = []
    for _ in range(state.parties):
        block = np.empty((rows, d))
        block[0] = d**-0.5
        for r, rng in enumerate(rngs):
            block[r + 1] = _random_unit_rows(rng, 1, d)[0]
        vecs.append(block)
    o2, conv, sweeps = alternating_overlap_ascent(tensors, vecs, cfg.max_sweeps, cfg.tol)
    idx = int(np.argmax(o2))
    overlap_sq = float(o2[idx])
    return GmResult(
        value=EntanglementValue(Measure.GM, 1.0 - overlap_sq),
        overlap_sq=overlap_sq,
        converged=bool(conv[idx]),
        sweeps_used=sweeps,
    )
