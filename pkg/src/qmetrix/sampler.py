"""Random-state pipeline relating geometric-measure bins to peak QFI.

Draws weight vectors uniformly (raw uniforms normalized to sum one),
computes each state's geometric measure with a reduced search budget,
folds states into closed GM bins of fixed width, and tracks the largest
QFI seen per bin. Only a short per-bin candidate list is retained, so
memory stays constant in the sample count. Candidates that end up
defining a bin maximum are re-measured with the full search budget and
reassigned before reporting, which protects the reported maxima against
fast-budget GM overestimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import GmSearchConfig, gm_max_overlap_sq_batch
from .states import ProbeState, collective_spectrum, make_generator

#: states retained per bin for the escalation pass, ordered by QFI
_KEEP_PER_BIN = 8
#: default chunk length for the streaming pipeline
_CHUNK = 20000

FAST_GM = GmSearchConfig(restarts=4, max_sweeps=100)
FULL_GM = GmSearchConfig(restarts=32, max_sweeps=500)


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling run description; the bin grid must tile [0, 1/2] exactly."""

    samples: int
    parties: int = 3
    local_dim: int = 2
    bin_width: float = 0.05
    seed: int = 0
    chunk_size: int = _CHUNK
    fast_gm: GmSearchConfig = field(default_factory=lambda: FAST_GM)
    full_gm: GmSearchConfig = field(default_factory=lambda: FULL_GM)

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.parties < 2 or self.local_dim < 2:
            raise ValueError("need parties >= 2 and local_dim >= 2")
        nbins = 0.5 / self.bin_width
        if abs(nbins - round(nbins)) > 1e-9:
            raise ValueError("bin_width must divide the GM range [0, 1/2] evenly")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    @property
    def nbins(self) -> int:
        return round(0.5 / self.bin_width)

    @property
    def dim(self) -> int:
        return self.local_dim**self.parties

    def compatible_with(self, other: "SamplerConfig") -> bool:
        """Same binning problem; seeds and sample counts may differ."""
        return (
            self.parties == other.parties
            and self.local_dim == other.local_dim
            and self.bin_width == other.bin_width
        )


@dataclass(frozen=True)
class BinReport:
    bin_index: int
    gm_lo: float
    gm_hi: float
    count: int
    q_max: float | None
    argmax_weights: ProbeState | None
    argmax_gm: float | None


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


# spawn-key namespaces: 0 draws, 1 fast GM per chunk, 2 escalation GM
_KEY_DRAW, _KEY_FAST, _KEY_FULL = 0, 1, 2


def _draw_chunk(cfg: SamplerConfig, chunk_index: int, size: int) -> np.ndarray:
    """Weight rows for one chunk, deterministic in (seed, chunk_index)."""
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(_KEY_DRAW, chunk_index))
    raw = np.random.default_rng(ss).uniform(0.0, 1.0, size=(size, cfg.dim))
    totals = raw.sum(axis=1, keepdims=True)
    bad = totals[:, 0] <= 0.0
    if bad.any():
        raw[bad] = 1.0
        totals = raw.sum(axis=1, keepdims=True)
    return raw / totals


def sample_states(cfg: SamplerConfig):
    """Stream of normalized uniform-weight probe states, seed deterministic."""
    produced = 0
    for chunk_index, size in enumerate(_chunk_sizes(cfg.samples, cfg.chunk_size)):
        rows = _draw_chunk(cfg, chunk_index, size)
        for row in rows:
            yield ProbeState(weights=row, parties=cfg.parties, local_dim=cfg.local_dim)
            produced += 1
            if produced >= cfg.samples:
                return


def _gm_of_rows(rows: np.ndarray, cfg: SamplerConfig, search: GmSearchConfig,
                seed_key: tuple) -> np.ndarray:
    tensors = np.sqrt(rows).reshape((rows.shape[0],) + (cfg.local_dim,) * cfg.parties)
    o2, _, _ = gm_max_overlap_sq_batch(
        tensors,
        restarts=search.restarts,
        max_sweeps=search.max_sweeps,
        tol=search.tol,
        seed_seq=np.random.SeedSequence(cfg.seed, spawn_key=seed_key),
    )
    return 1.0 - o2


def _bin_indices(g: float, width: float, nbins: int) -> list[int]:
    """Closed-interval bin assignment; exact edge values land in two bins.

    Values at or beyond the top edge are clamped into the last bin.
    """
    kf = g / width
    k = int(math.floor(kf))
    bins = [min(max(k, 0), nbins - 1)]
    if kf == k and 0 < k < nbins:
        bins.append(k - 1)
    return bins


@dataclass
class _BinAccumulator:
    count: int = 0
    # candidate tuples (q, chunk_index, in_chunk_index, gm, weights),
    # kept sorted by q descending, ties to the earliest draw
    candidates: list = field(default_factory=list)

    def add(self, q: float, chunk_index: int, local_index: int, g: float,
            weights: np.ndarray) -> None:
        self.count += 1
        entry = (q, -chunk_index, -local_index, g, weights)
        self.candidates.append(entry)
        self.candidates.sort(key=lambda e: (e[0], e[1], e[2]), reverse=True)
        del self.candidates[_KEEP_PER_BIN:]


def bin_and_maximize(states, cfg: SamplerConfig, threads: int = 1) -> list[BinReport]:
    """Fold a stream of probe states into per-bin peak-QFI reports.

    Counts come from the fast-budget GM of every state; the reported
    maxima come from full-budget re-measurement of the retained per-bin
    candidates, reassigned to bins by their refined GM. Ties between
    candidates break toward the earliest draw (smallest chunk index, then
    smallest in-chunk index). With ``threads`` above one, windows of that
    many chunks are measured concurrently and folded in chunk order, so
    the result is independent of the thread count.
    """
    from .reporting import parallel_map

    gen = make_generator(cfg.parties, cfg.local_dim, "pauli_z") \
        if cfg.local_dim == 2 else make_generator(cfg.parties, cfg.local_dim, "spin_rescaled")
    energies = collective_spectrum(gen).values
    nbins = cfg.nbins
    bins = [_BinAccumulator() for _ in range(nbins)]

    def measure_chunk(item):
        index, rows = item
        gms = _gm_of_rows(rows, cfg, cfg.fast_gm, (_KEY_FAST, index))
        qs = 4.0 * ((rows @ energies**2) - (rows @ energies) ** 2)
        return index, rows, gms, qs

    def fold(measured) -> None:
        for index, rows, gms, qs in measured:
            for j in range(len(rows)):
                for k in _bin_indices(float(gms[j]), cfg.bin_width, nbins):
                    bins[k].add(float(qs[j]), index, j, float(gms[j]), rows[j])

    window: list[tuple[int, np.ndarray]] = []
    chunk_index = 0
    buffer: list[np.ndarray] = []
    width = max(1, threads)

    def push(rows_list: list[np.ndarray], index: int) -> None:
        nonlocal window
        if not rows_list:
            return
        window.append((index, np.asarray(rows_list)))
        if len(window) >= width:
            fold(parallel_map(measure_chunk, window, threads))
            window = []

    for state in states:
        if (state.parties, state.local_dim) != (cfg.parties, cfg.local_dim):
            raise ValueError("state shape does not match sampler config")
        buffer.append(state.weights)
        if len(buffer) == cfg.chunk_size:
            push(buffer, chunk_index)
            chunk_index += 1
            buffer = []
    push(buffer, chunk_index)
    if window:
        fold(parallel_map(measure_chunk, window, threads))

    # escalation: re-measure every retained candidate with the full budget
    # and reassign, so each reported maximum reflects the refined GM
    pool = []
    for acc in bins:
        pool.extend(acc.candidates)
    refined: list[list] = [[] for _ in range(nbins)]
    if pool:
        rows = np.asarray([e[4] for e in pool])
        gms = _gm_of_rows(rows, cfg, cfg.full_gm, (_KEY_FULL,))
        for entry, g in zip(pool, gms):
            for k in _bin_indices(float(g), cfg.bin_width, nbins):
                refined[k].append((entry[0], entry[1], entry[2], float(g), entry[4]))

    reports = []
    for k in range(nbins):
        acc = bins[k]
        cands = sorted(refined[k], key=lambda e: (e[0], e[1], e[2]), reverse=True)
        seen = set()
        unique = []
        for e in cands:
            key = (e[1], e[2])
            if key not in seen:
                seen.add(key)
                unique.append(e)
        if unique:
            best = unique[0]
            state = ProbeState(best[4], cfg.parties, cfg.local_dim)
            reports.append(
                BinReport(k, k * cfg.bin_width, (k + 1) * cfg.bin_width,
                          acc.count, best[0], state, best[3])
            )
        else:
            reports.append(
                BinReport(k, k * cfg.bin_width, (k + 1) * cfg.bin_width,
                          acc.count, None, None, None)
            )
    return reports


def run_sampler(cfg: SamplerConfig, threads: int = 1) -> list[BinReport]:
    """Draw, measure, and bin in one call."""
    return bin_and_maximize(sample_states(cfg), cfg, threads=threads)


@dataclass(frozen=True)
class BinComparison:
    bin_index: int
    q_a: float | None
    q_b: float | None
    rel_diff: float | None
    within_tol: bool


@dataclass(frozen=True)
class ConvergenceReport:
    rel_tol: float
    bins: list[BinComparison]

    @property
    def converged_through(self) -> int:
        """Largest k such that all bins 0..k are comparable and within tol."""
        last = -1
        for cmp in self.bins:
            if not cmp.within_tol:
                break
            last = cmp.bin_index
        return last


def convergence_check(
    run_a: list[BinReport],
    run_b: list[BinReport],
    rel_tol: float = 0.05,
    config_a: SamplerConfig | None = None,
    config_b: SamplerConfig | None = None,
) -> ConvergenceReport:
    """Per-bin relative difference of the peak QFI between two runs.

    Runs must describe the same binning problem (checked when configs are
    supplied, and by the bin grids either way); sample counts and seeds
    may differ. A bin empty in either run is flagged as not within
    tolerance with no relative difference.
    """
    if config_a is not None and config_b is not None:
        if not config_a.compatible_with(config_b):
            raise ValueError("sampler configs describe different binning problems")
    if len(run_a) != len(run_b):
        raise ValueError("runs have different bin counts")
    bins = []
    for ra, rb in zip(run_a, run_b):
        if (ra.bin_index, ra.gm_lo, ra.gm_hi) != (rb.bin_index, rb.gm_lo, rb.gm_hi):
            raise ValueError("bin grids do not match")
        if ra.q_max is None or rb.q_max is None:
            bins.append(BinComparison(ra.bin_index, ra.q_max, rb.q_max, None, False))
            continue
        denom = max(abs(ra.q_max), abs(rb.q_max), 1e-300)
        rel = abs(ra.q_max - rb.q_max) / denom
        bins.append(
            BinComparison(ra.bin_index, ra.q_max, rb.q_max, rel, rel <= rel_tol)
        )
    return ConvergenceReport(rel_tol, bins)
