"""Collective generator spectra and phaseless probe states.

A probe is a pure state expanded in the eigenbasis of a collective
generator ``sum_k Z^(k)`` acting on N parties of local dimension d. Local
phases are irrelevant for every quantity computed here, so a probe is
stored as the probability weight vector over the d^N basis states. The
index convention is the lexicographic product of local eigenstate
indices, party 0 most significant.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

# Weight vectors are accepted as normalized when |sum - 1| <= NORM_ATOL.
# Larger drift up to RENORM_ATOL (typical optimizer round-off) is silently
# renormalized; anything beyond that is rejected as a bug.
NORM_ATOL = 1e-12
RENORM_ATOL = 1e-9
# Tiny negative weights produced by float round-off are clamped to zero.
NEG_CLAMP_ATOL = 1e-12


class GeneratorKind(str, enum.Enum):
    PAULI_Z = "pauli_z"
    SPIN_RESCALED = "spin_rescaled"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Generator:
    """Collective Hamiltonian defined by one local eigenvalue list per party.

    All N parties carry the same local spectrum. ``pauli_z`` is the qubit
    spectrum (-1, +1); ``spin_rescaled`` is the uniformly spaced spin-z
    spectrum rescaled to span [-1, 1] (spacing 2/(d-1)); ``custom`` takes an
    arbitrary nondecreasing spectrum.
    """

    parties: int
    local_dim: int
    local_eigenvalues: np.ndarray
    kind: GeneratorKind

    def __post_init__(self):
        if self.parties < 1:
            raise ValueError(f"parties must be >= 1, got {self.parties}")
        if self.local_dim < 2:
            raise ValueError(f"local_dim must be >= 2, got {self.local_dim}")
        eig = np.asarray(self.local_eigenvalues, dtype=float)
        if eig.shape != (self.local_dim,):
            raise ValueError(
                f"expected {self.local_dim} local eigenvalues, got shape {eig.shape}"
            )
        if not np.all(np.isfinite(eig)):
            raise ValueError("local eigenvalues must be finite")
        if np.any(np.diff(eig) < 0):
            raise ValueError("local eigenvalues must be nondecreasing")
        if self.kind == GeneratorKind.PAULI_Z:
            if self.local_dim != 2 or not np.array_equal(eig, [-1.0, 1.0]):
                raise ValueError("pauli_z requires d = 2 with eigenvalues (-1, 1)")
        eig.flags.writeable = False
        object.__setattr__(self, "local_eigenvalues", eig)

    @property
    def dim(self) -> int:
        """Size d^N of the collective eigenbasis."""
        return self.local_dim**self.parties


def make_generator(
    parties: int,
    local_dim: int,
    kind: GeneratorKind | str = GeneratorKind.PAULI_Z,
    custom_eigenvalues=None,
) -> Generator:
    """Build and validate a Generator.

    ``custom_eigenvalues`` is required exactly when ``kind`` is custom.
    """
    kind = GeneratorKind(kind)
    if kind == GeneratorKind.CUSTOM:
        if custom_eigenvalues is None:
            raise ValueError("custom generator requires custom_eigenvalues")
        eig = np.asarray(custom_eigenvalues, dtype=float)
    else:
        if custom_eigenvalues is not None:
            raise ValueError("custom_eigenvalues only valid with kind=custom")
        if kind == GeneratorKind.PAULI_Z:
            eig = np.array([-1.0, 1.0])
        else:
            # uniform spacing 1/s with s = (d-1)/2, spanning [-1, 1]
            eig = np.linspace(-1.0, 1.0, local_dim)
    return Generator(parties, local_dim, eig, kind)


@dataclass(frozen=True)
class CollectiveSpectrum:
    """Eigenvalues E_p of the collective generator, lexicographic order."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def collective_spectrum(g: Generator) -> CollectiveSpectrum:
    """Sums of local eigenvalues over all d^N index tuples.

    Index p runs lexicographically over (r, s, ...), party 0 most
    significant, matching the ProbeState weight layout.
    """
    out = np.zeros(1)
    for _ in range(g.parties):
        out = (out[:, None] + g.local_eigenvalues[None, :]).ravel()
    return CollectiveSpectrum(out)


@dataclass(frozen=True)
class ProbeState:
    """Phaseless pure probe stored as probability weights over E_p levels."""

    weights: np.ndarray
    parties: int
    local_dim: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        dim = self.local_dim**self.parties
        if w.shape != (dim,):
            raise ValueError(f"expected {dim} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < -NEG_CLAMP_ATOL) or np.any(w > 1 + RENORM_ATOL):
            raise ValueError("weights must lie in [0, 1]")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if abs(total - 1.0) > RENORM_ATOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        if abs(total - 1.0) > NORM_ATOL:
            w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def as_tensor(self) -> np.ndarray:
        """Weights reshaped to one axis per party."""
        return self.weights.reshape((self.local_dim,) * self.parties)


def _check_match(state: ProbeState, g: Generator) -> None:
    if (state.parties, state.local_dim) != (g.parties, g.local_dim):
        raise ValueError(
            f"state is ({state.parties}, {state.local_dim}) but generator is "
            f"({g.parties}, {g.local_dim})"
        )


def variance(state: ProbeState, g: Generator) -> float:
    """Variance of the collective generator in the probe state.

    Equals sum_p w_p E_p^2 - (sum_p w_p E_p)^2; zero exactly when all
    weight sits on a single eigenvalue level.
    """
    _check_match(state, g)
    energies = collective_spectrum(g).values
    return float(variance_of_weights(state.weights[None, :], energies)[0])


def variance_of_weights(w: np.ndarray, energies: np.ndarray) -> np.ndarray:
    """Batched generator variance for weight rows ``w`` of shape (B, dim)."""
    mean = w @ energies
    second = w @ energies**2
    return np.maximum(second - mean**2, 0.0)


def qfi(state: ProbeState, g: Generator) -> float:
    """Quantum Fisher information of the encoded state, 4x the variance."""
    return 4.0 * variance(state, g)


def cramer_rao_stddev(q: float) -> float:
    """Single-shot standard-deviation bound q**(-1/2) for positive q."""
    if not q > 0:
        raise ValueError(f"QFI must be positive, got {q}")
    return float(q) ** -0.5


def _format_weights(w: np.ndarray) -> str:
    return "[" + ", ".join(f"{x:.17g}" for x in w) + "]"


def serialize(g: Generator, state: ProbeState | None = None) -> str:
    """JSON object with keys parties, local_dim, kind, local_eigenvalues and,
    when a state is given, weights emitted at 17 significant digits."""
    if state is not None:
        _check_match(state, g)
    fields = [
        f'"parties": {g.parties}',
        f'"local_dim": {g.local_dim}',
        f'"kind": "{g.kind.value}"',
        f'"local_eigenvalues": {_format_weights(g.local_eigenvalues)}',
    ]
    if state is not None:
        fields.append(f'"weights": {_format_weights(state.weights)}')
    return "{" + ", ".join(fields) + "}"


def deserialize(text: str) -> tuple[Generator, ProbeState | None]:
    """Inverse of :func:`serialize`; weights round-trip bit exactly."""
    obj = json.loads(text)
    g = Generator(
        parties=int(obj["parties"]),
        local_dim=int(obj["local_dim"]),
        local_eigenvalues=np.asarray(obj["local_eigenvalues"], dtype=float),
        kind=GeneratorKind(obj["kind"]),
    )
    state = None
    if "weights" in obj:
        state = ProbeState(
            weights=np.asarray(obj["weights"], dtype=float),
            parties=g.parties,
            local_dim=g.local_dim,
        )
    return g, state
