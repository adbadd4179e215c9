"""
Data models for the QNC toolkit.

This module defines the data models used throughout the application: the
network and routing types, the message prior and ensembles, the coefficient
schedule and quantizers of the encoder, the measurement and whitened systems,
decoder results and the experiment configuration and result rows.
"""

from dataclasses import dataclass, field, asdict
from functools import cached_property
from typing import Dict, List, Optional, Any, Tuple

import numpy as np
from scipy import sparse

from .exceptions import ConfigError

ORTHONORMAL_TOLERANCE = 1e-10
DEFAULT_SPIKE_RATIO = 1e-4
MAX_SPIKE_RATIO = 1e-3
ORACLE_MAX_VARIABLES = 14
KNOWN_DECODERS = ('bp', 'l1', 'l1_debiased', 'oracle')


@dataclass(frozen=True)
class Edge:
    """A directed link from tail to head carrying capacity bits per channel use."""
    tail: int
    head: int
    capacity: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {'tail': self.tail, 'head': self.head, 'capacity': self.capacity}


@dataclass(frozen=True)
class NetworkGraph:
    """Directed simple graph with per-edge capacities and a gateway node.

    Nodes are numbered 1..n; edge ids are positions in ``edges``.
    """
    n: int
    edges: Tuple[Edge, ...]
    gateway: int

    def __post_init__(self):
        object.__setattr__(self, 'edges', tuple(self.edges))
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 1 <= self.gateway <= self.n:
            raise ValueError(f"gateway {self.gateway} outside [1, {self.n}]")
        seen = set()
        for e_id, edge in enumerate(self.edges):
            if edge.tail == edge.head:
                raise ValueError(f"edge {e_id} is a self loop at node {edge.tail}")
            if not (1 <= edge.tail <= self.n and 1 <= edge.head <= self.n):
                raise ValueError(f"edge {e_id} ({edge.tail}->{edge.head}) outside [1, {self.n}]")
            if edge.capacity <= 0:
                raise ValueError(f"edge {e_id} has non-positive capacity {edge.capacity}")
            if (edge.tail, edge.head) in seen:
                raise ValueError(f"duplicate edge {edge.tail}->{edge.head}")
            seen.add((edge.tail, edge.head))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e.tail for e in self.edges], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e.head for e in self.edges], dtype=int)

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.array([e.capacity for e in self.edges], dtype=float)

    @cached_property
    def _incoming(self) -> Dict[int, List[int]]:
        incoming = {v: [] for v in range(1, self.n + 1)}
        for e_id, edge in enumerate(self.edges):
            incoming[edge.head].append(e_id)
        return incoming

    @cached_property
    def _outgoing(self) -> Dict[int, List[int]]:
        outgoing = {v: [] for v in range(1, self.n + 1)}
        for e_id, edge in enumerate(self.edges):
            outgoing[edge.tail].append(e_id)
        return outgoing

    def in_edges(self, v: int) -> List[int]:
        """Edge ids e with head(e) == v, ascending."""
        return list(self._incoming[v])

    def out_edges(self, v: int) -> List[int]:
        """Edge ids e with tail(e) == v, ascending."""
        return list(self._outgoing[v])

    @property
    def gateway_in_edges(self) -> List[int]:
        return self.in_edges(self.gateway)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'n': self.n,
            'gateway': self.gateway,
            'edges': [edge.to_dict() for edge in self.edges]
        }


@dataclass(frozen=True)
class RoutingTree:
    """Hop-minimal in-tree toward the gateway.

    ``next_hop`` maps a node to the edge id it forwards on; the gateway and
    unreachable nodes have no entry. ``hop_distance`` only holds reachable nodes.
    """
    gateway: int
    next_hop: Dict[int, int]
    hop_distance: Dict[int, int]
    unreachable: Tuple[int, ...] = ()

    @property
    def fully_reachable(self) -> bool:
        return not self.unreachable

    @property
    def max_hop_distance(self) -> int:
        return max(self.hop_distance.values()) if self.hop_distance else 0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'gateway': self.gateway,
            'next_hop': dict(self.next_hop),
            'hop_distance': dict(self.hop_distance),
            'unreachable': list(self.unreachable)
        }


@dataclass(frozen=True)
class MessagePrior:
    """Spike-and-slab prior on the sparse coefficients.

    ``k`` is the expected support size, ``signal_variance`` the slab variance and
    ``spike_variance`` the width given to the zero spike on decoder grids.
    """
    n: int
    k: float
    signal_variance: float = 5.0
    spike_variance: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"k={self.k} must lie in [0, n={self.n}]")
        if self.signal_variance <= 0:
            raise ValueError(f"signal variance must be positive, got {self.signal_variance}")
        if self.spike_variance is None:
            object.__setattr__(self, 'spike_variance', DEFAULT_SPIKE_RATIO * self.signal_variance)
        if not 0 < self.spike_variance <= MAX_SPIKE_RATIO * self.signal_variance * (1 + 1e-12):
            raise ValueError(
                f"spike variance {self.spike_variance} must be positive and at most "
                f"{MAX_SPIKE_RATIO} x signal variance {self.signal_variance}"
            )

    @classmethod
    def from_sparsity(cls, n: int, sparsity: float, signal_variance: float = 5.0,
                      spike_ratio: float = DEFAULT_SPIKE_RATIO) -> 'MessagePrior':
        """Build a prior from the sparsity factor k/n."""
        return cls(n=n, k=sparsity * n, signal_variance=signal_variance,
                   spike_variance=spike_ratio * signal_variance)

    @property
    def sparsity(self) -> float:
        return self.k / self.n

    @property
    def message_power(self) -> float:
        """E[X_v^2] = (k/n) sigma_s^2."""
        return self.sparsity * self.signal_variance

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'n': self.n,
            'k': self.k,
            'signal_variance': self.signal_variance,
            'spike_variance': self.spike_variance
        }


@dataclass(frozen=True)
class SparsifyingTransform:
    """Orthonormal n x n matrix phi with x = phi s."""
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ValueError(f"phi must be square, got shape {phi.shape}")
        gram_error = np.max(np.abs(phi.T @ phi - np.eye(phi.shape[0])))
        if gram_error > ORTHONORMAL_TOLERANCE:
            raise ValueError(f"phi is not orthonormal (max Gram error {gram_error:.3e})")
        object.__setattr__(self, 'phi', phi)

    @classmethod
    def identity(cls, n: int) -> 'SparsifyingTransform':
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class MessageEnsemble:
    """Sampled states q, sparse coefficients s and sensed messages x = phi s."""
    q: np.ndarray
    s: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=bool)
        s = np.asarray(self.s, dtype=float)
        if np.any(s[~q] != 0):
            raise ValueError("s must be exactly zero where q is zero")
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 's', s)
        object.__setattr__(self, 'x', np.asarray(self.x, dtype=float))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def support_size(self) -> int:
        return int(self.q.sum())

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary of columns (v is 1-based)."""
        return {
            'v': list(range(1, self.n + 1)),
            'q': self.q.astype(int).tolist(),
            's': self.s.tolist(),
            'x': self.x.tolist()
        }


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``points`` cells over [-half_width, half_width).

    Grid values are (i - points/2) * spacing, so zero is a grid point.
    """
    half_width: float
    points: int = 1024

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError(f"grid half width must be positive, got {self.half_width}")
        if self.points < 2 or self.points & (self.points - 1):
            raise ValueError(f"grid points must be a power of two, got {self.points}")

    @classmethod
    def for_prior(cls, prior: MessagePrior, min_points: int = 1024,
                  width_factor: float = 8.0) -> 'Grid':
        """Smallest power-of-two grid (at least ``min_points``) resolving the spike."""
        half_width = width_factor * np.sqrt(prior.signal_variance)
        points = 1 << max(int(np.ceil(np.log2(min_points))), 1)
        while 2 * half_width / points > np.sqrt(prior.spike_variance):
            points *= 2
        return cls(half_width=half_width, points=points)

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.points

    @cached_property
    def values(self) -> np.ndarray:
        return (np.arange(self.points) - self.points // 2) * self.spacing

    def check_prior(self, prior: MessagePrior) -> None:
        """Reject grids that cannot represent the prior."""
        if self.spacing > np.sqrt(prior.spike_variance):
            raise ValueError(
                f"grid spacing {self.spacing:.4g} does not resolve the spike "
                f"(std {np.sqrt(prior.spike_variance):.4g})"
            )
        if self.half_width < 6 * np.sqrt(prior.signal_variance) * (1 - 1e-12):
            raise ValueError(
                f"grid half width {self.half_width:.4g} below 6 slab std "
                f"({6 * np.sqrt(prior.signal_variance):.4g})"
            )


def midrise_quantize(u, limit, levels) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform midrise quantization of ``u`` over [-limit, limit].

    Returns the reproduction values and a mask of saturated inputs. A zero
    ``limit`` maps everything to exact zero without counting it as clipped.
    """
    u = np.asarray(u, dtype=float)
    limit = np.broadcast_to(np.asarray(limit, dtype=float), u.shape)
    levels = np.broadcast_to(np.asarray(levels, dtype=float), u.shape)
    active = limit > 0
    step = np.where(active, 2 * limit / levels, 1.0)
    index = np.floor((u + limit) / step)
    clipped = active & ((u < -limit) | (u > limit))
    index = np.clip(index, 0, levels - 1)
    out = np.where(active, -limit + (index + 0.5) * step, 0.0)
    return out, clipped


@dataclass(frozen=True)
class EdgeQuantizer:
    """Uniform midrise quantizer with ``levels`` cells over [-limit, limit]."""
    levels: float
    limit: float

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"quantizer needs at least 2 levels, got {self.levels}")
        if self.limit < 0:
            raise ValueError(f"quantizer range must be non-negative, got {self.limit}")

    @property
    def step(self) -> float:
        return 2 * self.limit / self.levels

    @property
    def noise_variance(self) -> float:
        return self.step ** 2 / 12

    def quantize(self, u):
        """Quantize values; see :func:`midrise_quantize`."""
        return midrise_quantize(u, self.limit, self.levels)


@dataclass(frozen=True)
class CoefficientSchedule:
    """Network-coding coefficients for slots t = 2..T.

    ``local_encoding[t]`` is A(t) (|E| x n), ``propagation[t]`` is F(t)
    (|E| x |E|) and ``selector`` is B (|In(gateway)| x |E|).
    """
    T: int
    n: int
    local_encoding: Dict[int, sparse.csr_matrix]
    propagation: Dict[int, sparse.csr_matrix]
    selector: sparse.csr_matrix
    capacities: np.ndarray

    @property
    def num_edges(self) -> int:
        return self.selector.shape[1]

    @property
    def measurements_per_slot(self) -> int:
        return self.selector.shape[0]

    def encoding_matrix(self, t: int) -> sparse.csr_matrix:
        return self.local_encoding[t]

    def propagation_matrix(self, t: int) -> sparse.csr_matrix:
        return self.propagation[t]


@dataclass(frozen=True)
class QuantizerBank:
    """Per-(edge, slot) quantizers for one block length.

    ``limits[t]`` holds R_e(t) for every edge; rows 0 and 1 are unused.
    """
    block_length: int
    levels: np.ndarray
    limits: np.ndarray

    @property
    def T(self) -> int:
        return self.limits.shape[0] - 1

    def steps(self, t: int) -> np.ndarray:
        return 2 * self.limits[t] / self.levels

    def noise_variances(self, t: int) -> np.ndarray:
        """Uniform-noise model Delta^2 / 12 (zero for idle edges)."""
        return self.steps(t) ** 2 / 12

    def quantizer(self, e: int, t: int) -> EdgeQuantizer:
        return EdgeQuantizer(levels=float(self.levels[e]), limit=float(self.limits[t, e]))

    def quantize(self, t: int, u: np.ndarray):
        return midrise_quantize(u, self.limits[t], self.levels)


@dataclass
class SimulationTrace:
    """Edge contents, quantization noises and gateway packets of one QNC run.

    ``contents[t-1]`` is Y(t) and ``noises[t-1]`` is N(t) for t = 1..T;
    ``packets[t-2]`` is Z(t) for t = 2..T.
    """
    contents: np.ndarray
    noises: np.ndarray
    packets: np.ndarray
    clip_counts: np.ndarray
    total_quantizations: int = 0

    @property
    def T(self) -> int:
        return self.contents.shape[0]

    @property
    def clip_count(self) -> int:
        return int(self.clip_counts.sum())

    def clips_until(self, T: int) -> int:
        return int(self.clip_counts[:T].sum())

    def y(self, t: int) -> np.ndarray:
        return self.contents[t - 1]

    def noise(self, t: int) -> np.ndarray:
        return self.noises[t - 1]

    def z(self, t: int) -> np.ndarray:
        return self.packets[t - 2]

    def z_tot(self, T: Optional[int] = None) -> np.ndarray:
        """Stacked gateway packets Z(2), ..., Z(T)."""
        T = self.T if T is None else T
        return self.packets[:T - 1].reshape(-1)

    def n_tot(self, T: Optional[int] = None) -> np.ndarray:
        """Stacked quantization noises N(2), ..., N(T)."""
        T = self.T if T is None else T
        return self.noises[1:T].reshape(-1)


@dataclass(frozen=True)
class MeasurementSystem:
    """Total measurement matrix, noise propagation matrix and noise variances.

    Z_tot = psi_tot x + psi_noise N_tot with Cov[N_tot] = diag(lambda_q).
    """
    T: int
    psi_tot: np.ndarray
    psi_noise: np.ndarray
    lambda_q: np.ndarray
    measurements_per_slot: int
    num_edges: int

    @property
    def m(self) -> int:
        return self.psi_tot.shape[0]

    @property
    def n(self) -> int:
        return self.psi_tot.shape[1]

    def truncate(self, T: int) -> 'MeasurementSystem':
        """The system seen by a decoder that stops at slot T <= self.T."""
        if not 2 <= T <= self.T:
            raise ValueError(f"decode time T={T} outside [2, {self.T}]")
        rows = (T - 1) * self.measurements_per_slot
        cols = (T - 1) * self.num_edges
        return MeasurementSystem(
            T=T,
            psi_tot=self.psi_tot[:rows],
            psi_noise=self.psi_noise[:rows, :cols],
            lambda_q=self.lambda_q[:cols],
            measurements_per_slot=self.measurements_per_slot,
            num_edges=self.num_edges
        )


@dataclass(frozen=True)
class WhitenedSystem:
    """Unit-noise system z' = theta s + n' with x = phi s."""
    z: np.ndarray
    theta: np.ndarray
    floor_count: int = 0
    phi: Optional[np.ndarray] = None
    eigenvectors: Optional[np.ndarray] = None
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if theta.shape[0] != z.shape[0]:
            raise ValueError(f"theta has {theta.shape[0]} rows but z has {z.shape[0]} entries")
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'z', z)
        if self.phi is None:
            object.__setattr__(self, 'phi', np.eye(theta.shape[1]))

    @property
    def m(self) -> int:
        return self.theta.shape[0]

    @property
    def n(self) -> int:
        return self.theta.shape[1]

    def unwhiten(self, z_prime: np.ndarray) -> np.ndarray:
        """Map whitened measurements back: U_N Lambda_N^(1/2) z'."""
        if self.eigenvectors is None:
            raise ValueError("system was built without an eigendecomposition")
        return self.eigenvectors @ (np.sqrt(self.eigenvalues) * z_prime)


@dataclass
class BeliefState:
    """Grid PDFs on the factor-graph edges (rows[j], cols[j]) and the variable posteriors."""
    rows: np.ndarray
    cols: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    iteration: int = 0
    variable: Optional[np.ndarray] = None

    @property
    def num_edges(self) -> int:
        return self.rows.shape[0]


@dataclass
class DecodeResult:
    """Estimate of one decoder run."""
    x_hat: np.ndarray
    s_hat: np.ndarray
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    objective_history: List[float] = field(default_factory=list)
    decoder: str = ''
    beliefs: Optional[BeliefState] = None


@dataclass
class ForwardingResult:
    """Gateway reconstruction and delivery delay of packet forwarding."""
    x_hat: np.ndarray
    delay_slots: int
    block_length: int
    arrival_slots: Dict[int, int] = field(default_factory=dict)
    clip_count: int = 0

    @property
    def delay_channel_uses(self) -> int:
        return self.block_length * self.delay_slots


@dataclass
class ExperimentConfig:
    """Configuration of a QNC versus packet-forwarding sweep."""
    n: int = 100
    edge_counts: List[int] = field(default_factory=lambda: [800])
    sparsity_factors: List[float] = field(default_factory=lambda: [0.05])
    signal_variance: float = 5.0
    l_sweep: List[int] = field(default_factory=lambda: [4, 6, 8, 10])
    t_max: int = 25
    decoders: List[str] = field(default_factory=lambda: ['bp', 'l1'])
    trials: int = 50
    master_seed: int = 0
    capacity: float = 1.0
    workers: Optional[int] = None
    output_dir: str = 'output'
    rows_file: str = 'rows.csv'
    summary_file: str = 'summary.csv'
    curves_file: str = 'curves.csv'
    plot_file: Optional[str] = 'snr_vs_delay.svg'
    snr_grid: List[float] = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0, 10.0, 12.0])
    bp_grid_points: int = 512
    spike_variance_ratio: float = 1e-3
    bp_max_iter: int = 50
    bp_damping: float = 0.5
    bp_warm_start: bool = True
    l1_max_iter: int = 2000

    def validate(self) -> None:
        """Raise ConfigError when the configuration cannot be run."""
        for name in ('edge_counts', 'sparsity_factors', 'l_sweep', 'decoders', 'snr_grid'):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be a non-empty list")
        if self.n < 2:
            raise ConfigError(f"n must be at least 2, got {self.n}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.t_max < 2:
            raise ConfigError(f"t_max must be at least 2, got {self.t_max}")
        if self.signal_variance <= 0:
            raise ConfigError("signal_variance must be positive")
        if self.capacity <= 0:
            raise ConfigError("capacity must be positive")
        for m_edges in self.edge_counts:
            if not 1 <= m_edges <= self.n * (self.n - 1):
                raise ConfigError(f"edge count {m_edges} impossible for n={self.n}")
        for sparsity in self.sparsity_factors:
            if not 0 <= sparsity <= 1:
                raise ConfigError(f"sparsity factor {sparsity} outside [0, 1]")
        for L in self.l_sweep:
            if L < 1 or L * self.capacity < 1:
                raise ConfigError(f"block length {L} gives fewer than one bit per slot")
        unknown = set(self.decoders) - set(KNOWN_DECODERS)
        if unknown:
            raise ConfigError(f"unknown decoders: {sorted(unknown)}")
        if 'oracle' in self.decoders and self.n > ORACLE_MAX_VARIABLES:
            raise ConfigError(f"oracle decoder needs n <= {ORACLE_MAX_VARIABLES}, got n={self.n}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")
        if not 0 <= self.bp_damping < 1:
            raise ConfigError(f"bp_damping must lie in [0, 1), got {self.bp_damping}")
        if self.bp_max_iter < 1 or self.l1_max_iter < 1:
            raise ConfigError("iteration caps must be positive")
        if not 0 < self.spike_variance_ratio <= MAX_SPIKE_RATIO:
            raise ConfigError(f"spike_variance_ratio must lie in (0, {MAX_SPIKE_RATIO}]")
        if self.bp_grid_points < 2 or self.bp_grid_points & (self.bp_grid_points - 1):
            raise ConfigError(f"bp_grid_points must be a power of two, got {self.bp_grid_points}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


ROW_COLUMNS = [
    'deployment_id', 'edge_count', 'sparsity_factor', 'trial', 'decoder',
    'block_length', 'stop_time', 'delay_channel_uses', 'snr_db', 'iterations',
    'converged', 'clip_count', 'error'
]


@dataclass
class ResultRow:
    """One evaluated (trial, decoder, L, T) configuration.

    Forwarding rows have no stop time; error rows carry the failure text.
    """
    deployment_id: str
    edge_count: int
    sparsity_factor: float
    trial: int
    decoder: str
    block_length: Optional[int] = None
    stop_time: Optional[int] = None
    delay_channel_uses: Optional[int] = None
    snr_db: Optional[float] = None
    iterations: Optional[int] = None
    converged: Optional[bool] = None
    clip_count: Optional[int] = None
    error: str = ''

    @property
    def is_error(self) -> bool:
        return bool(self.error)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary in CSV column order."""
        return {name: getattr(self, name) for name in ROW_COLUMNS}


CURVE_COLUMNS = ['decoder', 'snr_db_threshold', 'delay_channel_uses', 'edge_count', 'sparsity_factor']


@dataclass
class CurvePoint:
    """Smallest mean delay reaching a mean SNR threshold."""
    decoder: str
    snr_db_threshold: float
    delay_channel_uses: float
    edge_count: int
    sparsity_factor: float

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary in CSV column order."""
        return {name: getattr(self, name) for name in CURVE_COLUMNS}
