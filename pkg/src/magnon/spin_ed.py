"""Exact diagonalization of the spin Hamiltonian on small boxes.

The spin basis on each site is ``|n>`` with ``n = S^3 + S`` running from 0 to
``2S``; multi-site states use the same mixed-radix, little-endian indexing as
the capped boson basis, so the boson image of the Hamiltonian can be compared
entry by entry.

Dense Hamiltonians respect the global dimension cap (spin 1/2 up to 12 sites,
spin 1 up to 7 sites).  The single-magnon check instead applies the
Hamiltonian matrix-free, which reaches millions of states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dispersion, fock, lattice, linalg
from ._errors import CapacityError, ValidationError

__all__ = [
    "SpinMatrices",
    "spin_matrices",
    "heisenberg_hamiltonian",
    "dirichlet_hamiltonian",
    "exact_free_energy",
    "free_energy_per_spin",
    "apply_hamiltonian",
    "magnon_check",
    "hp_equivalence_check",
]


@dataclass(frozen=True)
class SpinMatrices:
    """Single-site ``S^3``, raising and lowering matrices in the ``|n>`` basis."""

    s3: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray


def spin_matrices(two_s: int) -> SpinMatrices:
    if not isinstance(two_s, int) or two_s < 1:
        raise ValidationError("two_s must be a positive integer")
    s = two_s / 2.0
    n = np.arange(two_s + 1, dtype=np.float64)
    s3 = np.diag(n - s)
    sp = np.zeros((two_s + 1, two_s + 1))
    amp = np.sqrt((two_s - n[:-1]) * (n[:-1] + 1.0))
    sp[np.arange(1, two_s + 1), np.arange(two_s)] = amp
    return SpinMatrices(s3, sp, sp.T.copy())


def _embed_one(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    r = op.shape[0]
    m = op
    if site > 0:
        m = np.kron(m, np.eye(r**site))
    if site < n_sites - 1:
        m = np.kron(np.eye(r ** (n_sites - 1 - site)), m)
    return m


def _embed_two(op_a: np.ndarray, a: int, op_b: np.ndarray, b: int, n_sites: int) -> np.ndarray:
    """Embedding of a product of single-site operators on distinct sites."""
    if a == b:
        raise ValidationError("sites must be distinct")
    r = op_a.shape[0]
    lo, hi = (a, b) if a < b else (b, a)
    op_lo, op_hi = (op_a, op_b) if a < b else (op_b, op_a)
    m = op_hi
    if hi - lo - 1 > 0:
        m = np.kron(m, np.eye(r ** (hi - lo - 1)))
    m = np.kron(m, op_lo)
    if lo > 0:
        m = np.kron(m, np.eye(r**lo))
    if n_sites - 1 - hi > 0:
        m = np.kron(np.eye(r ** (n_sites - 1 - hi)), m)
    return m


def _check_dim(spec: lattice.LatticeSpec, two_s: int) -> int:
    dim = (two_s + 1) ** spec.n_sites
    if dim > linalg.DENSE_DIM_CAP:
        raise CapacityError(
            f"spin space dimension {dim} exceeds dense cap {linalg.DENSE_DIM_CAP}"
        )
    return dim


def heisenberg_hamiltonian(spec: lattice.LatticeSpec, two_s: int) -> np.ndarray:
    """Dense ``sum over bonds of (S^2 - S_x . S_y)``, real symmetric, PSD."""
    dim = _check_dim(spec, two_s)
    sm = spin_matrices(two_s)
    s = two_s / 2.0
    h = np.zeros((dim, dim))
    n_bonds = 0
    for i, j in lattice.nn_pairs(spec):
        h -= _embed_two(sm.s3, int(i), sm.s3, int(j), spec.n_sites)
        h -= 0.5 * _embed_two(sm.s_plus, int(i), sm.s_minus, int(j), spec.n_sites)
        h -= 0.5 * _embed_two(sm.s_minus, int(i), sm.s_plus, int(j), spec.n_sites)
        n_bonds += 1
    h[np.diag_indices(dim)] += n_bonds * s * s
    return h


def dirichlet_hamiltonian(spec: lattice.LatticeSpec, two_s: int) -> np.ndarray:
    """Spin Hamiltonian with frozen aligned neighbors outside the box.

    Each frozen bond at site ``x`` adds ``S^2 + S*S^3_x``; the per-site count
    is the frozen-bond multiplicity.
    """
    dim = _check_dim(spec, two_s)
    mult = lattice.boundary_multiplicity(spec)
    sm = spin_matrices(two_s)
    s = two_s / 2.0
    h = heisenberg_hamiltonian(spec, two_s)
    for x in np.nonzero(mult)[0]:
        h += mult[x] * s * _embed_one(sm.s3, int(x), spec.n_sites)
    h[np.diag_indices(dim)] += float(np.sum(mult)) * s * s
    return h


def exact_free_energy(h: np.ndarray, beta: float, n_sites: int) -> float:
    """Free energy per site ``-log tr e^{-beta h} / (beta n_sites)``."""
    return -linalg.gibbs_log_trace(h, beta) / (beta * n_sites)


def free_energy_per_spin(
    spec: lattice.LatticeSpec, two_s: int, beta_tilde: float, dirichlet: bool = True
) -> float:
    """Exact ``f/S`` of the box at spin-wave inverse temperature ``beta_tilde``.

    The physical inverse temperature is ``beta_tilde / S``.
    """
    s = two_s / 2.0
    h = dirichlet_hamiltonian(spec, two_s) if dirichlet else heisenberg_hamiltonian(spec, two_s)
    return exact_free_energy(h, beta_tilde / s, spec.n_sites) / s


def apply_hamiltonian(
    spec: lattice.LatticeSpec, two_s: int, vec: np.ndarray, dirichlet: bool = False
) -> np.ndarray:
    """Matrix-free ``H @ vec`` in the mixed-radix spin basis.

    Memory stays at a few copies of the state vector, so boxes far beyond the
    dense cap are reachable.
    """
    r = two_s + 1
    dim = r**spec.n_sites
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (dim,):
        raise ValidationError(f"state vector must have length {dim}")
    s = two_s / 2.0
    idx = np.arange(dim, dtype=np.int64)
    occ = [(idx // r**site) % r for site in range(spec.n_sites)]
    strides = [r**site for site in range(spec.n_sites)]
    out = np.zeros(dim)
    for i, j in lattice.nn_pairs(spec):
        ni, nj = occ[i], occ[j]
        out += (s * s - (ni - s) * (nj - s)) * vec
        for x, y in ((i, j), (j, i)):
            # -(1/2) S^+_x S^-_y moves one unit from y to x
            nx, ny = occ[x], occ[y]
            ok = (nx < two_s) & (ny > 0)
            amp = -0.5 * np.sqrt(
                (two_s - nx[ok]) * (nx[ok] + 1.0) * ny[ok] * (two_s - ny[ok] + 1.0)
            )
            np.add.at(out, idx[ok] + strides[x] - strides[y], amp * vec[ok])
    if dirichlet:
        mult = lattice.boundary_multiplicity(spec)
        for x in np.nonzero(mult)[0]:
            out += mult[x] * (s * s + s * (occ[x] - s)) * vec
    return out


def magnon_check(spec: lattice.LatticeSpec, two_s: int, k) -> float:
    """Residual of the single-magnon eigenvalue equation on the torus.

    Builds ``|k> = l^{-d/2} sum_x e^{ikx} S^+_x |ground> / sqrt(2S)`` and
    returns the relative residual of ``H |k> = S eps(k) |k>``, applying the
    full many-body Hamiltonian matrix-free (real and imaginary parts
    separately).
    """
    if spec.boundary is not lattice.Boundary.PERIODIC:
        raise ValidationError("the magnon check runs on periodic boxes")
    k = np.asarray(k, dtype=np.float64)
    if k.shape != (spec.d,):
        raise ValidationError("momentum must have one component per dimension")
    kmat = lattice.periodic_modes(spec)
    if not np.any(np.all(np.abs(kmat - k) < 1e-9, axis=1)):
        raise ValidationError(f"momentum {k} is not on the torus grid")
    r = two_s + 1
    dim = r**spec.n_sites
    xs = lattice.sites(spec)
    phase = xs @ k
    s = two_s / 2.0
    target = s * float(dispersion.epsilon(k))
    vc = np.zeros(dim)
    vs = np.zeros(dim)
    # the state with a single unit on site x sits at index r**x
    one_boson = r ** np.arange(spec.n_sites, dtype=np.int64)
    norm = spec.n_sites ** -0.5
    vc[one_boson] = norm * np.cos(phase)
    vs[one_boson] = norm * np.sin(phase)
    res2 = 0.0
    nrm2 = 0.0
    for v in (vc, vs):
        hv = apply_hamiltonian(spec, two_s, v)
        res2 += float(np.sum((hv - target * v) ** 2))
        nrm2 += float(np.sum(v**2))
    if not nrm2 > 0.0:
        raise ValidationError("magnon vector vanished")
    return float(np.sqrt(res2 / nrm2))


def hp_equivalence_check(spec: lattice.LatticeSpec, two_s: int) -> float:
    """Max-norm difference between the spin Hamiltonian and its boson image.

    Uses the uncapped identification ``n_max = 2S``; the two matrices agree
    to rounding error.  Dirichlet boxes compare the penalized pair.
    """
    basis = fock.build_basis(spec, two_s)
    hp = fock.hp_hamiltonian(basis, two_s)
    s = two_s / 2.0
    if spec.boundary is lattice.Boundary.DIRICHLET:
        h_spin = dirichlet_hamiltonian(spec, two_s)
        mult = lattice.boundary_multiplicity(spec).astype(np.float64)
        hp = hp + np.diag(s * (basis.occupations @ mult))
    else:
        h_spin = heisenberg_hamiltonian(spec, two_s)
    return float(np.max(np.abs(h_spin - hp)))
