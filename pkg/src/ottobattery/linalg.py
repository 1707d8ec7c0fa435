"""Dense complex linear algebra kernel.

Tensor products, partial traces over the machine/battery split, Hermitian
eigendecomposition, and unitary exponentials.  Everything here operates on
plain complex ``numpy`` arrays in double precision; the global ordering
convention is machine-factor-first, i.e. a joint operator lives on
C^2 (x) C^M with the machine index slowest.
"""

import numpy as np

#: Tolerance for treating an input as Hermitian (relative, max-norm).
HERMITICITY_TOL = 1e-12

MACHINE_DIM = 2


def _as_complex(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a.astype(complex, copy=False)


def require_hermitian(a, tol=HERMITICITY_TOL):
    """Raise ValueError unless ``a`` is Hermitian within ``tol`` (relative)."""
    a = _as_complex(a)
    scale = max(np.max(np.abs(a)), 1.0)
    dev = np.max(np.abs(a - a.conj().T))
    if dev > tol * scale:
        raise ValueError(f"matrix is not Hermitian: max|A - A^dag| = {dev:.3e}")
    return a


def kron(a, b):
    """Kronecker product with the machine-factor-first convention."""
    return np.kron(_as_complex(a), _as_complex(b))


def _split_joint(rho, battery_dim):
    rho = _as_complex(rho)
    d = MACHINE_DIM * battery_dim
    if rho.shape != (d, d):
        raise ValueError(
            f"joint state has dim {rho.shape[0]}, expected {d} = 2*{battery_dim}"
        )
    return rho.reshape(MACHINE_DIM, battery_dim, MACHINE_DIM, battery_dim)


def partial_trace_machine(rho, battery_dim):
    """Trace out the two-level machine, returning the M x M battery state."""
    return np.trace(_split_joint(rho, battery_dim), axis1=0, axis2=2)


def partial_trace_battery(rho, battery_dim):
    """Trace out the battery, returning the 2 x 2 machine state."""
    return np.trace(_split_joint(rho, battery_dim), axis1=1, axis2=3)


def herm_eig(h):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and eigenvectors in
    the columns of ``v``.  Each column is normalized so that its
    largest-magnitude component is real and positive, which makes analytic
    vs numeric comparisons of unitaries reproducible.
    """
    h = require_hermitian(h)
    w, v = np.linalg.eigh(h)
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    phases = pivots / np.abs(pivots)
    v = v * phases.conj()
    return w, v


def expm_unitary(h, dt):
    """exp(-i h dt) for Hermitian ``h``, via eigendecomposition.

    Unitary by construction up to roundoff; no Pade/scaling-squaring path.
    """
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def unitarity_residual(u):
    """max-norm deviation of ``u`` from unitarity, max|U^dag U - I|."""
    u = _as_complex(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def polar_unitary(u):
    """Closest unitary to ``u`` (polar factor), computed via SVD."""
    x, _, yh = np.linalg.svd(_as_complex(u))
    return x @ yh


def check_density_matrix(rho, *, trace_tol=1e-10, eig_floor=-1e-10, name="state"):
    """Validate Hermiticity, unit trace and positivity of a density matrix.

    Returns the minimum eigenvalue so callers can apply their own repair
    policy; raises ValueError when Hermiticity or normalization fail.
    """
    rho = require_hermitian(rho)
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"{name} trace deviates from 1 by {abs(tr - 1.0):.3e}")
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    if min_eig < eig_floor:
        raise ValueError(f"{name} has negative eigenvalue {min_eig:.3e}")
    return min_eig
