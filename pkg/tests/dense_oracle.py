"""Dense 2^N density-matrix reference for small stabilizer dynamics."""

from __future__ import annotations

import numpy as np

_P = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(p) -> np.ndarray:
    """Matrix of a PauliOperator; qubit 0 is the most significant tensor factor."""
    x, z = p.x_vector(), p.z_vector()
    m = np.ones((1, 1), dtype=complex)
    for q in range(p.n_qubits):
        m = np.kron(m, _P[(int(x[q]), int(z[q]))])
    return p.sign * m


def _rank(m: np.ndarray, tol: float = 1e-8) -> int:
    return int((np.linalg.eigvalsh((m + m.conj().T) / 2) > tol).sum())


def entropy_bits(rho: np.ndarray) -> int:
    """Entropy of a normalized projector state, log2 of its rank."""
    r = _rank(rho)
    s = np.log2(r)
    assert abs(s - round(s)) < 1e-9, "state is not a uniform mixture"
    return int(round(s))


def reduced(rho: np.ndarray, n: int, keep: np.ndarray) -> np.ndarray:
    t = rho.reshape([2] * (2 * n))
    traced = [q for q in range(n) if not keep[q]]
    # trace out from the highest index so remaining axis numbers stay valid
    cur = n
    for q in sorted(traced, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + cur)
        cur -= 1
    d = 2 ** int(np.sum(keep))
    return t.reshape(d, d)


class DenseState:
    def __init__(self, n: int):
        self.n = n
        self.rho = np.eye(2**n, dtype=complex) / 2**n

    def probability(self, P: np.ndarray, outcome: int) -> float:
        proj = (np.eye(P.shape[0]) + outcome * P) / 2
        return float(np.real(np.trace(proj @ self.rho)))

    def measure(self, P: np.ndarray, outcome: int) -> float:
        """Project on the ``outcome`` eigenspace; returns its Born probability."""
        proj = (np.eye(P.shape[0]) + outcome * P) / 2
        prob = float(np.real(np.trace(proj @ self.rho)))
        if prob > 1e-12:
            self.rho = proj @ self.rho @ proj / prob
        return prob

    def entropy(self) -> int:
        return entropy_bits(self.rho)

    def entanglement(self, mask: np.ndarray) -> int:
        if mask.sum() in (0, self.n):
            return 0
        return entropy_bits(reduced(self.rho, self.n, mask))
