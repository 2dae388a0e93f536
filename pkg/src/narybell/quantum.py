"""Finite-dimensional quantum models, see-saw search and visibilities."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .scenario import BellFunctional, CorrelationVector, Scenario, ScenarioError

log = logging.getLogger(__name__)

TOL = 1e-12

# Upper bounds from the literature used as sanity ceilings for see-saw values.
NPA_REFERENCE = {
    "I_a": 1.088663,
    "I_b": 1.032797,
    "I_b^(4)": 2.00959,
    "I_c": 0.0324,
}
# Reported visibilities that are tracked but not reproduced by a fixed model.
REFERENCE_VISIBILITY = {"I_a": 0.917, "I_b": 0.969, "I_c_facet": 0.9788, "I_c_quantum": 0.972}


class ModelError(ValueError):
    pass


class NotViolatedError(ValueError):
    pass


def _herm_err(op: np.ndarray) -> float:
    return float(np.abs(op - op.conj().T).max())


def _check_povm(ops: Sequence[np.ndarray], d: int, label: str) -> None:
    total = np.zeros((d, d), dtype=complex)
    for op in ops:
        if op.shape != (d, d):
            raise ModelError(f"{label}: operator has shape {op.shape}, expected {(d, d)}")
        if _herm_err(op) > TOL:
            raise ModelError(f"{label}: operator is not Hermitian")
        if np.linalg.eigvalsh((op + op.conj().T) / 2).min() < -TOL:
            raise ModelError(f"{label}: operator is not positive semidefinite")
        total += op
    if np.abs(total - np.eye(d)).max() > TOL:
        raise ModelError(f"{label}: elements do not sum to the identity")


@dataclass
class QuantumModel:
    """A bipartite state with one POVM per setting and party.

    ``state`` is either a unit vector of length ``dA * dB`` or a density
    matrix; ``alice[x][a]`` and ``bob[y][b]`` are the POVM elements.
    """

    dA: int
    dB: int
    state: np.ndarray
    alice: list[list[np.ndarray]]
    bob: list[list[np.ndarray]]
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex)
        self.alice = [[np.asarray(op, dtype=complex) for op in povm] for povm in self.alice]
        self.bob = [[np.asarray(op, dtype=complex) for op in povm] for povm in self.bob]
        self.validate()

    def validate(self) -> None:
        D = self.dA * self.dB
        st = self.state
        if st.ndim == 1:
            if st.shape != (D,):
                raise ModelError("state vector has the wrong length")
            if abs(np.vdot(st, st).real - 1) > TOL:
                raise ModelError("state vector is not normalized")
        elif st.shape == (D, D):
            if _herm_err(st) > TOL or abs(np.trace(st).real - 1) > TOL:
                raise ModelError("density matrix must be Hermitian with unit trace")
            if np.linalg.eigvalsh((st + st.conj().T) / 2).min() < -TOL:
                raise ModelError("density matrix is not positive semidefinite")
        else:
            raise ModelError("state must be a vector or a square matrix")
        for x, povm in enumerate(self.alice):
            _check_povm(povm, self.dA, f"Alice setting {x}")
        for y, povm in enumerate(self.bob):
            _check_povm(povm, self.dB, f"Bob setting {y}")

    @property
    def scenario(self) -> Scenario:
        return Scenario(tuple(len(p) for p in self.alice), tuple(len(p) for p in self.bob))

    def density(self) -> np.ndarray:
        if self.state.ndim == 1:
            return np.outer(self.state, self.state.conj())
        return self.state

    def with_state(self, state: np.ndarray) -> "QuantumModel":
        return QuantumModel(self.dA, self.dB, state, self.alice, self.bob, self.name, dict(self.meta))

    def mixed(self, p: float) -> "QuantumModel":
        """``p |psi><psi| + (1 - p) * identity / (dA dB)`` with the same measurements."""
        D = self.dA * self.dB
        return self.with_state(p * self.density() + (1 - p) * np.eye(D) / D)

    def to_json(self) -> dict:
        def enc(arr):
            arr = np.asarray(arr)
            if arr.ndim == 0:
                return [float(arr.real), float(arr.imag)]
            return [enc(v) for v in arr]

        return {
            "dA": self.dA,
            "dB": self.dB,
            "state": enc(self.state),
            "alice": [[enc(op) for op in povm] for povm in self.alice],
            "bob": [[enc(op) for op in povm] for povm in self.bob],
            "name": self.name,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "QuantumModel":
        def dec(v):
            arr = np.asarray(v, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        return cls(
            int(data["dA"]),
            int(data["dB"]),
            dec(data["state"]),
            [[dec(op) for op in povm] for povm in data["alice"]],
            [[dec(op) for op in povm] for povm in data["bob"]],
            data.get("name", ""),
            dict(data.get("meta", {})),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "QuantumModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _rho4(m: QuantumModel) -> np.ndarray:
    return m.density().reshape(m.dA, m.dB, m.dA, m.dB)


def born_probabilities(m: QuantumModel, s: Scenario | None = None) -> CorrelationVector:
    """``P(a,b|x,y) = Tr[rho (A_a|x (x) B_b|y)]`` as a float table."""
    s = s or m.scenario
    if s != m.scenario:
        raise ScenarioError(f"model outcome counts {m.scenario} do not match {s}")
    R = _rho4(m)
    out = np.empty(s.size)
    for (x, y), off in s.offsets.items():
        A = np.stack(m.alice[x])
        B = np.stack(m.bob[y])
        block = np.einsum("imkj,aki,bjm->ab", R, A, B)
        out[off: off + block.size] = block.real.ravel()
    return CorrelationVector(s, out)


def quantum_value(f: BellFunctional, m: QuantumModel) -> float:
    return float(f.evaluate(born_probabilities(m, f.scenario)))


# -- explicit models -------------------------------------------------------------


def _projectors(basis: np.ndarray) -> list[np.ndarray]:
    return [np.outer(basis[:, k], basis[:, k].conj()) for k in range(basis.shape[1])]


def paper_model_Ia() -> QuantumModel:
    r3 = math.sqrt(3)
    V = np.array([[2, 2, 2], [-r3 - 1, r3 - 1, 2], [r3 - 1, -r3 - 1, 2]]) / math.sqrt(12)
    U = np.diag([-1, 1, 1]) @ V
    psi = np.zeros(9)
    psi[0], psi[4], psi[8] = math.sqrt(2) / 2, 0.5, -0.5
    meas = [_projectors(V), _projectors(U)]
    return QuantumModel(3, 3, psi, meas, [list(p) for p in meas], name="paper-ia")


def ib_parameters(n: int, branch: str = "plus") -> tuple[float, float]:
    """``(xi, zeta)`` of the I_b^(n) construction."""
    if n < 3:
        raise ValueError("n must be at least 3")
    if branch not in ("plus", "minus"):
        raise ValueError("branch is 'plus' or 'minus'")
    if n == 3:
        sgn = 1 if branch == "plus" else -1
        r15 = math.sqrt(15)
        xi = -1 / 3 + sgn * math.sqrt(6 * r15 + 22) / 6
        zeta = -1 / 3 + sgn * math.sqrt(10 * r15 - 38) / 6
        return xi, zeta
    return math.sqrt(2), -1 / n + 1 / (math.sqrt(2) * n * n)


def paper_model_Ib(n: int = 3, branch: str = "plus") -> QuantumModel:
    xi, zeta = ib_parameters(n, branch)
    I = np.eye(n)
    phi = np.ones(n)
    psi = sum(np.kron(I[k], I[k]) for k in range(n)) + zeta * np.kron(phi, phi)
    psi = psi / np.linalg.norm(psi)
    a1 = np.outer(phi, phi) / n
    alice = [[I - a1, a1], _projectors(I)]
    bob = []
    for k in range(n):
        eta = I[k] + xi * phi
        b1 = np.outer(eta, eta) / (eta @ eta)
        bob.append([I - b1, b1])
    return QuantumModel(n, n, psi, alice, bob, name=f"paper-ib-{n}-{branch}", meta={"xi": xi, "zeta": zeta})


def _load_fixture(name: str) -> QuantumModel:
    text = resources.files("narybell").joinpath("data").joinpath(name).read_text()
    return QuantumModel.from_json(json.loads(text))


def reference_model_Ic(orthogonal: bool = False) -> QuantumModel:
    """Stored two-qutrit see-saw optimum for I_c.

    With ``orthogonal=True`` the variant with ``<alpha_0|alpha_1> = 0``.
    """
    return _load_fixture("ic_orthogonal.json" if orthogonal else "ic_reference.json")


def schmidt_coefficients(m: QuantumModel) -> np.ndarray:
    if m.state.ndim != 1:
        raise ModelError("Schmidt decomposition needs a pure state")
    return np.linalg.svd(m.state.reshape(m.dA, m.dB), compute_uv=False)


# -- see-saw ---------------------------------------------------------------------


def _blocks(f: BellFunctional) -> dict[tuple[int, int], np.ndarray]:
    s = f.scenario
    coeffs = f.coefficients.astype(float)
    return {
        (x, y): coeffs[off: off + s.alice[x] * s.bob[y]].reshape(s.alice[x], s.bob[y])
        for (x, y), off in s.offsets.items()
    }


def bell_operator(f: BellFunctional, alice, bob) -> np.ndarray:
    W = 0
    for (x, y), c in _blocks(f).items():
        for a, A in enumerate(alice[x]):
            Bsum = sum(c[a, b] * B for b, B in enumerate(bob[y]))
            W = W + np.kron(A, Bsum)
    return W


def _objective(blocks, R, alice, bob) -> float:
    total = 0.0
    for (x, y), c in blocks.items():
        P = np.einsum("imkj,aki,bjm->ab", R, np.stack(alice[x]), np.stack(bob[y])).real
        total += float((c * P).sum())
    return total


def _alice_gradients(blocks, R, bob, x, n_out):
    """``G[a]`` with objective part of setting ``x`` equal to ``sum_a Tr(A_a G_a)``."""
    dA = R.shape[0]
    G = np.zeros((n_out, dA, dA), dtype=complex)
    for (xx, y), c in blocks.items():
        if xx != x:
            continue
        for b, B in enumerate(bob[y]):
            # Tr_B[(1 (x) B) rho], indices (i, k) so that Tr[A G] = sum A_ki G_ik
            red = np.einsum("jm,imkj->ik", B, R)
            for a in range(n_out):
                if c[a, b]:
                    G[a] += c[a, b] * red
    return G


def _psd_sqrt_inv(M: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(M)
    w = np.maximum(w, 1e-300)
    return (v / np.sqrt(w)) @ v.conj().T


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(M)
    return (v * np.sqrt(np.maximum(w, 0))) @ v.conj().T


def optimal_povm(G: np.ndarray, start: list[np.ndarray] | None = None, tol: float = 1e-10, max_iter: int = 500):
    """Maximize ``sum_a Tr(A_a G_a)`` over POVMs ``A``.

    Two outcomes are solved exactly by the positive eigenspace of
    ``G_0 - G_1``. For more outcomes a fixed-point refinement starting from
    ``start`` is used; iterates are kept only while they improve.
    """
    G = np.array([(g + g.conj().T) / 2 for g in G])
    k, d = G.shape[0], G.shape[1]
    if k == 2:
        w, v = np.linalg.eigh(G[0] - G[1])
        pos = v[:, w > 0]
        A0 = pos @ pos.conj().T
        return [A0, np.eye(d) - A0]
    if start is None:
        start = [np.eye(d) / k] * k

    def score(A):
        return float(sum(np.trace(a @ g).real for a, g in zip(A, G)))

    # shift to positive operators; the optimizer does not change
    shift = max(0.0, -min(np.linalg.eigvalsh(g).min() for g in G)) + 1e-3
    Gp = G + shift * np.eye(d)[None]
    best, best_val = [np.asarray(a) for a in start], score(start)
    A = best
    for _ in range(max_iter):
        T = [g @ a @ g for g, a in zip(Gp, A)]
        L = _psd_sqrt(sum(T))
        Li = _psd_sqrt_inv(L)
        A = [Li @ t @ Li for t in T]
        A = [(a + a.conj().T) / 2 for a in A]
        # repair completeness drift
        S = sum(A)
        Si = _psd_sqrt_inv(S)
        A = [Si @ a @ Si for a in A]
        val = score(A)
        if val > best_val + tol:
            best, best_val = A, val
        elif val <= best_val + tol:
            if val > best_val:
                best, best_val = A, val
            break
    return best


def _random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_projective(d: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    U = _random_unitary(d, rng)
    ops = [np.zeros((d, d), dtype=complex) for _ in range(k)]
    for j in range(d):
        ops[j % k] += np.outer(U[:, j], U[:, j].conj())
    return ops


def _orthogonal_rank_one(D0: np.ndarray, D1: np.ndarray, u0: np.ndarray, u1: np.ndarray, sweeps: int = 200):
    """Maximize ``<u0|D0|u0> + <u1|D1|u1>`` over orthonormal pairs."""
    d = D0.shape[0]

    def top_in_complement(D, w):
        # orthonormal basis of the complement of w
        basis = np.linalg.svd(np.eye(d) - np.outer(w, w.conj()))[0][:, : d - 1]
        vals, vecs = np.linalg.eigh(basis.conj().T @ D @ basis)
        return basis @ vecs[:, -1]

    val = (u0.conj() @ D0 @ u0).real + (u1.conj() @ D1 @ u1).real
    for _ in range(sweeps):
        u0 = top_in_complement(D0, u1)
        u1 = top_in_complement(D1, u0)
        new = (u0.conj() @ D0 @ u0).real + (u1.conj() @ D1 @ u1).real
        if new - val < 1e-14:
            val = max(val, new)
            break
        val = new
    return u0, u1


@dataclass
class SeesawResult:
    value: float
    model: QuantumModel
    converged: bool
    restart: int
    seed: int
    history: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __iter__(self):
        return iter((self.value, self.model))


class MonotonicityError(RuntimeError):
    pass


def _seesaw_once(
    f: BellFunctional,
    dA: int,
    dB: int,
    rng: np.random.Generator,
    max_sweeps: int,
    tol: float,
    state: np.ndarray | None = None,
    alice=None,
    bob=None,
    rank_one: bool = False,
    alice_orthogonal: tuple[int, int] | None = None,
):
    s = f.scenario
    blocks = _blocks(f)
    fixed_state = state is not None
    alice = alice or [_random_projective(dA, o, rng) for o in s.alice]
    bob = bob or [_random_projective(dB, o, rng) for o in s.bob]
    if rank_one or alice_orthogonal:
        for meas, d in ((alice, dA), (bob, dB)):
            for x, povm in enumerate(meas):
                if len(povm) == 2:
                    u = _random_unitary(d, rng)[:, 0]
                    p = np.outer(u, u.conj())
                    meas[x] = [p, np.eye(d) - p]
    swapped = _swap_functional_blocks(blocks)
    history: list[float] = []
    prev = -np.inf
    converged = False
    rho = None if not fixed_state else np.asarray(state, dtype=complex)
    psi = None
    for sweep in range(max_sweeps):
        if not fixed_state:
            W = bell_operator(f, alice, bob)
            w, v = np.linalg.eigh((W + W.conj().T) / 2)
            psi = v[:, -1]
            rho = np.outer(psi, psi.conj())
        R = rho.reshape(dA, dB, dA, dB)
        alice = _update_party(blocks, R, alice, bob, rank_one, alice_orthogonal)
        Rs = R.transpose(1, 0, 3, 2)
        bob = _update_party(swapped, Rs, bob, alice, rank_one, None)
        val = _objective(blocks, R, alice, bob)
        if val < prev - 1e-9:
            raise MonotonicityError(f"see-saw objective decreased: {prev} -> {val}")
        history.append(val)
        if val - prev < tol:
            converged = True
            break
        prev = val
    final_state = psi if not fixed_state else rho
    return history[-1], final_state, alice, bob, converged, history


def _swap_functional_blocks(blocks):
    return {(y, x): c.T for (x, y), c in blocks.items()}


def _update_party(blocks, R, mine, other, rank_one, orthogonal):
    new = list(mine)
    for x in range(len(mine)):
        G = _alice_gradients(blocks, R, other, x, len(mine[x]))
        if orthogonal and x in orthogonal:
            continue
        if rank_one and len(mine[x]) == 2:
            D = G[0] - G[1]
            D = (D + D.conj().T) / 2
            w, v = np.linalg.eigh(D)
            u = v[:, -1]
            p = np.outer(u, u.conj())
            cand = [p, np.eye(len(u)) - p]
            old = sum(np.trace(a @ g).real for a, g in zip(mine[x], G))
            if sum(np.trace(a @ g).real for a, g in zip(cand, G)) >= old:
                new[x] = cand
            continue
        new[x] = optimal_povm(G, mine[x])
    if orthogonal:
        i, j = orthogonal
        Gi = _alice_gradients(blocks, R, other, i, 2)
        Gj = _alice_gradients(blocks, R, other, j, 2)
        Di = (Gi[0] - Gi[1] + (Gi[0] - Gi[1]).conj().T) / 2
        Dj = (Gj[0] - Gj[1] + (Gj[0] - Gj[1]).conj().T) / 2
        ui = _top_vector(new[i][0])
        uj = _top_vector(new[j][0])
        uj = uj - (ui.conj() @ uj) * ui
        uj = uj / np.linalg.norm(uj)
        ui, uj = _orthogonal_rank_one(Di, Dj, ui, uj)
        d = len(ui)
        new[i] = [np.outer(ui, ui.conj()), np.eye(d) - np.outer(ui, ui.conj())]
        new[j] = [np.outer(uj, uj.conj()), np.eye(d) - np.outer(uj, uj.conj())]
    return new


def _top_vector(P: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((P + P.conj().T) / 2)
    return v[:, -1]


def _clean(ops: list[np.ndarray]) -> list[np.ndarray]:
    ops = [(o + o.conj().T) / 2 for o in ops]
    d = ops[0].shape[0]
    out = []
    for o in ops:
        w, v = np.linalg.eigh(o)
        out.append((v * np.clip(w, 0, None)) @ v.conj().T)
    # put the completeness error on the last element, it is tiny
    out[-1] = out[-1] + (np.eye(d) - sum(out))
    return out


def seesaw(
    f: BellFunctional,
    dA: int,
    dB: int,
    restarts: int = 20,
    seed: int = 0,
    max_sweeps: int = 5000,
    tol: float = 1e-13,
    threads: int = 1,
    rank_one: bool = False,
    alice_orthogonal: tuple[int, int] | None = None,
) -> SeesawResult:
    """Best of ``restarts`` seeded see-saw runs; ties go to the lower restart index."""
    if dA < 2 or dB < 2:
        raise ValueError("local dimensions must be at least 2")
    if restarts < 1:
        raise ValueError("need at least one restart")

    def run(r):
        rng = np.random.default_rng([seed, r])
        return _seesaw_once(f, dA, dB, rng, max_sweeps, tol, rank_one=rank_one, alice_orthogonal=alice_orthogonal)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(run, range(restarts)))
    else:
        runs = [run(r) for r in range(restarts)]
    values = [r[0] for r in runs]
    best = int(np.argmax(values))
    val, psi, alice, bob, converged, history = runs[best]
    model = QuantumModel(
        dA, dB, psi / np.linalg.norm(psi), [_clean(p) for p in alice], [_clean(p) for p in bob],
        name=f"seesaw-{f.name or 'functional'}",
        meta={"seed": seed, "restart": best, "restarts": restarts},
    )
    return SeesawResult(val, model, converged, best, seed, history, values)


# -- visibility ------------------------------------------------------------------

NOISE_MODES = ("maximally_mixed_state", "uniform_outcomes")


def noise_value(f: BellFunctional, m: QuantumModel, noise: str) -> float:
    if noise == "maximally_mixed_state":
        return quantum_value(f, m.mixed(0.0))
    if noise == "uniform_outcomes":
        return float(f.evaluate(CorrelationVector.uniform(f.scenario)))
    raise ValueError(f"noise must be one of {NOISE_MODES}")


def critical_visibility(f: BellFunctional, m: QuantumModel, bound=None, noise: str = "maximally_mixed_state") -> float:
    """Smallest ``p`` with ``p I(model) + (1 - p) I(noise) = bound``."""
    bound = f.bound if bound is None else bound
    value = quantum_value(f, m)
    ref = noise_value(f, m, noise)
    b = float(Fraction(bound))
    if value <= b:
        raise NotViolatedError(f"model value {value} does not exceed the bound {b}")
    if ref >= b:
        raise NotViolatedError("the noise reference already violates the bound")
    p = (b - ref) / (value - ref)
    return float(min(max(p, 0.0), 1.0))


def reoptimized_visibility(
    f: BellFunctional,
    m: QuantumModel,
    bound=None,
    restarts: int = 0,
    seed: int = 0,
    tol: float = 1e-4,
    max_sweeps: int = 300,
) -> float:
    """Critical ``p`` when measurements are re-optimized for the noisy state.

    The state is ``p |psi><psi| + (1-p) 1/D``; for each trial ``p`` the
    measurements are improved by a see-saw over measurements only, started
    from the model's own measurements and from ``restarts`` seeded random ones.
    """
    b = float(Fraction(f.bound if bound is None else bound))
    def best_value(p):
        noisy = m.mixed(p).density()
        rng = np.random.default_rng(seed)
        vals = []
        starts = [([list(a) for a in m.alice], [list(b_) for b_ in m.bob])] + [(None, None)] * restarts
        for alice, bob in starts:
            v, *_ = _seesaw_once(f, m.dA, m.dB, rng, max_sweeps, 1e-12, state=noisy, alice=alice, bob=bob)
            vals.append(v)
        return max(vals)

    lo, hi = 0.0, 1.0
    if best_value(hi) <= b:
        raise NotViolatedError("no violation even without noise")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if best_value(mid) > b:
            hi = mid
        else:
            lo = mid
    return hi
