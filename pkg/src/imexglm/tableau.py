"""General linear method tableaus for IMEX pairs of DIMSIM type.

A method with s internal stages and r external values is held as the
coefficient blocks (A, U, B, V) plus abscissae c.  An IMEX pair shares
(U, V, c) between the explicit part (A strictly lower triangular) and
the implicit part (A lower triangular with constant diagonal), and of
the DIMSIM class used here: p = q = r = s, U = I, V = e v^T.

The B block is not free: once (A, c, v) are chosen it is pinned by the
order conditions

    B = B0 - A B1 - V B2 + V A,

where B0, B1, B2 are quadrature-type matrices built from the nodal basis
phi_j(x) = prod_{k != j} (x - c_k).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial
from typing import NamedTuple

import numpy as np


class DistinctNodesError(ValueError):
    """Raised when abscissae contain (near-)duplicate entries."""


class MethodFileError(ValueError):
    """Raised when a method file is missing fields or has ragged shapes."""


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GlmTableau:
    """One component (explicit or implicit) of a general linear method."""

    A: np.ndarray  # (s, s) stage coupling
    U: np.ndarray  # (s, r) external -> stage
    B: np.ndarray  # (r, s) stage -> external
    V: np.ndarray  # (r, r) external propagation
    c: np.ndarray  # (s,) abscissae

    def __post_init__(self):
        for name in ("A", "U", "B", "V", "c"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        s, r = self.A.shape[0], self.V.shape[0]
        if self.A.shape != (s, s) or self.U.shape != (s, r):
            raise ValueError("inconsistent tableau block shapes")
        if self.B.shape != (r, s) or self.c.shape != (s,):
            raise ValueError("inconsistent tableau block shapes")

    @property
    def s(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[0]


@dataclass(frozen=True)
class ImexGlmMethod:
    """IMEX pair of GLM tableaus sharing (U, V, c), plus starting weights.

    Q and Qhat hold the weights expressing the initial external vector in
    terms of scaled derivatives of the two split parts: column k weights
    h^k d^k/dt^k of the nonstiff (Q) and stiff (Qhat) contributions.
    """

    name: str
    explicit: GlmTableau
    implicit: GlmTableau
    v: np.ndarray          # (r,) rank-one factor of V
    Q: np.ndarray          # (r, p + 1)
    Qhat: np.ndarray       # (r, p + 1)
    p: int
    q: int

    def __post_init__(self):
        for name in ("v", "Q", "Qhat"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def s(self) -> int:
        return self.explicit.s

    @property
    def r(self) -> int:
        return self.explicit.r

    @property
    def c(self) -> np.ndarray:
        return self.explicit.c

    @property
    def A(self) -> np.ndarray:
        return self.explicit.A

    @property
    def Ahat(self) -> np.ndarray:
        return self.implicit.A

    @property
    def B(self) -> np.ndarray:
        return self.explicit.B

    @property
    def Bhat(self) -> np.ndarray:
        return self.implicit.B

    @property
    def lam(self) -> float:
        """Constant diagonal of the implicit stage matrix."""
        return float(self.implicit.A[0, 0])


class NodalPolynomialTable(NamedTuple):
    """Values and integrals of the nodal basis phi_j over the abscissae.

    phi_norm[j]          phi_j(c_j)
    value_shift[i, j]    phi_j(1 + c_i)
    integral_shift[i, j] int_0^{1+c_i} phi_j(x) dx
    integral_node[i, j]  int_0^{c_i}   phi_j(x) dx
    """

    phi_norm: np.ndarray
    value_shift: np.ndarray
    integral_shift: np.ndarray
    integral_node: np.ndarray


def nodal_polynomials(c) -> NodalPolynomialTable:
    """Tabulate phi_j(x) = prod_{k != j}(x - c_k) at the points the order
    conditions need.

    Polynomials are expanded to monomial coefficients and integrated
    analytically; no quadrature is involved.
    """
    c = np.asarray(c, dtype=float)
    s = c.size
    spread = max(1.0, float(np.max(np.abs(c)))) if s else 1.0
    for i in range(s):
        for j in range(i + 1, s):
            if abs(c[i] - c[j]) <= 1e-12 * spread:
                raise DistinctNodesError(
                    f"abscissae c[{i}]={c[i]!r} and c[{j}]={c[j]!r} coincide"
                )

    phi_norm = np.empty(s)
    value_shift = np.empty((s, s))
    integral_shift = np.empty((s, s))
    integral_node = np.empty((s, s))
    for j in range(s):
        # monomial form, highest power first; s = 1 gives the constant 1
        coeffs = np.atleast_1d(np.poly(np.delete(c, j)))
        anti = np.polyint(coeffs)          # antiderivative vanishing at 0
        phi_norm[j] = np.polyval(coeffs, c[j])
        value_shift[:, j] = np.polyval(coeffs, 1.0 + c)
        integral_shift[:, j] = np.polyval(anti, 1.0 + c)
        integral_node[:, j] = np.polyval(anti, c)
    return NodalPolynomialTable(phi_norm, value_shift, integral_shift, integral_node)


def dimsim_b_matrix(A, c, v) -> np.ndarray:
    """Coefficient block B pinned by the order conditions for a DIMSIM
    with stage matrix A, abscissae c and rank-one V = e v^T.
    """
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    v = np.asarray(v, dtype=float)
    s = c.size
    if A.shape != (s, s) or v.shape != (s,):
        raise ValueError("A must be (s, s) and v length s to match c")
    tab = nodal_polynomials(c)
    B0 = tab.integral_shift / tab.phi_norm
    B1 = tab.value_shift / tab.phi_norm
    B2 = tab.integral_node / tab.phi_norm
    V = np.outer(np.ones(s), v)
    return B0 - A @ B1 - V @ B2 + V @ A


def starting_weight_matrix(A, c, p) -> np.ndarray:
    """Weights Q with columns q_0 = e and q_k = c^k/k! - A c^{k-1}/(k-1)!.

    Row i gives the derivative expansion the i-th external value carries;
    shape (s, p + 1).
    """
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    s = c.size
    Q = np.empty((s, p + 1))
    Q[:, 0] = 1.0
    for k in range(1, p + 1):
        Q[:, k] = c**k / factorial(k) - A @ (c ** (k - 1)) / factorial(k - 1)
    return Q


@dataclass
class ValidationCheck:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)


@dataclass
class MethodValidationReport:
    method: str
    checks: list[ValidationCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def failures(self) -> list[ValidationCheck]:
        return [ch for ch in self.checks if not ch.passed]

    def summary(self) -> str:
        lines = [f"method {self.method}: {'OK' if self.passed else 'FAILED'}"]
        for ch in self.checks:
            mark = "pass" if ch.passed else "FAIL"
            lines.append(f"  [{mark}] {ch.name}: residual {ch.residual:.3e} (tol {ch.tol:.1e})")
        return "\n".join(lines)


STRUCTURAL_TOL = 1e-12
ORDER_CONDITION_TOL = 1e-8


def validate_method(m: ImexGlmMethod, tol: float = STRUCTURAL_TOL) -> MethodValidationReport:
    """Check structural and order-condition consistency of an IMEX pair.

    Structural residuals (triangularity, shared blocks, rank-one V,
    preconsistency) are held to `tol`; the recomputed-B checks use the
    looser ORDER_CONDITION_TOL since published coefficients carry about
    15 digits and the B relation amplifies their rounding.
    """
    rep = MethodValidationReport(method=m.name)
    add = rep.checks.append
    s, r = m.s, m.r
    A, Ah = m.A, m.Ahat

    add(ValidationCheck("square family (p=q=r=s)",
                        float(abs(m.p - m.q) + abs(m.r - s) + abs(m.p - s)), 0.0))
    iu = np.triu_indices(s, k=0)
    add(ValidationCheck("explicit A strictly lower", float(np.abs(A[iu]).max()), tol))
    iu1 = np.triu_indices(s, k=1)
    up = float(np.abs(Ah[iu1]).max()) if s > 1 else 0.0
    diag = np.diag(Ah)
    add(ValidationCheck("implicit A lower triangular", up, tol))
    add(ValidationCheck("implicit diagonal constant", float(np.ptp(diag)), tol))
    add(ValidationCheck("implicit diagonal positive", float(max(0.0, -diag.min())), 0.0))

    for label, t in (("explicit", m.explicit), ("implicit", m.implicit)):
        add(ValidationCheck(f"{label} U = I", float(np.abs(t.U - np.eye(s, r)).max()), tol))
        add(ValidationCheck(f"{label} V = e v^T",
                            float(np.abs(t.V - np.outer(np.ones(r), m.v)).max()), tol))
    add(ValidationCheck("shared abscissae", float(np.abs(m.explicit.c - m.implicit.c).max()), tol))
    add(ValidationCheck("preconsistency sum(v) = 1", float(abs(m.v.sum() - 1.0)), tol))

    cs = m.c
    mono = float(max(0.0, -np.diff(cs).min())) if s > 1 else 0.0
    add(ValidationCheck("abscissae increasing", mono, 0.0))
    add(ValidationCheck("c starts at 0", float(abs(cs[0])), tol))
    if s > 1:
        add(ValidationCheck("c ends at 1", float(abs(cs[-1] - 1.0)), tol))

    try:
        B_ref = dimsim_b_matrix(A, cs, m.v)
        Bh_ref = dimsim_b_matrix(Ah, cs, m.v)
        add(ValidationCheck("explicit B solves order conditions",
                            float(np.abs(m.B - B_ref).max()), ORDER_CONDITION_TOL))
        add(ValidationCheck("implicit B solves order conditions",
                            float(np.abs(m.Bhat - Bh_ref).max()), ORDER_CONDITION_TOL))
    except DistinctNodesError:
        add(ValidationCheck("explicit B solves order conditions", np.inf, ORDER_CONDITION_TOL))
        add(ValidationCheck("implicit B solves order conditions", np.inf, ORDER_CONDITION_TOL))

    add(ValidationCheck("starting weights Q",
                        float(np.abs(m.Q - starting_weight_matrix(A, cs, m.p)).max()), tol))
    add(ValidationCheck("starting weights Qhat",
                        float(np.abs(m.Qhat - starting_weight_matrix(Ah, cs, m.p)).max()), tol))
    add(ValidationCheck("Q column 0 all ones", float(np.abs(m.Q[:, 0] - 1.0).max()), tol))
    add(ValidationCheck("Qhat column 0 all ones", float(np.abs(m.Qhat[:, 0] - 1.0).max()), tol))
    return rep


# ---------------------------------------------------------------------------
# serialization: decimal strings with >= 17 significant digits so that
# write -> read round-trips binary64 exactly

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_array(a) -> list:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return [_fmt(x) for x in a]
    return [[_fmt(x) for x in row] for row in a]


def _parse_array(obj, shape, what: str) -> np.ndarray:
    try:
        a = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MethodFileError(f"field {what!r} is not numeric") from exc
    if a.shape != shape:
        raise MethodFileError(f"field {what!r} has shape {a.shape}, expected {shape}")
    return a


def method_to_dict(m: ImexGlmMethod) -> dict:
    return {
        "name": m.name,
        "s": m.s,
        "r": m.r,
        "p": m.p,
        "q": m.q,
        "c": _fmt_array(m.c),
        "A": _fmt_array(m.A),
        "Ahat": _fmt_array(m.Ahat),
        "B": _fmt_array(m.B),
        "Bhat": _fmt_array(m.Bhat),
        "v": _fmt_array(m.v),
        "Q": _fmt_array(m.Q),
        "Qhat": _fmt_array(m.Qhat),
    }


def method_from_dict(d: dict) -> ImexGlmMethod:
    required = ["name", "s", "r", "p", "q", "c", "A", "Ahat", "B", "Bhat", "v", "Q", "Qhat"]
    missing = [k for k in required if k not in d]
    if missing:
        raise MethodFileError(f"method file missing fields: {missing}")
    try:
        s, r, p, q = int(d["s"]), int(d["r"]), int(d["p"]), int(d["q"])
    except (TypeError, ValueError) as exc:
        raise MethodFileError("s, r, p, q must be integers") from exc
    c = _parse_array(d["c"], (s,), "c")
    A = _parse_array(d["A"], (s, s), "A")
    Ahat = _parse_array(d["Ahat"], (s, s), "Ahat")
    B = _parse_array(d["B"], (r, s), "B")
    Bhat = _parse_array(d["Bhat"], (r, s), "Bhat")
    v = _parse_array(d["v"], (r,), "v")
    Q = _parse_array(d["Q"], (r, p + 1), "Q")
    Qhat = _parse_array(d["Qhat"], (r, p + 1), "Qhat")
    U = np.eye(s, r)
    V = np.outer(np.ones(r), v)
    return ImexGlmMethod(
        name=str(d["name"]),
        explicit=GlmTableau(A=A, U=U, B=B, V=V, c=c),
        implicit=GlmTableau(A=Ahat, U=U, B=Bhat, V=V, c=c),
        v=v, Q=Q, Qhat=Qhat, p=p, q=q,
    )


def save_method(m: ImexGlmMethod, path) -> None:
    with open(path, "w") as fh:
        json.dump(method_to_dict(m), fh, indent=1)
        fh.write("\n")


def load_method(path) -> ImexGlmMethod:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MethodFileError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise MethodFileError(f"{path}: expected a JSON object")
    return method_from_dict(d)


def imex_dimsim(name: str, c, A, Ahat, v, p: int | None = None) -> ImexGlmMethod:
    """Assemble an IMEX DIMSIM pair from its free parameters.

    B blocks and starting weights are derived from (A, c, v); use this for
    constructed methods.  Published methods keep their printed coefficients.
    """
    c = np.asarray(c, dtype=float)
    s = c.size
    p = s if p is None else p
    U = np.eye(s)
    V = np.outer(np.ones(s), np.asarray(v, dtype=float))
    B = dimsim_b_matrix(A, c, v)
    Bhat = dimsim_b_matrix(Ahat, c, v)
    return ImexGlmMethod(
        name=name,
        explicit=GlmTableau(A=A, U=U, B=B, V=V, c=c),
        implicit=GlmTableau(A=Ahat, U=U, B=Bhat, V=V, c=c),
        v=np.asarray(v, dtype=float),
        Q=starting_weight_matrix(A, c, p),
        Qhat=starting_weight_matrix(Ahat, c, p),
        p=p, q=p,
    )
