"""Small dense conic solver for SDPs with a linear objective.

Problems are stated in the standard conic form

    minimize  q^T x   subject to   b - A x = s,  s in K

where K is a product of zero, nonnegative, second-order and PSD cones
(real symmetric or complex Hermitian).  Matrix variables are stored in
isometric vectorized form: the real ``svec`` keeps the upper triangle with
off-diagonals scaled by sqrt(2); the Hermitian ``hvec`` stacks the diagonal,
then sqrt(2) Re and sqrt(2) Im of the strict upper triangle.  Both satisfy
<vec(A), vec(B)> = Re Tr(A^H B).

The iteration is an operator-splitting ADMM: a cached Cholesky solve for
the affine step, Euclidean projection onto K (eigenvalue clipping on PSD
blocks), Ruiz equilibration and adaptive step size.

Plain-text dump format (``dump_problem``)::

    SDP <num_vars> <num_rows>
    VAR <name> <kind> <side> <offset> <dim>      # one line per variable
    CONE <kind> <start> <length> [<side>]         # one line per cone block
    Q <q_0> ... <q_{n-1}>
    B <b_0> ... <b_{m-1}>
    A <nnz>
    <row> <col> <value>                           # nnz lines, zero-based
    END
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve

SQRT2 = np.sqrt(2.0)


# -- isometric vectorization ---------------------------------------------------

def sym_dim(side: int) -> int:
    return side * (side + 1) // 2


def herm_dim(side: int) -> int:
    return side * side


def svec(X) -> np.ndarray:
    X = np.asarray(X)
    side = X.shape[-1]
    iu, ju = np.triu_indices(side)
    w = np.where(iu == ju, 1.0, SQRT2)
    return np.real(X[..., iu, ju]) * w


def smat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    side = int(round((np.sqrt(8 * v.shape[-1] + 1) - 1) / 2))
    iu, ju = np.triu_indices(side)
    w = np.where(iu == ju, 1.0, 1.0 / SQRT2)
    X = np.zeros(v.shape[:-1] + (side, side))
    X[..., iu, ju] = v * w
    X[..., ju, iu] = v * w
    return X


def hvec(X) -> np.ndarray:
    X = np.asarray(X)
    side = X.shape[-1]
    iu, ju = np.triu_indices(side, 1)
    d = np.arange(side)
    return np.concatenate([np.real(X[..., d, d]), SQRT2 * np.real(X[..., iu, ju]),
                           SQRT2 * np.imag(X[..., iu, ju])], axis=-1)


def hmat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    side = int(round(np.sqrt(v.shape[-1])))
    iu, ju = np.triu_indices(side, 1)
    p = iu.size
    d = np.arange(side)
    X = np.zeros(v.shape[:-1] + (side, side), dtype=complex)
    X[..., d, d] = v[..., :side]
    off = (v[..., side:side + p] + 1j * v[..., side + p:]) / SQRT2
    X[..., iu, ju] = off
    X[..., ju, iu] = off.conj()
    return X


# -- modelling layer -------------------------------------------------------------

@dataclass(eq=False)
class Variable:
    name: str
    kind: str      # "sym", "herm" or "vec"
    side: int
    offset: int = 0

    @property
    def dim(self) -> int:
        if self.kind == "sym":
            return sym_dim(self.side)
        if self.kind == "herm":
            return herm_dim(self.side)
        return self.side

    def pack(self, X) -> np.ndarray:
        if self.kind == "sym":
            return svec(X)
        if self.kind == "herm":
            return hvec(X)
        return np.asarray(X, dtype=float)

    def unpack(self, v):
        if self.kind == "sym":
            return smat(v)
        if self.kind == "herm":
            return hmat(v)
        return np.asarray(v, dtype=float)

    def basis(self) -> np.ndarray:
        """Orthonormal basis B_i with X = sum_i x_i B_i, shaped (dim, side, side)."""
        return self.unpack(np.eye(self.dim))

    def functional(self, C) -> np.ndarray:
        """Vector c with c^T x = Re Tr(C X) for every X in the variable's domain."""
        if self.kind == "vec":
            return np.asarray(C, dtype=float)
        C = np.asarray(C)
        if self.kind == "sym":
            C = np.real(C)
            return svec(0.5 * (C + C.T))
        return hvec(0.5 * (C + C.conj().T))


@dataclass
class _Block:
    kind: str                  # "zero", "nonneg", "soc", "psd", "hpsd"
    terms: list                # [(Variable, ndarray (rows, dim))], affine expression = b + sum T x
    b: np.ndarray
    side: int = 0


class SdpProblem:
    """Builder for ``minimize <q, x>`` over vectorized variables.

    Each constraint keeps an affine expression ``F0 + sum_v T_v x_v`` that
    must lie in a cone.
    """

    def __init__(self):
        self.variables: list[Variable] = []
        self.blocks: list[_Block] = []
        self.objective: list = []
        self.constant = 0.0

    # variables
    def _add(self, var: Variable) -> Variable:
        var.offset = self.num_vars
        self.variables.append(var)
        return var

    def variable(self, side: int, hermitian: bool = False, name: str | None = None) -> Variable:
        kind = "herm" if hermitian else "sym"
        return self._add(Variable(name or f"X{len(self.variables)}", kind, side))

    def vector(self, size: int, name: str | None = None) -> Variable:
        return self._add(Variable(name or f"x{len(self.variables)}", "vec", size))

    @property
    def num_vars(self) -> int:
        return sum(v.dim for v in self.variables)

    @property
    def num_rows(self) -> int:
        return sum(blk.b.size for blk in self.blocks)

    # objective
    def minimize(self, terms, constant: float = 0.0):
        """``terms`` is a list of (Variable, coefficient vector) pairs."""
        self.objective = list(terms)
        self.constant = float(constant)

    # constraints
    def add_linear(self, terms, rhs: float, sense: str = "le"):
        """sum_v <a_v, x_v> (<= | ==) rhs."""
        rows = [(v, -np.atleast_2d(a)) for v, a in terms]
        kind = {"le": "nonneg", "eq": "zero"}[sense]
        self.blocks.append(_Block(kind, rows, np.atleast_1d(float(rhs))))

    def add_trace_le(self, terms, rhs: float):
        """sum Re Tr(C_v X_v) <= rhs for (C, Variable) pairs."""
        self.add_linear([(v, v.functional(C)) for C, v in terms], rhs)

    def add_psd(self, var: Variable):
        eye = np.eye(var.dim)
        self.blocks.append(_Block("hpsd" if var.kind == "herm" else "psd",
                                  [(var, eye)], np.zeros(var.dim), var.side))

    def add_lmi(self, F0, terms, hermitian: bool = False):
        """F0 + sum_v T_v(x_v) is PSD, T_v given as (side, side, dim_v) arrays."""
        F0 = np.asarray(F0)
        side = F0.shape[0]
        vec = hvec if hermitian else svec
        rows = []
        for var, T in terms:
            T = np.moveaxis(np.asarray(T), -1, 0)
            T = 0.5 * (T + np.swapaxes(T.conj(), -1, -2))
            rows.append((var, vec(T).T))
        self.blocks.append(_Block("hpsd" if hermitian else "psd", rows,
                                  vec(0.5 * (F0 + F0.conj().T)), side))

    def add_soc(self, terms, b):
        """Affine vector b + sum_v T_v x_v lies in the second-order cone (first entry is t)."""
        self.blocks.append(_Block("soc", [(v, np.atleast_2d(T)) for v, T in terms],
                                  np.asarray(b, dtype=float)))

    # assembly
    def assemble(self):
        n, m = self.num_vars, self.num_rows
        q = np.zeros(n)
        for var, c in self.objective:
            q[var.offset:var.offset + var.dim] += np.asarray(c, dtype=float)
        A = np.zeros((m, n))
        b = np.zeros(m)
        cones = []
        r = 0
        for blk in self.blocks:
            rows = blk.b.size
            b[r:r + rows] = blk.b
            for var, T in blk.terms:
                A[r:r + rows, var.offset:var.offset + var.dim] -= T
            cones.append((blk.kind, r, rows, blk.side))
            r += rows
        return q, A, b, cones


# -- cone projections --------------------------------------------------------------

class _PsdGroup:
    """Batched projection of same-size PSD blocks with cached vec/mat index maps."""

    def __init__(self, kind, side, idx):
        self.kind, self.side, self.idx = kind, side, idx
        herm = kind == "hpsd"
        dtype = complex if herm else float
        dim = herm_dim(side) if herm else sym_dim(side)
        # column j of B is mat(e_j); vec(X) = C^T X.ravel() for Hermitian X
        basis = (hmat if herm else smat)(np.eye(dim))
        self.to_mat = basis.reshape(dim, side * side).astype(dtype)
        self.to_vec = np.conj(self.to_mat).T
        if herm:
            self.to_vec = self.to_vec.real.copy(), self.to_vec.imag.copy()

    def project(self, vecs):
        side = self.side
        M = (vecs @ self.to_mat).reshape(-1, side, side)
        w, U = np.linalg.eigh(M)
        P = ((U * np.maximum(w, 0.0)[:, None, :]) @ np.swapaxes(U.conj(), -1, -2)).reshape(-1, side * side)
        if self.kind == "hpsd":
            re, im = self.to_vec
            return P.real @ re - P.imag @ im
        return P @ self.to_vec


class _Cones:
    def __init__(self, cones):
        self.cones = cones
        self.zero = np.concatenate([np.arange(r, r + n) for k, r, n, _ in cones if k == "zero"]
                                   or [np.zeros(0, int)])
        self.nonneg = np.concatenate([np.arange(r, r + n) for k, r, n, _ in cones
                                      if k == "nonneg"] or [np.zeros(0, int)])
        self.soc = [(r, n) for k, r, n, _ in cones if k == "soc"]
        groups = {}
        for k, r, n, side in cones:
            if k in ("psd", "hpsd"):
                groups.setdefault((k, side), []).append(np.arange(r, r + n))
        self.psd = [_PsdGroup(k, side, np.stack(idx)) for (k, side), idx in groups.items()]
        # blocks whose rows must share one scaling factor
        self.joint = [np.arange(r, r + n) for k, r, n, _ in cones if k in ("soc", "psd", "hpsd")]

    def project(self, v):
        out = v.copy()
        out[self.zero] = 0.0
        out[self.nonneg] = np.maximum(v[self.nonneg], 0.0)
        for r, n in self.soc:
            t, u = v[r], v[r + 1:r + n]
            nu = np.linalg.norm(u)
            if nu <= t:
                continue
            if nu <= -t:
                out[r:r + n] = 0.0
            else:
                a = 0.5 * (t + nu)
                out[r] = a
                out[r + 1:r + n] = a * u / nu
        for g in self.psd:
            out[g.idx] = g.project(v[g.idx])
        return out

    def rho_weights(self, m):
        w = np.ones(m)
        w[self.zero] = 1e3
        return w


# -- solver ----------------------------------------------------------------------

class SdpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass
class SdpSolution:
    status: SdpStatus
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    objective: float
    res_primal: float
    res_dual: float
    gap: float
    iterations: int
    rho: float
    variables: list = field(default_factory=list, repr=False)
    certificate: float = float("nan")

    def value(self, var: Variable):
        return var.unpack(self.x[var.offset:var.offset + var.dim])

    @property
    def ok(self) -> bool:
        return self.status == SdpStatus.OPTIMAL


def _ruiz(A, q, cones: _Cones, iters: int = 15):
    m, n = A.shape
    D = np.ones(n)
    E = np.ones(m)
    As = A.copy()
    for _ in range(iters):
        cn = np.abs(As).max(axis=0) if m else np.zeros(n)
        rn = np.abs(As).max(axis=1) if n else np.zeros(m)
        dc = 1.0 / np.sqrt(np.where(cn > 1e-12, cn, 1.0))
        dr = 1.0 / np.sqrt(np.where(rn > 1e-12, rn, 1.0))
        for idx in cones.joint:
            dr[idx] = dr[idx].mean()
        dc = np.clip(dc, 1e-4, 1e4)
        dr = np.clip(dr, 1e-4, 1e4)
        As = dr[:, None] * As * dc[None, :]
        D *= dc
        E *= dr
    qs = D * q
    qn = np.abs(qs).max() if qs.size else 0.0
    c = 1.0 / qn if qn > 1e-12 else 1.0
    return As, D, E, c


def solve(problem: SdpProblem, tol: float = 1e-7, max_iter: int = 50_000,
          warm_start: SdpSolution | None = None, rho: float = 0.1, sigma: float = 1e-6,
          alpha: float = 1.6, check_every: int = 10, adapt_every: int = 50) -> SdpSolution:
    q, A, b, cone_list = problem.assemble()
    cones = _Cones(cone_list)
    m, n = A.shape
    As, D, E, c = _ruiz(A, q, cones)
    qs = c * D * q
    bs = E * b
    rho_w = cones.rho_weights(m)

    if warm_start is not None and warm_start.x.size == n and warm_start.y.size == m:
        x = warm_start.x / D
        s = E * warm_start.s
        y = c * warm_start.y / E
        rho = warm_start.rho
    else:
        x = np.zeros(n)
        s = cones.project(bs)
        y = np.zeros(m)

    def factor(rv):
        # explicit inverse: n is small and a dense matvec beats repeated triangular solves
        K = sigma * np.eye(n) + As.T @ (rv[:, None] * As)
        return cho_solve(cho_factor(K, check_finite=False), np.eye(n), check_finite=False)

    rv = rho * rho_w
    fac = factor(rv)
    best = None
    y_prev = y.copy()
    status = SdpStatus.MAX_ITER
    stats = (np.inf, np.inf, np.inf)
    cert = float("nan")
    it = 0
    Asp = sparse.csr_matrix(As)
    AsT = sparse.csr_matrix(As.T)
    for it in range(1, max_iter + 1):
        rhs = sigma * x - qs + AsT @ (rv * (bs - s) + y)
        xt = fac @ rhs
        st = bs - Asp @ xt
        x = alpha * xt + (1 - alpha) * x
        v = alpha * st + (1 - alpha) * s
        s_new = cones.project(v + y / rv)
        y_prev = y
        y = y + rv * (v - s_new)
        s = s_new

        if it % check_every and it != max_iter:
            continue
        stats = _residuals(Asp, AsT, bs, qs, x, s, y, D, E, c)
        rp, rd, gap = stats
        if best is None or max(rp, rd, gap) < max(best[3]):
            best = (x.copy(), s.copy(), y.copy(), stats)
        if rp <= tol and rd <= tol and gap <= tol:
            status = SdpStatus.OPTIMAL
            break
        dy = (y - y_prev) / E * (1.0 / c)
        ndy = np.abs(dy).max()
        if ndy > 1e-12:
            At_dy = np.abs(A.T @ dy).max()
            bdy = b @ dy
            if At_dy <= 1e-9 * ndy and bdy > 1e-6 * ndy:
                status = SdpStatus.INFEASIBLE
                cert = float(bdy / ndy)
                break
        if it % adapt_every == 0:
            ratio = np.sqrt(max(rp, 1e-16) / max(rd, 1e-16))
            if ratio > 5 or ratio < 0.2:
                rho = float(np.clip(rho * ratio, 1e-6, 1e6))
                rv = rho * rho_w
                fac = factor(rv)

    if status == SdpStatus.MAX_ITER and best is not None:
        x, s, y, stats = best
    xu, su, yu = D * x, s / E, E * y / c
    rp, rd, gap = stats
    return SdpSolution(status=status, x=xu, s=su, y=yu, objective=float(q @ xu + problem.constant),
                       res_primal=rp, res_dual=rd, gap=gap, iterations=it, rho=rho,
                       variables=list(problem.variables), certificate=cert)


def _residuals(As, AsT, bs, qs, x, s, y, D, E, c):
    """Relative primal residual, dual residual and duality gap on unscaled data."""
    Ax = (As @ x) / E
    su = s / E
    bu = bs / E
    rp = np.abs(Ax + su - bu).max() if bu.size else 0.0
    rp /= 1.0 + max(np.abs(Ax).max(initial=0), np.abs(su).max(initial=0), np.abs(bu).max(initial=0))
    Aty = (AsT @ y) / D / c
    qu = qs / D / c
    rd = np.abs(qu - Aty).max() if qu.size else 0.0
    rd /= 1.0 + max(np.abs(qu).max(initial=0), np.abs(Aty).max(initial=0))
    yu = E * y / c
    xu = D * x
    pobj, dobj = qu @ xu, bu @ yu
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return float(rp), float(rd), float(gap)


# -- debug dump --------------------------------------------------------------------

def dump_problem(problem: SdpProblem, fh=None) -> str:
    q, A, b, cones = problem.assemble()
    out = io.StringIO()
    out.write(f"SDP {q.size} {b.size}\n")
    for v in problem.variables:
        out.write(f"VAR {v.name} {v.kind} {v.side} {v.offset} {v.dim}\n")
    for kind, r, rows, side in cones:
        out.write(f"CONE {kind} {r} {rows}" + (f" {side}" if side else "") + "\n")
    out.write("Q " + " ".join(repr(float(t)) for t in q) + "\n")
    out.write("B " + " ".join(repr(float(t)) for t in b) + "\n")
    ii, jj = np.nonzero(A)
    out.write(f"A {ii.size}\n")
    for i, j in zip(ii, jj):
        out.write(f"{i} {j} {float(A[i, j])!r}\n")
    out.write("END\n")
    text = out.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def load_dump(text: str):
    """Parse a dump back into (q, A, b, cones) arrays."""
    lines = iter(text.splitlines())
    _, n, m = next(lines).split()
    n, m = int(n), int(m)
    cones, q, b = [], np.zeros(n), np.zeros(m)
    A = np.zeros((m, n))
    for line in lines:
        tag, *rest = line.split()
        if tag == "CONE":
            side = int(rest[3]) if len(rest) > 3 else 0
            cones.append((rest[0], int(rest[1]), int(rest[2]), side))
        elif tag == "Q":
            q = np.array(rest, dtype=float)
        elif tag == "B":
            b = np.array(rest, dtype=float)
        elif tag == "A":
            for _ in range(int(rest[0])):
                i, j, val = next(lines).split()
                A[int(i), int(j)] = float(val)
        elif tag == "END":
            break
    return q, A, b, cones
