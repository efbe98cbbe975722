"""Numerical kernels shared across the package: Euclidean simplex
projection, seeded k-means, a Gram-route truncated SVD, and an augmented
Lagrangian solver for simplex-constrained quadratic programs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "project_simplex",
    "project_rows_onto_simplex",
    "kmeans",
    "truncated_svd",
    "SimplexQP",
    "ALMState",
    "QPConvergenceError",
    "solve_simplex_qp",
    "solve_simplex_qp_rows",
    "kkt_residual",
]


# ---------------------------------------------------------------------------
# simplex projection

def project_rows_onto_simplex(mat):
    """Project every row of ``mat`` onto the probability simplex.

    Sort-and-threshold closed form: with u the row sorted descending and
    rho the largest k such that u_k + (1 - sum_{i<=k} u_i)/k > 0, the
    projection is max(v - theta, 0) with theta = (sum_{i<=rho} u_i - 1)/rho.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[1] == 0:
        raise ValueError("expected a nonempty 2-d array")
    if not np.all(np.isfinite(mat)):
        raise ValueError("non-finite input")
    n, m = mat.shape
    u = np.sort(mat, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1)
    k = np.arange(1, m + 1)
    # the condition holds for a prefix of k; its length is rho >= 1
    rho = np.count_nonzero(u + (1.0 - css) / k > 0.0, axis=1)
    theta = (css[np.arange(n), rho - 1] - 1.0) / rho
    return np.maximum(mat - theta[:, None], 0.0)


def project_simplex(v):
    """Euclidean projection of a vector onto {x : x >= 0, sum x = 1}."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    return project_rows_onto_simplex(v[None, :])[0]


# ---------------------------------------------------------------------------
# k-means

def _sqdist(a, b):
    # squared Euclidean distances between rows of a and rows of b
    d2 = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    idx = int(rng.integers(n))
    centers[0] = x[idx]
    chosen[idx] = True
    closest = _sqdist(x, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            idx = min(idx, n - 1)
        else:
            # duplicated points: fall back to the first unchosen index
            idx = int(np.flatnonzero(~chosen)[0])
        centers[j] = x[idx]
        chosen[idx] = True
        closest = np.minimum(closest, _sqdist(x, centers[j : j + 1])[:, 0])
    return centers


def _lloyd(x, k, rng, max_iter):
    n = x.shape[0]
    centers = _kmeanspp(x, k, rng)
    assign = None
    trace = []
    for _ in range(max_iter):
        d2 = _sqdist(x, centers)
        new_assign = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new_assign == j):
                owned = d2[np.arange(n), new_assign]
                far = int(np.argmax(owned))
                centers[j] = x[far]
                new_assign[far] = j
                d2[:, j] = _sqdist(x, centers[j : j + 1])[:, 0]
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            centers[j] = x[assign == j].mean(axis=0)
        trace.append(float(((x - centers[assign]) ** 2).sum()))
    return centers, assign, trace


def kmeans(points, k, seed=0, max_iter=100, n_init=10, sse_trace=None):
    """Seeded k-means on column-sample data.

    Parameters
    ----------
    points : (d, n) array, samples are columns.
    k : number of clusters, 1 <= k <= n.
    seed : int, drives k-means++ initialization; runs are deterministic
        per seed.
    max_iter : Lloyd iteration cap per restart; iteration also stops at an
        assignment fixpoint.
    n_init : independent k-means++ restarts; the lowest-SSE run wins.
    sse_trace : optional list; when given, the winning run's within-cluster
        SSE after each Lloyd update is appended (non-increasing).

    Returns
    -------
    centers : (d, k) array.
    assignments : (n,) int array.

    Empty clusters are repaired by seizing the point farthest from its
    current center. Ties in assignment go to the lowest center index.
    """
    x = np.asarray(points, dtype=float).T  # n x d
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, n={n}]")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers, assign, trace = _lloyd(x, k, rng, max_iter)
        sse = trace[-1] if trace else float(((x - centers[assign]) ** 2).sum())
        if best is None or sse < best[0]:
            best = (sse, centers, assign, trace)
    _, centers, assign, trace = best
    if sse_trace is not None:
        sse_trace.extend(trace)
    return centers.T.copy(), assign


# ---------------------------------------------------------------------------
# truncated SVD via the m x m Gram matrix

def _complete_basis(u, missing):
    # fill columns `missing` of u with orthonormal vectors orthogonal to the
    # existing ones, drawn from canonical directions (deterministic)
    n = u.shape[0]
    built = [u[:, j].copy() for j in np.flatnonzero(~missing)]
    probe = 0
    for col in np.flatnonzero(missing):
        while True:
            cand = np.zeros(n)
            cand[probe % n] = 1.0
            probe += 1
            for b in built:
                cand -= (b @ cand) * b
            nrm = np.linalg.norm(cand)
            if nrm > 0.5:
                cand /= nrm
                u[:, col] = cand
                built.append(cand)
                break


def truncated_svd(mat, c):
    """Rank-c truncated SVD of an (n, m) matrix with m <= n.

    Computed through the m x m Gram matrix M^T M: eigendecompose, keep the c
    largest eigenpairs, set sigma = sqrt(eigenvalue) and back-substitute
    U = M V / sigma. The Gram route cannot resolve singular values below
    sigma_max * sqrt(eps) (the eigenvalue is roundoff), so columns with
    sigma <= max(1e-12, 1e-7 * sigma_max) are completed to an orthonormal
    basis instead of divided. A final symmetric polish keeps U^T U = I to
    machine precision without disturbing the U/V pairing.

    Returns (U, sigma, V) with U (n, c), sigma (c,) descending, V (m, c).
    """
    mat = np.asarray(mat, dtype=float)
    n, m = mat.shape
    if c > m:
        raise ValueError(f"c={c} exceeds column count m={m}")
    if m > n:
        raise ValueError("expected m <= n (tall or square input)")
    gram = mat.T @ mat
    w, vecs = np.linalg.eigh(gram)
    order = np.argsort(w)[::-1][:c]
    sigma = np.sqrt(np.clip(w[order], 0.0, None))
    v = vecs[:, order]
    u = np.zeros((n, c))
    ok = sigma > max(1e-12, 1e-7 * float(sigma[0])) if sigma.size else sigma > 0
    if np.any(ok):
        u[:, ok] = (mat @ v[:, ok]) / sigma[ok]
    if not np.all(ok):
        _complete_basis(u, ~ok)
    # Loewdin polish: U (U^T U)^{-1/2}
    wtw = u.T @ u
    if np.abs(wtw - np.eye(c)).max() > 1e-14:
        ew, ev = np.linalg.eigh(wtw)
        u = u @ (ev / np.sqrt(np.clip(ew, 1e-30, None))) @ ev.T
    return u, sigma, v


# ---------------------------------------------------------------------------
# simplex-constrained QP: min_x x^T H x - x^T f  s.t. x >= 0, sum x = 1

@dataclass
class SimplexQP:
    """Quadratic program min x^T H x - x^T f over the probability simplex.

    H must be symmetric positive semi-definite. Note the sign convention:
    a problem stated as min z H z^T + z fbar maps to f = -fbar here.
    """

    H: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.H.ndim != 2 or self.H.shape[0] != self.H.shape[1]:
            raise ValueError("H must be square")
        if self.f.shape != (self.H.shape[0],):
            raise ValueError("f length must match H")
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.f))):
            raise ValueError("non-finite QP data")
        if np.abs(self.H - self.H.T).max() > 1e-10:
            raise ValueError("H must be symmetric")


@dataclass
class ALMState:
    """One sweep of the augmented Lagrangian iteration (for observers)."""

    x: np.ndarray
    rho: np.ndarray
    eta: np.ndarray
    mu: float


class QPConvergenceError(RuntimeError):
    pass


def _check_psd(H):
    w = np.linalg.eigvalsh(H)
    if w[0] < -1e-8:
        raise ValueError(f"H is not positive semi-definite (lambda_min={w[0]:.3e})")
    return w


def _kkt_rows(H, F, X, active_tol=1e-9):
    # max KKT violation per row; see kkt_residual for the definition
    g = 2.0 * (X @ H) - F
    sup = X > active_tol
    lam = (g * sup).sum(axis=1) / np.maximum(sup.sum(axis=1), 1)
    r = np.where(sup, np.abs(g - lam[:, None]), 0.0).max(axis=1)
    r = np.maximum(r, np.where(sup, 0.0, np.maximum(lam[:, None] - g, 0.0)).max(axis=1))
    r = np.maximum(r, np.abs(X.sum(axis=1) - 1.0))
    return np.maximum(r, np.maximum(-X, 0.0).max(axis=1))


def _support_kkt_point(H, f, idx):
    # equality-constrained minimizer restricted to the support idx:
    # [2 H_SS, -1; 1^T, 0] [x_S; lam] = [f_S; 1], i.e. 2 H x - f = lam on S
    s = len(idx)
    K = np.zeros((s + 1, s + 1))
    K[:s, :s] = 2.0 * H[np.ix_(idx, idx)]
    K[:s, s] = -1.0
    K[s, :s] = 1.0
    rhs = np.append(f[idx], 1.0)
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = None
    if sol is None or not np.all(np.isfinite(sol)):
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:s], float(sol[s])


def _polish_active_set(H, f, x):
    """Finish a nearly-converged simplex QP exactly.

    Guess the active set from x, solve the equality-constrained KKT system
    on the support, then pivot: drop the most negative primal coordinate or
    add the most violated dual one. Returns the KKT point, or None when
    pivoting cycles or exhausts its budget (caller re-checks the residual
    either way).
    """
    m = H.shape[0]
    sup = set(np.flatnonzero(x > 1e-9).tolist())
    if not sup:
        sup = {int(np.argmin(np.diag(H) - f))}
    seen = set()
    for _ in range(3 * m + 30):
        key = frozenset(sup)
        if key in seen:
            return None
        seen.add(key)
        idx = sorted(sup)
        xs, lam = _support_kkt_point(H, f, idx)
        neg = int(np.argmin(xs))
        if xs[neg] < -1e-12:
            sup.discard(idx[neg])
            if not sup:
                return None
            continue
        full = np.zeros(m)
        full[idx] = np.maximum(xs, 0.0)
        g = 2.0 * H @ full - f
        off = np.setdiff1d(np.arange(m), idx, assume_unique=True)
        if off.size:
            nu = g[off] - lam
            j = int(np.argmin(nu))
            if nu[j] < -1e-10 * max(1.0, float(np.abs(g).max())):
                sup.add(int(off[j]))
                continue
        return full
    return None


def solve_simplex_qp_rows(H, F, x0, tol=1e-8, max_iter=1000, kkt_tol=1e-6,
                          polish=True, sweep_hook=None):
    """Solve min_x x H x^T - x f^T over the simplex for every row at once.

    All rows share the same H; F stacks one f per row. The split-variable
    augmented Lagrangian alternates a closed-form rho step, a simplex
    projection x step, and the multiplier update eta += mu (x - rho) with
    mu doubled up to a cap of max(2, 2.05 * lambda_max(H)); past the cap
    the fixed-penalty iteration contracts linearly toward the KKT point.
    Per row, the best iterate by QP objective (warm start included) is
    kept, which also makes warm-started solves monotone.

    ||x - rho||_inf < tol is only the sweep stopping rule; what callers
    rely on is the returned KKT residual, so every row is gated on
    kkt_tol at exit. Rows over the gate (ill-conditioned H makes the
    sweeps crawl along flat directions) are finished by an exact
    active-set solve on the identified support when ``polish`` is on.

    Raises QPConvergenceError when some row still exceeds kkt_tol after
    the sweeps and, if enabled, the polish.
    """
    H = np.asarray(H, dtype=float)
    F = np.asarray(F, dtype=float)
    w = _check_psd(H)
    mu_cap = min(max(2.0, 2.05 * float(w[-1])), 1e12)
    x = project_rows_onto_simplex(x0)
    eta = np.zeros_like(x)
    mu = 2.0

    def row_obj(z):
        return np.einsum("ij,ij->i", z @ H, z) - np.einsum("ij,ij->i", z, F)

    best = x.copy()
    best_obj = row_obj(x)
    sweeps = 0
    for _ in range(max_iter):
        sweeps += 1
        rho = x + (eta - x @ H) / mu
        x = project_rows_onto_simplex(rho - (eta + rho @ H - F) / mu)
        if sweep_hook is not None:
            sweep_hook(x, rho, eta, mu)
        eta = eta + mu * (x - rho)
        obj = row_obj(x)
        gain = obj < best_obj
        best[gain] = x[gain]
        best_obj = np.minimum(best_obj, obj)
        mu = min(2.0 * mu, mu_cap)
        if np.abs(x - rho).max() < tol:
            break
    residuals = _kkt_rows(H, F, best)
    for i in np.flatnonzero(residuals > kkt_tol):
        xi = _polish_active_set(H, F[i], best[i]) if polish else None
        ri = _kkt_rows(H, F[i : i + 1], xi[None, :])[0] if xi is not None else residuals[i]
        if ri > kkt_tol:
            raise QPConvergenceError(
                f"row {i}: KKT residual {ri:.3e} exceeds {kkt_tol:g} after "
                f"{sweeps} sweeps" + (" and active-set polish" if polish else "")
            )
        best[i] = xi
    return best


def solve_simplex_qp(qp, x0, tol=1e-8, max_iter=1000, kkt_tol=1e-6,
                     polish=True, callback=None):
    """Solve a SimplexQP from the starting point ``x0``.

    Thin single-vector wrapper around solve_simplex_qp_rows. ``callback``,
    when given, receives an ALMState after each x step (before the
    multiplier update).
    """
    x0 = np.asarray(x0, dtype=float)
    hook = None
    if callback is not None:
        def hook(x, rho, eta, mu):
            callback(ALMState(x=x[0].copy(), rho=rho[0].copy(), eta=eta[0].copy(), mu=mu))
    out = solve_simplex_qp_rows(qp.H, qp.f[None, :], x0[None, :], tol=tol,
                                max_iter=max_iter, kkt_tol=kkt_tol,
                                polish=polish, sweep_hook=hook)
    return out[0]


def kkt_residual(qp, x, active_tol=1e-9):
    """Max KKT violation of ``x`` for the simplex QP.

    With g = 2 H x - f and lambda the mean gradient over the support, the
    residual collects stationarity on the support, dual feasibility off it,
    and primal feasibility of the simplex constraints.
    """
    x = np.asarray(x, dtype=float)
    return float(_kkt_rows(qp.H, qp.f[None, :], x[None, :], active_tol)[0])
