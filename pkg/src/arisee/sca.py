"""ARIS placement by successive convex approximation.

Each outer iteration rebuilds a local model of the sum-rate around the current
ARIS positions and solves it with :func:`arisee.barrier.minimize_barrier`:

* hop amplitudes ``a_n = d_Bn**(-alpha/2)`` and ``b_nk = d_nk**(-alpha/2)`` become
  slack variables tied to the positions by first-order Taylor bounds of
  ``a**(-4/alpha)``;
* the received power of stream ``l`` at UE ``k`` is ``|v_kl @ x_k|**2`` with
  ``x_k = [1, kappa*a_1*b_1k, ...]``; its quadratic form is lower-bounded by a
  tangent plane, which caps a per-UE total-power slack;
* the sum-rate is split as ``h_hat - l_hat`` (log of total power minus log of
  interference power) and ``l_hat`` is replaced by its tangent plane, which
  upper-bounds the concave function;
* pairwise separation is linearized around the previous positions.

Array directions (steering phases) are frozen at the expansion point, so a
candidate is accepted only if the exact sum-rate, recomputed from rebuilt
channels, does not decrease; otherwise the step is halved toward the previous
positions. The recorded exact objective is therefore non-decreasing.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import model
from .barrier import minimize_barrier
from .config import ScenarioConfig

LN2 = math.log(2.0)


class InfeasibleError(RuntimeError):
    """Raised when no feasible deployment exists; ``violated`` names the constraints."""

    def __init__(self, message: str, violated: list[str]):
        super().__init__(f"{message}: {', '.join(violated)}")
        self.violated = violated


@dataclass
class ScaParams:
    eps: float = 1e-4               # relative stopping tolerance on the objective
    max_iter: int = 50
    trust_radius: float = 10.0      # m, box half-width around the expansion point
    min_trust: float = 1e-3         # m
    inner_tol: float = 1e-8
    max_inner: int = 5000
    fixed_altitude: bool = True
    enforce_rate: bool = True
    max_backtracks: int = 8
    max_rejections: int = 2         # consecutive rejected steps before stopping
    restarts: int = 20


@dataclass
class SlackState:
    a: np.ndarray        # (N,) BS-ARIS amplitudes
    b: np.ndarray        # (N, K) ARIS-UE amplitudes
    r_ddot: np.ndarray   # (K,) total received power slack


@dataclass
class SurrogateModel:
    H_prime: np.ndarray       # (K, K, N+1, N+1) PSD, H'_kl = v_kl v_kl^H
    v: np.ndarray             # (K, K, N+1) stacked direct/cascaded coefficients
    h_ab: tuple               # (a, b) path-loss square roots at the expansion point
    expansion_point: dict     # copies of q, a, b, r_ddot at the expansion point
    kappa: float
    sigma2: float

    @property
    def n_ues(self) -> int:
        return self.v.shape[0]

    def stacked(self, a, b) -> np.ndarray:
        """``x_k = [1, kappa*a_n*b_nk]`` for every UE, shape ``(K, N+1)``."""
        p = self.kappa * np.asarray(a)[:, None] * np.asarray(b)
        return np.column_stack([np.ones(p.shape[1]), p.T])

    def amplitudes(self, a, b) -> np.ndarray:
        """Complex received amplitudes ``u_kl = v_kl @ x_k``, shape ``(K, K)``."""
        x = self.stacked(a, b)
        return np.einsum("kln,kn->kl", self.v, x)

    def received_powers(self, a, b) -> np.ndarray:
        return np.abs(self.amplitudes(a, b)) ** 2


@dataclass
class DcDecomposition:
    """Rate ``h_hat(P) - l_hat(P)`` in log2 units, ``P[k, l]`` = power of stream l at UE k."""

    h_hat: Callable[[np.ndarray], float]
    l_hat: Callable[[np.ndarray], float]
    grad_l_hat: Callable[[np.ndarray], np.ndarray]


@dataclass
class DeploymentSolution:
    positions: np.ndarray
    objective_trace: list = field(default_factory=list)   # exact sum-rate, bits/s
    surrogate_trace: list = field(default_factory=list)   # local model value at each solve
    iterations: int = 0
    converged: bool = False
    rate_constraint_used: list = field(default_factory=list)


# --------------------------------------------------------------------------
# surrogate pieces
# --------------------------------------------------------------------------


def hop_amplitudes(cfg: ScenarioConfig, geom: model.Geometry, q=None):
    """``(a, b)``: ``d_Bn**(-alpha/2)`` and ``d_nk**(-alpha/2)`` for positions ``q``."""
    q = geom.aris if q is None else np.asarray(q, dtype=float)
    d_bn = np.linalg.norm(q - geom.bs, axis=1)
    d_nk = np.linalg.norm(q[:, None, :] - geom.ues[None, :, :], axis=2)
    if np.any(d_bn <= 0) or np.any(d_nk <= 0):
        raise ValueError("degenerate geometry: zero link distance")
    half = cfg.path_loss_exp / 2.0
    return d_bn ** (-half), d_nk ** (-half)


def build_surrogate(cfg: ScenarioConfig, geom: model.Geometry, ch: model.ChannelRealization,
                    ris: model.RisControl, g: np.ndarray) -> SurrogateModel:
    """Local quadratic model around the current ARIS positions ``geom.aris``."""
    g = np.asarray(g, dtype=complex)
    a0, b0 = hop_amplitudes(cfg, geom)
    kappa = cfg.ref_gain
    coeff = ris.coefficients().reshape(ris.delta.shape)                  # (N, I)
    hbn_g = np.einsum("nim,lm->nil", ch.bs_aris, g)                      # (N, I, L)
    casc = np.einsum("ni,nki,nil->nkl", coeff, ch.aris_ue, hbn_g)        # (N, K, L)
    casc = casc / (kappa * a0[:, None, None] * b0[:, :, None])
    direct = ch.direct @ g.T                                             # (K, L)
    v = np.concatenate([direct[:, :, None], casc.transpose(1, 2, 0)], axis=2)
    h_prime = v[..., :, None] * np.conj(v[..., None, :])
    sur = SurrogateModel(h_prime, v, (a0, b0), {}, kappa, cfg.noise_power)
    p0 = sur.received_powers(a0, b0)
    sur.expansion_point = {"q": geom.aris.copy(), "a": a0.copy(), "b": b0.copy(),
                           "r_ddot": p0.sum(axis=1)}
    return sur


def dc_decompose(surrogate_or_sigma2, cfg: ScenarioConfig | None = None) -> DcDecomposition:
    """Concave split of the rate into total-power and interference log terms."""
    sigma2 = (surrogate_or_sigma2.sigma2 if isinstance(surrogate_or_sigma2, SurrogateModel)
              else float(surrogate_or_sigma2))

    def interference(p):
        p = np.asarray(p, dtype=float)
        return p.sum(axis=1) - np.diagonal(p)

    def h_hat(p):
        return float(np.sum(np.log2(np.asarray(p, dtype=float).sum(axis=1) + sigma2)))

    def l_hat(p):
        return float(np.sum(np.log2(interference(p) + sigma2)))

    def grad_l_hat(p):
        p = np.asarray(p, dtype=float)
        w = 1.0 / (LN2 * (interference(p) + sigma2))
        grad = np.repeat(w[:, None], p.shape[1], axis=1)
        np.fill_diagonal(grad, 0.0)
        return grad

    return DcDecomposition(h_hat, l_hat, grad_l_hat)


def surrogate_lower_bound(dc: DcDecomposition, r_ddot, r_ddot_prev) -> float:
    """``h_hat(x) - [l_hat(x') + grad l_hat(x') . (x - x')]``; a minorant of the rate."""
    r_ddot = np.asarray(r_ddot, dtype=float)
    r_ddot_prev = np.asarray(r_ddot_prev, dtype=float)
    lin = dc.l_hat(r_ddot_prev) + float(np.sum(dc.grad_l_hat(r_ddot_prev) * (r_ddot - r_ddot_prev)))
    return dc.h_hat(r_ddot) - lin


def taylor_pathloss_bound(a0: float, alpha: float) -> tuple[float, float]:
    """``(c0, c1)`` with ``a**(-4/alpha) >= c0 + c1*a`` for ``a > 0``, tight at ``a0``."""
    if not a0 > 0:
        raise ValueError("expansion amplitude must be positive")
    e = 4.0 / alpha
    f0 = a0 ** (-e)
    c1 = -e * a0 ** (-e - 1.0)
    return f0 - c1 * a0, c1


def taylor_quadratic_bound(H_prime, h_ab, h_ab_prev) -> float:
    """``-h0^T H h0 + 2 Re[h0^T H h]``: tangent-plane minorant of ``h^T H h`` for PSD ``H``."""
    H_prime = np.asarray(H_prime)
    h = np.asarray(h_ab)
    h0 = np.asarray(h_ab_prev)
    return float(np.real(-h0 @ H_prime @ h0 + 2.0 * (h0 @ H_prime @ h)))


def quadratic_form(H_prime, h_ab) -> float:
    h = np.asarray(h_ab)
    return float(np.real(h @ np.asarray(H_prime) @ h))


def linearize_separation(q_i_prev, q_j_prev, d_min: float = 1.0, rng=None):
    """Affine minorant of ``|q_i - q_j|**2`` around the previous positions.

    Returns ``(w, c, q_i_prev, q_j_prev)`` such that the minorant is
    ``w @ (q_i - q_j) + c``. Coincident previous positions are jittered.
    """
    qi = np.array(q_i_prev, dtype=float)
    qj = np.array(q_j_prev, dtype=float)
    if np.allclose(qi, qj):
        warnings.warn("coincident ARIS positions; applying jitter", RuntimeWarning)
        rng = np.random.default_rng(0) if rng is None else rng
        step = rng.standard_normal(qi.shape)
        qi = qi + step / np.linalg.norm(step) * d_min / 10.0
    diff = qi - qj
    return 2.0 * diff, -float(diff @ diff), qi, qj


def separation_value(lin, q_i, q_j) -> float:
    w, c = lin[0], lin[1]
    return float(w @ (np.asarray(q_i) - np.asarray(q_j)) + c)


# --------------------------------------------------------------------------
# convexified subproblem
# --------------------------------------------------------------------------


class _Subproblem:
    """Scaled local model; variables ``z = [q/area, a/a0, b/b0, r/r0]``."""

    def __init__(self, cfg: ScenarioConfig, geom: model.Geometry, sur: SurrogateModel,
                 params: ScaParams, trust: float):
        self.cfg = cfg
        self.geom = geom
        self.sur = sur
        self.params = params
        ep = sur.expansion_point
        self.q0 = ep["q"]
        self.a0 = ep["a"]
        self.b0 = ep["b"]
        self.n, self.k = self.b0.shape
        self.dim = 2 if params.fixed_altitude else 3
        self.scale_q = cfg.area
        self.sigma2 = sur.sigma2
        p0 = sur.received_powers(self.a0, self.b0)
        self.u0 = sur.amplitudes(self.a0, self.b0)
        self.p0 = p0
        self.i0 = p0.sum(axis=1) - np.diagonal(p0)
        self.r0 = np.maximum(p0.sum(axis=1), self.sigma2)
        self.omega = 1.0 / (LN2 * (self.i0 + self.sigma2))
        alpha = cfg.path_loss_exp
        self.ta = np.array([taylor_pathloss_bound(a, alpha) for a in self.a0])
        self.tb = np.array([[taylor_pathloss_bound(b, alpha) for b in row] for row in self.b0])
        self.pairs = [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]
        self.sep = [linearize_separation(self.q0[i, :self.dim], self.q0[j, :self.dim], cfg.d_min)
                    for i, j in self.pairs]
        lo = np.zeros(self.dim)
        hi = np.full(self.dim, cfg.area)
        if self.dim == 3:
            lo[2], hi[2] = cfg.min_altitude, cfg.max_altitude
        qv = self.q0[:, :self.dim]
        self.lb = np.maximum(lo, qv - trust)
        self.ub = np.minimum(hi, qv + trust)
        self.rate_target = cfg.r_min / cfg.bandwidth
        self.use_rate = False
        self.nq = self.n * self.dim
        self.sl_q = slice(0, self.nq)
        self.sl_a = slice(self.nq, self.nq + self.n)
        self.sl_b = slice(self.nq + self.n, self.nq + self.n + self.n * self.k)
        self.sl_r = slice(self.nq + self.n + self.n * self.k, self.nq + self.n + self.n * self.k + self.k)
        self.size = self.sl_r.stop
        self._build_affine()

    def _build_affine(self):
        """Rows ``c(z) = const + J z`` for separation, box and positivity."""
        n, dim, sq = self.n, self.dim, self.scale_q
        rows, consts = [], []
        for (i, jj), lin in zip(self.pairs, self.sep):
            w, c = lin[0], lin[1]
            j = np.zeros(self.size)
            j[i * dim:(i + 1) * dim] = -w * sq
            j[jj * dim:(jj + 1) * dim] = w * sq
            rows.append(j)
            consts.append(self.cfg.d_min ** 2 - c)
        for idx in range(self.nq):
            j = np.zeros(self.size)
            j[idx] = sq
            rows.append(j)
            consts.append(-self.ub.ravel()[idx])
            rows.append(-j)
            consts.append(self.lb.ravel()[idx])
        lo = self.sl_a.start
        scale = np.concatenate([self.a0, self.b0.ravel(), self.r0])
        for off in range(scale.size):
            j = np.zeros(self.size)
            j[lo + off] = -scale[off]
            rows.append(j)
            consts.append(0.0)
        self._affine_jac = np.array(rows)
        self._affine_const = np.array(consts)
        self.n_pairs = len(self.pairs)

    # -- unpacking -------------------------------------------------------
    def unpack(self, z):
        qv = z[self.sl_q].reshape(self.n, self.dim) * self.scale_q
        a = z[self.sl_a] * self.a0
        b = z[self.sl_b].reshape(self.n, self.k) * self.b0
        r = z[self.sl_r] * self.r0
        return qv, a, b, r

    def full_positions(self, qv):
        q = self.q0.copy()
        q[:, :self.dim] = qv
        return q

    def start(self, shrink: float = 1e-6):
        z = np.empty(self.size)
        z[self.sl_q] = (self.q0[:, :self.dim] / self.scale_q).ravel()
        z[self.sl_a] = 1.0 - shrink
        z[self.sl_b] = 1.0 - shrink
        _, a, b, _ = self.unpack(np.concatenate([z[:self.sl_r.start], np.ones(self.k)]))
        s_lin, _, _ = self._signal_minorant(a, b)
        z[self.sl_r] = np.maximum(s_lin, 0.0) * (1.0 - shrink) / self.r0
        return z

    # -- model pieces ----------------------------------------------------
    def _powers(self, a, b):
        """Powers ``P[k,l]`` and ``dP[k,l,n] = dP_kl / d(kappa a_n b_nk)``."""
        u = self.sur.amplitudes(a, b)
        dp = 2.0 * np.real(np.conj(u)[:, :, None] * self.sur.v[:, :, 1:])
        return np.abs(u) ** 2, dp

    def _signal_minorant(self, a, b):
        u = self.sur.amplitudes(a, b)
        s = np.sum(-self.p0 + 2.0 * np.real(np.conj(self.u0) * u), axis=1)
        ds = np.sum(2.0 * np.real(np.conj(self.u0)[:, :, None] * self.sur.v[:, :, 1:]), axis=1)  # (K, N)
        return s, ds, u

    def _chain_ab(self, d_kn, a, b):
        """Map ``d(.)_k / d p_nk`` (K, N) to gradients wrt scaled a and b."""
        kap = self.sur.kappa
        ga = d_kn * kap * (b * self.a0[:, None]).T
        gb = np.zeros((self.k, self.n, self.k))
        idx = np.arange(self.k)
        gb[idx, :, idx] = d_kn * kap * a[None, :] * self.b0.T
        return ga, gb.reshape(self.k, self.n * self.k)

    def interference(self, a, b):
        p, dp = self._powers(a, b)
        mask = 1.0 - np.eye(self.k)
        inter = np.sum(p * mask, axis=1)
        d_inter = np.einsum("kln,kl->kn", dp, mask)
        return inter, d_inter

    def surrogate_value(self, z) -> float:
        _, a, b, r = self.unpack(z)
        inter, _ = self.interference(a, b)
        return float(np.sum(np.log2(r + self.sigma2) - np.log2(self.i0 + self.sigma2)
                            - self.omega * (inter - self.i0)))

    def objective(self, z):
        _, a, b, r = self.unpack(z)
        inter, d_inter = self.interference(a, b)
        f = -float(np.sum(np.log2(r + self.sigma2) - self.omega * inter))
        grad = np.zeros(self.size)
        ga, gb = self._chain_ab(d_inter * self.omega[:, None], a, b)
        grad[self.sl_a] = ga.sum(axis=0)
        grad[self.sl_b] = gb.sum(axis=0)
        grad[self.sl_r] = -self.r0 / ((r + self.sigma2) * LN2)
        return f, grad

    def constraints(self, z):
        qv, a, b, r = self.unpack(z)
        q = self.full_positions(qv)
        n, k, dim, sq = self.n, self.k, self.dim, self.scale_q
        blocks_v: list[np.ndarray] = []
        blocks_j: list[np.ndarray] = []

        # total received power slack under its tangent-plane minorant
        s_lin, ds, _ = self._signal_minorant(a, b)
        ga, gb = self._chain_ab(ds, a, b)
        j = np.zeros((k, self.size))
        j[:, self.sl_a] = -ga
        j[:, self.sl_b] = -gb
        j[np.arange(k), self.sl_r.start + np.arange(k)] = self.r0
        blocks_v.append(r - s_lin)
        blocks_j.append(j)

        # BS-ARIS hop: |q_n - q_B|^2 <= c0 + c1 a_n
        diff = q - self.geom.bs
        j = np.zeros((n, self.size))
        for i in range(n):
            j[i, i * dim:(i + 1) * dim] = 2.0 * diff[i, :dim] * sq
        j[np.arange(n), self.sl_a.start + np.arange(n)] = -self.ta[:, 1] * self.a0
        blocks_v.append(np.sum(diff ** 2, axis=1) - self.ta[:, 0] - self.ta[:, 1] * a)
        blocks_j.append(j)

        # ARIS-UE hop: |q_n - q_k|^2 <= c0 + c1 b_nk
        diff = q[:, None, :] - self.geom.ues[None, :, :]
        j = np.zeros((n * k, self.size))
        for i in range(n):
            j[i * k:(i + 1) * k, i * dim:(i + 1) * dim] = 2.0 * diff[i, :, :dim] * sq
        j[np.arange(n * k), self.sl_b.start + np.arange(n * k)] = -(self.tb[:, :, 1] * self.b0).ravel()
        blocks_v.append((np.sum(diff ** 2, axis=2) - self.tb[:, :, 0] - self.tb[:, :, 1] * b).ravel())
        blocks_j.append(j)

        # linearized separation, box and positivity: affine, Jacobian cached
        blocks_v.append(self._affine_const + self._affine_jac @ z)
        blocks_j.append(self._affine_jac)

        # per-UE rate requirement on the surrogate rate
        if self.use_rate:
            inter, d_inter = self.interference(a, b)
            ga_i, gb_i = self._chain_ab(d_inter * self.omega[:, None], a, b)
            with np.errstate(invalid="ignore", divide="ignore"):
                rate = (np.log2(r + self.sigma2) - np.log2(self.i0 + self.sigma2)
                        - self.omega * (inter - self.i0))
            rate = np.where(np.isfinite(rate), rate, -np.inf)
            j = np.zeros((k, self.size))
            j[:, self.sl_a] = ga_i
            j[:, self.sl_b] = gb_i
            j[np.arange(k), self.sl_r.start + np.arange(k)] = -self.r0 / (np.abs(r + self.sigma2) * LN2)
            blocks_v.append(self.rate_target - rate)
            blocks_j.append(j)
        return np.concatenate(blocks_v), np.vstack(blocks_j)


def solve_convex_subproblem(cfg: ScenarioConfig, geom: model.Geometry, sur: SurrogateModel,
                            params: ScaParams | None = None, trust: float | None = None):
    """Solve the local model; returns ``(q, SlackState, surrogate_value, used_rate)``."""
    params = params or ScaParams()
    trust = params.trust_radius if trust is None else trust
    sp = _Subproblem(cfg, geom, sur, params, trust)
    z0 = sp.start()
    c0, _ = sp.constraints(z0)
    if np.any(c0 >= 0):
        raise InfeasibleError("expansion point is not strictly feasible",
                              _violated_names(sp, c0))
    if params.enforce_rate:
        sp.use_rate = True
        c_rate, _ = sp.constraints(z0)
        if np.any(c_rate >= 0):
            sp.use_rate = False
    res = minimize_barrier(sp.objective, sp.constraints, z0, tol=params.inner_tol,
                           max_inner=params.max_inner)
    qv, a, b, r = sp.unpack(res.z)
    return sp.full_positions(qv), SlackState(a, b, r), sp.surrogate_value(res.z), sp.use_rate


def _violated_names(sp: _Subproblem, c: np.ndarray) -> list[str]:
    names = (["power_slack"] * sp.k + ["bs_hop"] * sp.n + ["ue_hop"] * (sp.n * sp.k)
             + ["separation"] * len(sp.pairs) + ["box"] * (2 * sp.nq))
    names += ["positivity"] * (len(c) - len(names))
    return sorted({nm for nm, v in zip(names, c) if v >= 0})


# --------------------------------------------------------------------------
# outer loop
# --------------------------------------------------------------------------


def exact_sum_rate(cfg, geom, fading, ris, g, q) -> float:
    ch = model.build_channels(cfg, geom.with_aris(q), fading)
    return model.sum_rate(cfg, ch, ris, g)


def separation_ok(q, d_min: float) -> bool:
    sq = model.pairwise_sq_distances(q)
    return bool(np.all(sq > d_min ** 2)) if sq.size else True


def feasible_start(cfg: ScenarioConfig, geom: model.Geometry, rng=None, restarts: int = 20):
    """Return ``geom.aris`` if separated, else a random separated placement."""
    if separation_ok(geom.aris, cfg.d_min):
        return geom.aris.copy()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = geom.aris.shape[0]
    for _ in range(restarts):
        try:
            q = model.random_placement(rng, cfg, n, max_tries=200)
        except RuntimeError:
            continue
        q[:, 2] = geom.aris[:, 2]
        if separation_ok(q, cfg.d_min):
            return q
    raise InfeasibleError("no feasible initial deployment", ["separation"])


def sca_iterate(cfg: ScenarioConfig, geom: model.Geometry, fading: model.FadingDraws,
                ris: model.RisControl, g: np.ndarray, params: ScaParams | None = None,
                rng=None) -> DeploymentSolution:
    """Iterate local solves until the exact sum-rate stalls or the cap is hit."""
    params = params or ScaParams()
    q = feasible_start(cfg, geom, rng, params.restarts)
    obj = exact_sum_rate(cfg, geom, fading, ris, g, q)
    sol = DeploymentSolution(positions=q.copy(), objective_trace=[obj])
    trust = params.trust_radius
    rejections = 0
    for it in range(params.max_iter):
        cur = geom.with_aris(q)
        ch = model.build_channels(cfg, cur, fading)
        sur = build_surrogate(cfg, cur, ch, ris, g)
        q_new, _, sval, used_rate = solve_convex_subproblem(cfg, cur, sur, params, trust)
        sol.surrogate_trace.append(sval)
        sol.rate_constraint_used.append(used_rate)
        accepted = False
        step = 1.0
        for _ in range(params.max_backtracks + 1):
            cand = q + step * (q_new - q)
            if separation_ok(cand, cfg.d_min):
                val = exact_sum_rate(cfg, geom, fading, ris, g, cand)
                if val >= obj:
                    accepted = True
                    break
            step *= 0.5
        sol.iterations = it + 1
        if not accepted:
            sol.objective_trace.append(obj)
            trust *= 0.5
            rejections += 1
            if trust < params.min_trust or rejections >= params.max_rejections:
                sol.converged = True
                break
            continue
        rejections = 0
        prev = obj
        q, obj = cand, val
        sol.objective_trace.append(obj)
        if abs(obj - prev) <= params.eps * max(abs(prev), 1e-300):
            sol.converged = True
            break
    sol.positions = q
    return sol
