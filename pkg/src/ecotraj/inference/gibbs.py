"""Polya-Gamma augmented Gibbs sampler for the latent-trajectory model.

Given the augmentation variables every binomial factor becomes a Gaussian
pseudo-observation of ``eta`` with precision ``omega`` and linear term
``kappa``, so the whole linear layer is conditionally Gaussian.

Because only the start and end years are observed, the likelihood depends on
the annual plot and subplot effects only through their interval totals.  The
sampler therefore works with the totals directly:

* ``Xi_i = sum_t xi_it`` is Gaussian across plots with covariance
  ``sigma2_xi * (exp(-D/phi) * overlap)``, ``overlap_ij`` being the number of
  years the two intervals share;
* ``E_i = sum_t eps_it`` is sum-zero ICAR with variance ``T_i * sigma2_eps``,
  parametrised by coordinates ``u_i`` in the eigenbasis of ``R - W`` so the
  constraint holds exactly.

Per latent dimension k one joint Gaussian draw covers (alpha_k, beta_k, Xi_k)
and all (zeta_i, u_i): the per-plot blocks are eliminated with a Schur
complement, the global block is drawn from its marginal and the plot blocks
from their conditionals.  Annual effects, when requested, are then drawn
from their conditional given the totals by kriging.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ..errors import ConfigError, DataError, NumericalError
from ..polyagamma import pg_draw
from ..spatial import sample_constrained_icar
from ..stickbreak import successes_from_codes, trials_from_codes
from ..trajectory import LatentField, StudyDesign, TrajectoryParams, draw_annual_eps, draw_annual_xi
from .slice import slice_sample

_JITTER = 1e-10


@dataclass
class Priors:
    """Hyperparameters; inverse-gamma priors are (shape, scale)."""

    alpha_mean: float = 0.0
    alpha_var: float = 100.0
    beta_mean: float = 0.0
    beta_var: float = 100.0
    zeta_shape: float = 2.0
    zeta_scale: float = 1.0
    xi_shape: float = 2.0
    xi_scale: float = 1.0
    eps_shape: float = 2.0
    eps_scale: float = 1.0
    phi_lower: float | None = None
    phi_upper: float | None = None

    def __post_init__(self):
        for f in dc_fields(self):
            v = getattr(self, f.name)
            if f.name.endswith(("_var", "_shape", "_scale")) and not v > 0:
                raise ConfigError(f"prior {f.name} must be positive, got {v}")

    def phi_bounds(self, design: StudyDesign) -> tuple[float, float]:
        upper = design.phi_max if self.phi_upper is None else float(self.phi_upper)
        if not upper > 0:
            raise ConfigError("phi upper bound is zero (all plots coincide); set priors.phi_upper")
        lower = 1e-3 * upper if self.phi_lower is None else float(self.phi_lower)
        if not 0 < lower < upper:
            raise ConfigError(f"invalid phi bounds ({lower}, {upper}]")
        return lower, upper


@dataclass
class McmcConfig:
    iterations: int = 10000
    burn_in: int = 2000
    thin: int = 1
    chains: int = 1
    seed: int = 0
    store_annual: bool = False
    use_likelihood: bool = True
    collapsed: bool = False
    interweave: bool = True

    def __post_init__(self):
        if self.iterations < 0 or not 0 <= self.burn_in <= self.iterations:
            raise ConfigError("need 0 <= burn_in <= iterations")
        if self.thin < 1 or self.chains < 1:
            raise ConfigError("thin and chains must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class PairedStates:
    """Observed 0-based state codes at the start and end of each interval."""

    y_start: np.ndarray
    y_end: np.ndarray
    n_states: int

    def __post_init__(self):
        self.y_start = np.asarray(self.y_start, dtype=int)
        self.y_end = np.asarray(self.y_end, dtype=int)
        for y in (self.y_start, self.y_end):
            if y.min(initial=0) < 0 or y.max(initial=0) >= self.n_states:
                raise DataError(f"state codes must lie in 0..{self.n_states - 1}")


@dataclass
class AugmentationState:
    """Polya-Gamma variables and kappa for the start and end observations.

    Entries with zero trials carry omega = kappa = 0 and are never sampled.
    """

    trials_start: np.ndarray
    trials_end: np.ndarray
    kappa_start: np.ndarray
    kappa_end: np.ndarray
    omega_start: np.ndarray
    omega_end: np.ndarray

    @classmethod
    def from_states(cls, states: PairedStates) -> "AugmentationState":
        k = states.n_states
        n0 = trials_from_codes(states.y_start, k)
        n1 = trials_from_codes(states.y_end, k)
        kap0 = successes_from_codes(states.y_start, k) - n0 / 2.0
        kap1 = successes_from_codes(states.y_end, k) - n1 / 2.0
        return cls(n0, n1, kap0, kap1, np.zeros(n0.shape), np.zeros(n1.shape))


@dataclass
class ChainState:
    params: TrajectoryParams
    fields: LatentField
    omega: AugmentationState
    iteration: int = 0


@dataclass
class PosteriorSamples:
    """Retained draws in iteration order (chains concatenated)."""

    alpha: np.ndarray
    beta: np.ndarray
    sigma2_zeta: np.ndarray
    sigma2_xi: np.ndarray
    sigma2_eps: np.ndarray
    phi: np.ndarray
    eta0: np.ndarray
    delta: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    burn_in: int = 0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(self.iteration)

    @property
    def n_chains(self) -> int:
        return len(np.unique(self.chain)) if self.n_draws else 0

    def scalar_columns(self) -> dict[str, np.ndarray]:
        """Parameter columns named ``alpha[p][k]`` (p from 0, k = state from 1) etc."""
        cols = {}
        for name, arr in (("alpha", self.alpha), ("beta", self.beta)):
            for p in range(arr.shape[1]):
                for k in range(arr.shape[2]):
                    cols[f"{name}[{p}][{k + 1}]"] = arr[:, p, k]
        for name in ("sigma2_zeta", "sigma2_xi", "sigma2_eps", "phi"):
            cols[name] = getattr(self, name)
        return cols

    def by_chain(self, values: np.ndarray) -> np.ndarray:
        """Reshape a (n_draws,) column into (n_chains, draws_per_chain)."""
        ids = np.unique(self.chain)
        return np.stack([values[self.chain == c] for c in ids])

    @classmethod
    def concat(cls, parts: list["PosteriorSamples"]) -> "PosteriorSamples":
        arrays = {name: np.concatenate([getattr(p, name) for p in parts])
                  for name in ("alpha", "beta", "sigma2_zeta", "sigma2_xi", "sigma2_eps", "phi",
                               "eta0", "delta", "chain", "iteration")}
        return cls(**arrays, burn_in=parts[0].burn_in, seed=parts[0].seed, meta=dict(parts[0].meta))


def _inv_gamma(shape, scale, rng):
    return scale / rng.gamma(shape)


class GibbsSampler:
    """Deterministic-scan sampler: omega, linear layer, variances, phi.

    ``config.interweave`` appends rescaling moves of the variances and phi
    along the standardised effects (on by default).  ``config.collapsed``
    inserts, between omega and the linear layer, slice updates of the same
    hyperparameters from their density given omega alone.  Every step leaves
    the posterior invariant.
    """

    def __init__(self, design: StudyDesign, states: PairedStates, priors: Priors | None = None,
                 config: McmcConfig | None = None):
        self.design = design
        self.states = states
        self.priors = priors or Priors()
        self.config = config or McmcConfig()
        if states.y_start.shape != (design.n_plots, design.n_subplots):
            raise DataError(f"observations have shape {states.y_start.shape}, design expects "
                            f"({design.n_plots}, {design.n_subplots})")
        self.k1 = states.n_states - 1
        self.phi_bounds = self.priors.phi_bounds(design)
        self._prepare()

    # ------------------------------------------------------------------ setup
    def _prepare(self):
        d = self.design
        n_i, n_s = d.n_plots, d.n_subplots
        H, X = d.h, d.x_sum
        self.ph, self.px = H.shape[-1], X.shape[-1]
        self.n_global = self.ph + self.px + n_i
        self.n_local = 2 * n_s - 1
        self.basis = d.icar.basis
        self.lam = d.icar.eigvals
        self.T = d.durations.astype(float)

        a0 = np.zeros((n_i, n_s, self.n_global))
        a0[..., :self.ph] = H
        a1 = a0.copy()
        a1[..., self.ph:self.ph + self.px] = X[:, None, :]
        a1[np.arange(n_i), :, self.ph + self.px + np.arange(n_i)] = 1.0
        self.a0, self.a1 = a0, a1
        z0 = np.hstack([np.eye(n_s), np.zeros((n_s, n_s - 1))])
        z1 = np.hstack([np.eye(n_s), self.basis])
        self.z0, self.z1 = z0, z1
        self.outer_g0 = np.einsum("isg,ish->isgh", a0, a0)
        self.outer_g1 = np.einsum("isg,ish->isgh", a1, a1)
        self.cross0 = np.einsum("isg,sl->isgl", a0, z0)
        self.cross1 = np.einsum("isg,sl->isgl", a1, z1)
        self.outer_l0 = np.einsum("sl,sm->slm", z0, z0)
        self.outer_l1 = np.einsum("sl,sm->slm", z1, z1)

        self.corr_base = np.exp(-d.D / 1.0)  # replaced per phi
        self._phi_cache = None

    def _corr(self, phi):
        """Cholesky factor and inverse of the interval-total correlation at ``phi``."""
        if self._phi_cache is not None and self._phi_cache[0] == phi:
            return self._phi_cache[1:]
        d = self.design
        g = np.exp(-d.D / phi) * d.overlap
        g[np.diag_indices_from(g)] += _JITTER * d.overlap.diagonal()
        chol = np.linalg.cholesky(g)
        inv = cho_solve((chol, True), np.eye(len(g)))
        self._phi_cache = (phi, chol, inv)
        return chol, inv

    def initial_state(self) -> ChainState:
        d, k1 = self.design, self.k1
        p = self.priors
        ig_mean = lambda a, b: b / (a - 1.0) if a > 1 else b  # noqa: E731
        lo, hi = self.phi_bounds
        params = TrajectoryParams(
            alpha=np.zeros((self.ph, k1)), beta=np.zeros((self.px, k1)),
            sigma2_zeta=ig_mean(p.zeta_shape, p.zeta_scale),
            sigma2_xi=ig_mean(p.xi_shape, p.xi_scale),
            sigma2_eps=ig_mean(p.eps_shape, p.eps_scale),
            phi=0.5 * (lo + hi))
        zeros = np.zeros((d.n_plots, d.n_subplots, k1))
        fields = LatentField(eta0=zeros.copy(), zeta=zeros.copy(), delta_total=zeros.copy(),
                             xi_total=np.zeros((d.n_plots, k1)), eps_total=zeros.copy())
        return ChainState(params, fields, AugmentationState.from_states(self.states))

    # ---------------------------------------------------------------- updates
    def update_omega(self, state: ChainState, rng) -> AugmentationState:
        aug = state.omega
        if not self.config.use_likelihood:
            return aug
        f = state.fields
        aug.omega_start = pg_draw(aug.trials_start, f.eta0, rng)
        aug.omega_end = pg_draw(aug.trials_end, f.eta_end, rng)
        self._check(state, "omega", aug.omega_start, aug.omega_end)
        return aug

    def _data_terms(self, state: ChainState):
        """Precision and linear terms of the linear layer that depend only on omega."""
        d, pr = self.design, self.priors
        aug = state.omega
        n_i, n_s, k1 = d.n_plots, d.n_subplots, self.k1
        ph, px = self.ph, self.px
        if self.config.use_likelihood:
            w0 = np.moveaxis(aug.omega_start, -1, 0)       # (k, i, s)
            w1 = np.moveaxis(aug.omega_end, -1, 0)
            c0 = np.moveaxis(aug.kappa_start, -1, 0)
            c1 = np.moveaxis(aug.kappa_end, -1, 0)
        else:
            w0 = w1 = c0 = c1 = np.zeros((k1, n_i, n_s))

        p_gg = (np.einsum("kis,isgh->kgh", w0, self.outer_g0)
                + np.einsum("kis,isgh->kgh", w1, self.outer_g1))
        p_gl = (np.einsum("kis,isgl->kigl", w0, self.cross0)
                + np.einsum("kis,isgl->kigl", w1, self.cross1))
        p_ll = (np.einsum("kis,slm->kilm", w0, self.outer_l0)
                + np.einsum("kis,slm->kilm", w1, self.outer_l1))
        b_g = np.einsum("kis,isg->kg", c0, self.a0) + np.einsum("kis,isg->kg", c1, self.a1)
        b_l = c0 @ self.z0 + c1 @ self.z1                     # (k, i, l)

        idx_a, idx_b = np.arange(ph), np.arange(ph, ph + px)
        p_gg[:, idx_a, idx_a] += 1.0 / pr.alpha_var
        p_gg[:, idx_b, idx_b] += 1.0 / pr.beta_var
        b_g[:, :ph] += pr.alpha_mean / pr.alpha_var
        b_g[:, ph:ph + px] += pr.beta_mean / pr.beta_var
        self._check(state, "linear", p_gg, p_ll, b_g, b_l)
        return p_gg, p_gl, p_ll, b_g, b_l

    def _local_prior(self, sigma2_zeta, sigma2_eps):
        n_s = self.design.n_subplots
        diag_l = np.empty((self.design.n_plots, self.n_local))
        diag_l[:, :n_s] = 1.0 / sigma2_zeta
        diag_l[:, n_s:] = self.lam[None, :] / (self.T[:, None] * sigma2_eps)
        return diag_l

    def _eliminate(self, terms, sigma2_zeta, sigma2_eps, iteration):
        """Factor the plot blocks and form the Schur complement on the global block."""
        p_gg, p_gl, p_ll, b_g, b_l = terms
        ng, nl = self.n_global, self.n_local
        diag_l = self._local_prior(sigma2_zeta, sigma2_eps)
        idx = np.arange(nl)
        p_ll = p_ll.copy()
        p_ll[..., idx, idx] += diag_l
        try:
            chol_l = np.linalg.cholesky(p_ll)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("plot-block precision not positive definite",
                                 iteration, "local") from exc
        rhs = np.concatenate([np.swapaxes(p_gl, -1, -2), b_l[..., None]], axis=-1)
        sol = np.linalg.solve(p_ll, rhs)                      # (k, i, l, g+1)
        schur = p_gg - np.einsum("kigl,kilh->kgh", p_gl, sol[..., :ng])
        b_tilde = b_g - np.einsum("kigl,kil->kg", p_gl, sol[..., ng])
        # pieces of the marginal density of the variances given omega
        logdet_post = 2.0 * np.sum(np.log(np.diagonal(chol_l, axis1=-2, axis2=-1)))
        logdet_prior = self.k1 * np.sum(np.log(diag_l))
        quad = np.sum(b_l * sol[..., ng])
        return dict(chol_l=chol_l, sol=sol, schur=schur, b_tilde=b_tilde,
                    local_logml=0.5 * (logdet_prior - logdet_post + quad))

    def _global_chol(self, loc, sigma2_xi, phi, iteration):
        ph, px = self.ph, self.px
        _, corr_inv = self._corr(phi)
        schur = loc["schur"].copy()
        schur[:, ph + px:, ph + px:] += corr_inv / sigma2_xi
        try:
            return np.linalg.cholesky(schur)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("global precision not positive definite", iteration, "global") from exc

    def _log_marginal(self, loc, sigma2_xi, phi, iteration):
        """Log density of the pseudo-data given omega with the linear layer integrated out."""
        lo, hi = self.phi_bounds
        if not lo <= phi <= hi:
            return -math.inf
        try:
            corr_chol, _ = self._corr(phi)
            chol = self._global_chol(loc, sigma2_xi, phi, iteration)
        except (np.linalg.LinAlgError, NumericalError):
            return -math.inf
        n_i = self.design.n_plots
        logdet_corr = 2.0 * np.sum(np.log(corr_chol.diagonal()))
        logdet_prior = -self.k1 * (n_i * math.log(sigma2_xi) + logdet_corr)
        logdet_post = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)))
        z = np.linalg.solve(chol, loc["b_tilde"][..., None])
        return float(loc["local_logml"] + 0.5 * (logdet_prior - logdet_post + np.sum(z ** 2)))

    def update_collapsed(self, state: ChainState, rng, terms=None):
        """Slice updates of the variances and phi with the linear layer integrated out.

        Each scalar is drawn from its conditional given omega and the other
        hyperparameters only, which removes the strong coupling between a
        variance and the many latent effects it governs.  The linear layer
        must be redrawn afterwards.
        """
        pr, par = self.priors, state.params
        it = state.iteration + 1
        terms = self._data_terms(state) if terms is None else terms

        def log_ig(u, shape, scale):
            # inverse-gamma prior on exp(u) including the Jacobian
            return -shape * u - scale * math.exp(-u)

        def local_target(name, shape, scale):
            def f(u):
                if not -30.0 < u < 30.0:
                    return -math.inf
                kw = {"sigma2_zeta": par.sigma2_zeta, "sigma2_eps": par.sigma2_eps, name: math.exp(u)}
                try:
                    loc = self._eliminate(terms, kw["sigma2_zeta"], kw["sigma2_eps"], it)
                except NumericalError:
                    return -math.inf
                return self._log_marginal(loc, par.sigma2_xi, par.phi, it) + log_ig(u, shape, scale)
            return f

        u, _ = slice_sample(math.log(par.sigma2_zeta),
                            local_target("sigma2_zeta", pr.zeta_shape, pr.zeta_scale), rng)
        par.sigma2_zeta = math.exp(u)
        if self.design.n_subplots > 1:
            u, _ = slice_sample(math.log(par.sigma2_eps),
                                local_target("sigma2_eps", pr.eps_shape, pr.eps_scale), rng)
            par.sigma2_eps = math.exp(u)
        else:
            par.sigma2_eps = _inv_gamma(pr.eps_shape, pr.eps_scale, rng)

        loc = self._eliminate(terms, par.sigma2_zeta, par.sigma2_eps, it)

        def xi_target(u):
            if not -30.0 < u < 30.0:
                return -math.inf
            return self._log_marginal(loc, math.exp(u), par.phi, it) + log_ig(u, pr.xi_shape, pr.xi_scale)

        u, _ = slice_sample(math.log(par.sigma2_xi), xi_target, rng)
        par.sigma2_xi = math.exp(u)
        lo, hi = self.phi_bounds
        par.phi, _ = slice_sample(par.phi, lambda v: self._log_marginal(loc, par.sigma2_xi, v, it), rng,
                                  width=0.25 * (hi - lo), lower=lo, upper=hi)
        self._check(state, "variances", par.sigma2_zeta, par.sigma2_xi, par.sigma2_eps, par.phi)
        return state, terms, loc

    def update_eta_block(self, state: ChainState, rng, terms=None, loc=None) -> ChainState:
        """Joint draw of alpha, beta, zeta and the interval totals of xi, eps."""
        d, par = self.design, state.params
        n_s, k1 = d.n_subplots, self.k1
        ng, ph, px = self.n_global, self.ph, self.px
        it = state.iteration + 1

        terms = self._data_terms(state) if terms is None else terms
        loc = self._eliminate(terms, par.sigma2_zeta, par.sigma2_eps, it) if loc is None else loc
        chol = self._global_chol(loc, par.sigma2_xi, par.phi, it)
        sol, chol_l = loc["sol"], loc["chol_l"]

        g = np.empty((k1, ng))
        for k in range(k1):
            mean = cho_solve((chol[k], True), loc["b_tilde"][k])
            g[k] = mean + solve_triangular(chol[k].T, rng.standard_normal(ng), lower=False)

        noise = rng.standard_normal((k1, d.n_plots, self.n_local, 1))
        local = (sol[..., ng] - np.einsum("kilg,kg->kil", sol[..., :ng], g)
                 + np.linalg.solve(np.swapaxes(chol_l, -1, -2), noise)[..., 0])

        alpha = g[:, :ph].T
        beta = g[:, ph:ph + px].T
        xi_total = g[:, ph + px:].T                           # (i, k)
        zeta = np.moveaxis(local[..., :n_s], 0, -1)           # (i, s, k)
        eps_total = np.moveaxis(local[..., n_s:] @ self.basis.T, 0, -1)

        par.alpha, par.beta = alpha, beta
        f = state.fields
        f.zeta, f.xi_total, f.eps_total = zeta, xi_total, eps_total
        f.eta0 = d.h @ alpha + zeta
        f.delta_total = (d.x_sum @ beta)[:, None, :] + xi_total[:, None, :] + eps_total
        f.xi = f.eps = None
        self._check(state, "linear", f.eta0, f.delta_total)
        return state

    def update_variances(self, state: ChainState, rng) -> ChainState:
        d, pr, par, f = self.design, self.priors, state.params, state.fields
        k1 = self.k1
        par.sigma2_zeta = _inv_gamma(pr.zeta_shape + f.zeta.size / 2.0,
                                     pr.zeta_scale + 0.5 * np.sum(f.zeta ** 2), rng)
        _, corr_inv = self._corr(par.phi)
        quad_xi = np.einsum("ik,ij,jk->", f.xi_total, corr_inv, f.xi_total)
        par.sigma2_xi = _inv_gamma(pr.xi_shape + d.n_plots * k1 / 2.0,
                                   pr.xi_scale + 0.5 * quad_xi, rng)
        if d.n_subplots > 1:
            quad = np.einsum("isk,sr,irk->i", f.eps_total, d.icar.precision, f.eps_total)
            par.sigma2_eps = _inv_gamma(pr.eps_shape + d.n_plots * (d.n_subplots - 1) * k1 / 2.0,
                                        pr.eps_scale + 0.5 * np.sum(quad / self.T), rng)
        else:
            par.sigma2_eps = _inv_gamma(pr.eps_shape, pr.eps_scale, rng)
        self._check(state, "variances", par.sigma2_zeta, par.sigma2_xi, par.sigma2_eps)
        return state

    def phi_logdensity(self, phi, xi_total, sigma2_xi):
        lo, hi = self.phi_bounds
        if not lo <= phi <= hi:
            return -math.inf
        try:
            chol, _ = self._corr(phi)
        except np.linalg.LinAlgError:
            return -math.inf
        z = solve_triangular(chol, xi_total, lower=True)
        logdet = 2.0 * np.sum(np.log(chol.diagonal()))
        return float(-0.5 * xi_total.shape[1] * logdet - 0.5 * np.sum(z ** 2) / sigma2_xi)

    def update_phi(self, state: ChainState, rng) -> ChainState:
        par = state.params
        lo, hi = self.phi_bounds
        logf = lambda phi: self.phi_logdensity(phi, state.fields.xi_total, par.sigma2_xi)  # noqa: E731
        par.phi, _ = slice_sample(par.phi, logf, rng, width=0.25 * (hi - lo), lower=lo, upper=hi)
        self._corr(par.phi)
        return state

    def update_noncentered(self, state: ChainState, rng) -> ChainState:
        """Rescaling moves on the standardised effects (interweaving).

        With ``zeta = s * z`` and ``z`` held fixed, ``log s`` is slice-sampled
        from its density under the binomial likelihood itself, with omega
        integrated out; omega is stale afterwards and is redrawn at the start
        of the next sweep.  The same holds for the eps and xi totals, and phi
        moves the xi totals through the Cholesky factor of their correlation
        with the white noise fixed.  These moves let the variances travel
        along the ridge where the latent effects scale with them.
        """
        pr, par, f, aug = self.priors, state.params, state.fields, state.omega
        use = 1.0 if self.config.use_likelihood else 0.0
        n0, n1 = use * aug.trials_start, use * aug.trials_end
        y0, y1 = use * aug.kappa_start + n0 / 2.0, use * aug.kappa_end + n1 / 2.0

        def loglik(eta, y, n):
            return float(np.sum(y * eta - n * np.logaddexp(0.0, eta)))

        eta_end = f.eta0 + f.delta_total

        def rescale(s2, shape, scale, effect, on_start):
            s_now = math.sqrt(s2)
            z = effect / s_now
            c0, c1 = f.eta0 - effect, eta_end - effect

            def logf(u):
                if not -15.0 < u < 15.0:
                    return -math.inf
                e = math.exp(u)
                out = -2.0 * shape * u - scale / (e * e) + loglik(c1 + e * z, y1, n1)
                if on_start:
                    out += loglik(c0 + e * z, y0, n0)
                return out

            u, _ = slice_sample(math.log(s_now), logf, rng)
            return math.exp(u) / s_now

        r = rescale(par.sigma2_zeta, pr.zeta_shape, pr.zeta_scale, f.zeta, True)
        par.sigma2_zeta *= r * r
        f.eta0 = f.eta0 + (r - 1.0) * f.zeta
        eta_end = eta_end + (r - 1.0) * f.zeta
        f.zeta = r * f.zeta

        if self.design.n_subplots > 1:
            r = rescale(par.sigma2_eps, pr.eps_shape, pr.eps_scale, f.eps_total, False)
            par.sigma2_eps *= r * r
            eta_end = eta_end + (r - 1.0) * f.eps_total
            f.eps_total = r * f.eps_total

        xi = np.broadcast_to(f.xi_total[:, None, :], eta_end.shape)
        r = rescale(par.sigma2_xi, pr.xi_shape, pr.xi_scale, xi, False)
        par.sigma2_xi *= r * r
        eta_end = eta_end + (r - 1.0) * xi
        f.xi_total = r * f.xi_total

        chol, _ = self._corr(par.phi)
        white = solve_triangular(chol, f.xi_total, lower=True)
        base = eta_end - f.xi_total[:, None, :]
        lo, hi = self.phi_bounds

        def phi_logf(phi):
            if not lo <= phi <= hi:
                return -math.inf
            try:
                c, _ = self._corr(phi)
            except np.linalg.LinAlgError:
                return -math.inf
            return loglik(base + (c @ white)[:, None, :], y1, n1)

        par.phi, _ = slice_sample(par.phi, phi_logf, rng, width=0.25 * (hi - lo), lower=lo, upper=hi)
        chol, _ = self._corr(par.phi)
        f.xi_total = chol @ white
        f.delta_total = (self.design.x_sum @ par.beta)[:, None, :] + f.xi_total[:, None, :] + f.eps_total
        self._check(state, "noncentered", par.sigma2_zeta, par.sigma2_xi, par.sigma2_eps, f.eta0,
                    f.delta_total)
        return state

    def sweep(self, state: ChainState, rng) -> ChainState:
        self.update_omega(state, rng)
        if self.config.collapsed:
            _, terms, loc = self.update_collapsed(state, rng)
            self.update_eta_block(state, rng, terms, loc)
        else:
            self.update_eta_block(state, rng)
        self.update_variances(state, rng)
        self.update_phi(state, rng)
        if self.config.interweave:
            self.update_noncentered(state, rng)
        state.iteration += 1
        return state

    # ---------------------------------------------------------- annual fields
    def materialize_annual(self, state: ChainState, rng) -> LatentField:
        """Draw annual xi and eps from their conditional given the interval totals."""
        d, par, f = self.design, state.params, state.fields
        act = d.active.astype(float)
        k1 = self.k1

        xi_prior = draw_annual_xi(d, par.sigma2_xi, par.phi, k1, rng)
        chol, _ = self._corr(par.phi)
        resid = f.xi_total - xi_prior.sum(axis=1)
        weights = cho_solve((chol, True), resid)              # (i, k)
        corr = np.exp(-d.D / par.phi)
        f.xi = xi_prior + np.einsum("it,ij,jt,jk->itk", act, corr, act, weights)

        eps_prior = draw_annual_eps(d, par.sigma2_eps, k1, rng)
        shift = (f.eps_total - eps_prior.sum(axis=2)) / self.T[:, None, None]
        f.eps = eps_prior + act[:, None, :, None] * shift[:, :, None, :]
        return f

    # ------------------------------------------------------------------- run
    def _check(self, state, block, *values):
        # iterations are reported 1-based: the sweep in progress
        for v in values:
            if not np.all(np.isfinite(v)):
                raise NumericalError("non-finite value in chain state", state.iteration + 1, block)

    def run(self, rng, chain: int = 0, state: ChainState | None = None,
            callback=None) -> PosteriorSamples:
        cfg = self.config
        state = state or self.initial_state()
        annual_rng = rng.spawn(1)[0] if cfg.store_annual else None
        n_keep = cfg.n_retained
        d, k1 = self.design, self.k1
        out = {
            "alpha": np.empty((n_keep, self.ph, k1)),
            "beta": np.empty((n_keep, self.px, k1)),
            "eta0": np.empty((n_keep, d.n_plots, d.n_subplots, k1)),
            "delta": np.empty((n_keep, d.n_plots, d.n_subplots, k1)),
            **{n: np.empty(n_keep) for n in ("sigma2_zeta", "sigma2_xi", "sigma2_eps", "phi")},
        }
        iters = np.empty(n_keep, dtype=int)
        j = 0
        for it in range(1, cfg.iterations + 1):
            self.sweep(state, rng)
            if annual_rng is not None:
                self.materialize_annual(state, annual_rng)
            if callback is not None:
                callback(state)
            if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and j < n_keep:
                p, f = state.params, state.fields
                out["alpha"][j], out["beta"][j] = p.alpha, p.beta
                out["eta0"][j], out["delta"][j] = f.eta0, f.delta_total
                for n in ("sigma2_zeta", "sigma2_xi", "sigma2_eps", "phi"):
                    out[n][j] = getattr(p, n)
                iters[j] = it
                j += 1
        return PosteriorSamples(**out, chain=np.full(n_keep, chain), iteration=iters,
                                burn_in=cfg.burn_in, seed=cfg.seed)


def run_chain(design: StudyDesign, states: PairedStates, priors: Priors | None = None,
              config: McmcConfig | None = None, rng=None, chain: int = 0) -> PosteriorSamples:
    config = config or McmcConfig()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return GibbsSampler(design, states, priors, config).run(rng, chain=chain)


def _chain_worker(args):
    design, states, priors, config, seed_seq, chain = args
    return run_chain(design, states, priors, config, np.random.default_rng(seed_seq), chain)


def run_chains(design: StudyDesign, states: PairedStates, priors: Priors | None = None,
               config: McmcConfig | None = None, threads: int = 1) -> PosteriorSamples:
    """Independent chains from spawned seed streams; output does not depend on ``threads``."""
    config = config or McmcConfig()
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    jobs = [(design, states, priors, config, s, c) for c, s in enumerate(seeds)]
    if threads > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, config.chains)) as pool:
            parts = list(pool.map(_chain_worker, jobs))
    else:
        parts = [_chain_worker(j) for j in jobs]
    return PosteriorSamples.concat(parts)


def scalar_eta_chain(y: int, n: int, prior_mean: float, prior_var: float, n_draws: int,
                     burn_in: int = 0, rng=None, eta0: float = 0.0) -> np.ndarray:
    """Omega/eta Gibbs pair for one binomial observation with a logit ``eta``.

    The smallest instance of the augmentation: ``omega | eta ~ PG(n, eta)``,
    then ``eta | omega ~ N(V (mu/v + kappa), V)`` with ``V = 1/(1/v + omega)``.
    """
    rng = np.random.default_rng(rng)
    kappa = y - n / 2.0
    out = np.empty(n_draws)
    eta = float(eta0)
    for it in range(burn_in + n_draws):
        omega = float(pg_draw(n, eta, rng))
        v = 1.0 / (1.0 / prior_var + omega)
        eta = v * (prior_mean / prior_var + kappa) + np.sqrt(v) * rng.standard_normal()
        if it >= burn_in:
            out[it - burn_in] = eta
    return out
