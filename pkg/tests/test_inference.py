import warnings

import numpy as np
import pytest
from scipy import integrate, special, stats

from helpers import grid_design, small_params
from ecotraj.errors import ConfigError, DomainError, NumericalError
from ecotraj.inference import (
    GibbsSampler,
    McmcConfig,
    PairedStates,
    Priors,
    diagnostics,
    effective_sample_size,
    run_chain,
    run_chains,
    scalar_eta_chain,
    slice_sample,
    split_rhat,
    summarize,
)
from ecotraj.spatial import build_hex_lattice
from ecotraj.trajectory import StudyDesign, simulate_dataset


def make_problem(seed=0, n_plots=3, n_rings=1, k=3, **kw):
    rng = np.random.default_rng(seed)
    design = grid_design(rng, n_plots=n_plots, n_rings=n_rings, min_len=2, max_len=4, **kw)
    sim = simulate_dataset(design, small_params(k1=k - 1), rng)
    return design, PairedStates(sim.y_start, sim.y_end, k)


def dense_model(design, omega0, omega1, kappa0, kappa1, params, priors, dim):
    """Prior moments and pseudo-data of the linear layer for one latent dimension.

    Built in covariance form on the annual parametrisation (every xi_it and
    eps_ist separately) with Gaussian pseudo-data kappa/omega.
    """
    n_i, n_s, n_y = design.n_plots, design.n_subplots, design.n_years
    ph, px = design.h.shape[-1], design.x.shape[-1]
    sizes = [ph, px, n_i * n_s, n_i * n_y, n_i * n_s * n_y]
    offs = np.cumsum([0] + sizes)
    n = offs[-1]
    cov = np.zeros((n, n))
    mean = np.zeros(n)
    cov[:ph, :ph] = priors.alpha_var * np.eye(ph)
    mean[:ph] = priors.alpha_mean
    cov[ph:ph + px, ph:ph + px] = priors.beta_var * np.eye(px)
    mean[ph:ph + px] = priors.beta_mean
    cov[offs[2]:offs[3], offs[2]:offs[3]] = params.sigma2_zeta * np.eye(n_i * n_s)
    C = params.sigma2_xi * np.exp(-design.D / params.phi)
    xi_idx = lambda i, t: offs[3] + i * n_y + t  # noqa: E731
    for t in range(n_y):
        idx = [xi_idx(i, t) for i in range(n_i)]
        cov[np.ix_(idx, idx)] = C
    Q = design.icar.Q
    eps_idx = lambda i, s, t: offs[4] + (i * n_s + s) * n_y + t  # noqa: E731
    for i in range(n_i):
        for t in range(n_y):
            idx = [eps_idx(i, s, t) for s in range(n_s)]
            cov[np.ix_(idx, idx)] = params.sigma2_eps * Q

    A0 = np.zeros((n_i * n_s, n))
    A1 = np.zeros((n_i * n_s, n))
    for i in range(n_i):
        for s in range(n_s):
            r = i * n_s + s
            A0[r, :ph] = design.h[i, s]
            A0[r, offs[2] + r] = 1.0
            A1[r] = A0[r]
            A1[r, ph:ph + px] = design.x_sum[i]
            for t in np.flatnonzero(design.active[i]):
                A1[r, xi_idx(i, t)] = 1.0
                A1[r, eps_idx(i, s, t)] = 1.0
    w = np.concatenate([omega0[..., dim].ravel(), omega1[..., dim].ravel()])
    kap = np.concatenate([kappa0[..., dim].ravel(), kappa1[..., dim].ravel()])
    A = np.vstack([A0, A1])
    keep = w > 0
    B = np.vstack([np.eye(n)[:ph + px], A0, A1])
    return mean, cov, A[keep], w[keep], kap[keep], B


def dense_posterior(design, states, omega0, omega1, kappa0, kappa1, params, priors, dim):
    """Posterior of (alpha, beta, eta0, etaT) for one latent dimension."""
    mean, cov, A, w, kap, B = dense_model(design, omega0, omega1, kappa0, kappa1, params, priors, dim)
    S = A @ cov @ A.T + np.diag(1.0 / w)
    gain = B @ cov @ A.T @ np.linalg.inv(S)
    post_mean = B @ mean + gain @ (kap / w - A @ mean)
    post_cov = B @ cov @ B.T - gain @ A @ cov @ B.T
    return post_mean, post_cov


class TestEtaBlock:
    def test_matches_dense_conditioning(self):
        design, states = make_problem(seed=3)
        priors = Priors(alpha_mean=0.3, alpha_var=4.0, beta_var=2.0)
        sampler = GibbsSampler(design, states, priors)
        state = sampler.initial_state()
        state.params.sigma2_zeta, state.params.sigma2_xi, state.params.sigma2_eps = 0.4, 0.3, 0.2
        state.params.phi = 25.0
        rng = np.random.default_rng(0)
        aug = state.omega
        aug.omega_start = np.where(aug.trials_start > 0, rng.uniform(0.1, 0.3, aug.trials_start.shape), 0.0)
        aug.omega_end = np.where(aug.trials_end > 0, rng.uniform(0.1, 0.3, aug.trials_end.shape), 0.0)

        n = 4000
        draws = {k: [] for k in range(2)}
        for _ in range(n):
            sampler.update_eta_block(state, rng)
            f, p = state.fields, state.params
            for k in range(2):
                draws[k].append(np.concatenate([p.alpha[:, k], p.beta[:, k], f.eta0[..., k].ravel(),
                                                f.eta_end[..., k].ravel()]))
        for k in range(2):
            mu, cov = dense_posterior(design, states, aug.omega_start, aug.omega_end, aug.kappa_start,
                                      aug.kappa_end, state.params, priors, k)
            x = np.array(draws[k])
            sd = np.sqrt(np.diag(cov))
            z = (x.mean(axis=0) - mu) / (sd / np.sqrt(n))
            assert np.abs(z).max() < 4.5
            np.testing.assert_allclose(x.var(axis=0), np.diag(cov), rtol=0.12)
            # a few cross-covariances between coefficients and positions
            emp = np.cov(x[:, :8].T)
            np.testing.assert_allclose(emp, cov[:8, :8], atol=0.08 * np.sqrt(np.outer(sd[:8], sd[:8])).max())

    def test_no_data_returns_prior(self):
        design, states = make_problem(seed=1)
        sampler = GibbsSampler(design, states, Priors(alpha_mean=1.0, alpha_var=9.0),
                               McmcConfig(use_likelihood=False))
        state = sampler.initial_state()
        rng = np.random.default_rng(2)
        a = np.array([sampler.update_eta_block(state, rng).params.alpha.copy() for _ in range(4000)])
        np.testing.assert_allclose(a.mean(axis=0), 1.0, atol=4 * 3 / np.sqrt(4000))
        np.testing.assert_allclose(a.std(axis=0), 3.0, rtol=0.06)

    def test_zeta_collapses_with_tiny_variance(self):
        design, states = make_problem(seed=1)
        sampler = GibbsSampler(design, states)
        state = sampler.initial_state()
        state.params.sigma2_zeta = 1e-12
        sampler.update_omega(state, np.random.default_rng(0))
        sampler.update_eta_block(state, np.random.default_rng(1))
        assert np.abs(state.fields.zeta).max() < 1e-4

    def test_eps_totals_sum_to_zero(self):
        design, states = make_problem(seed=4)
        sums = []
        sampler = GibbsSampler(design, states, config=McmcConfig(60, 0))
        sampler.run(np.random.default_rng(0),
                    callback=lambda s: sums.append(np.abs(s.fields.eps_total.sum(axis=1)).max()))
        assert len(sums) == 60 and max(sums) < 1e-8


class TestCollapsed:
    def _state(self, seed=3):
        design, states = make_problem(seed=seed)
        sampler = GibbsSampler(design, states, Priors(phi_upper=80.0))
        state = sampler.initial_state()
        rng = np.random.default_rng(seed)
        aug = state.omega
        aug.omega_start = np.where(aug.trials_start > 0, rng.uniform(0.1, 0.3, aug.trials_start.shape), 0.0)
        aug.omega_end = np.where(aug.trials_end > 0, rng.uniform(0.1, 0.3, aug.trials_end.shape), 0.0)
        return design, sampler, state

    def test_log_marginal_matches_dense(self):
        design, sampler, state = self._state()
        aug, par = state.omega, state.params
        terms = sampler._data_terms(state)
        settings = [(0.4, 0.3, 0.2, 25.0), (1.5, 0.05, 2.0, 60.0), (0.1, 2.0, 0.01, 5.0)]
        ours, dense = [], []
        for z, x, e, phi in settings:
            par.sigma2_zeta, par.sigma2_xi, par.sigma2_eps, par.phi = z, x, e, phi
            loc = sampler._eliminate(terms, z, e, 1)
            ours.append(sampler._log_marginal(loc, x, phi, 1))
            total = 0.0
            for k in range(2):
                mean, cov, A, w, kap, _ = dense_model(design, aug.omega_start, aug.omega_end,
                                                      aug.kappa_start, aug.kappa_end, par, sampler.priors, k)
                total += stats.multivariate_normal(A @ mean, A @ cov @ A.T + np.diag(1 / w)).logpdf(kap / w)
            dense.append(total)
        # equal up to a constant that does not depend on the variances or phi
        np.testing.assert_allclose(np.diff(ours), np.diff(dense), atol=1e-6)

    def test_outside_phi_bounds(self):
        _, sampler, state = self._state()
        loc = sampler._eliminate(sampler._data_terms(state), 0.3, 0.3, 1)
        assert sampler._log_marginal(loc, 0.3, 81.0, 1) == -np.inf

    def test_prior_without_likelihood(self):
        design, states = make_problem(seed=0, n_plots=2, n_rings=0, k=2)
        sampler = GibbsSampler(design, states, Priors(phi_upper=100.0), McmcConfig(use_likelihood=False))
        state = sampler.initial_state()
        rng = np.random.default_rng(1)
        draws = []
        for _ in range(6000):
            sampler.update_collapsed(state, rng)
            p = state.params
            draws.append((p.sigma2_zeta, p.sigma2_xi, p.phi))
        draws = np.array(draws)
        ig = stats.invgamma(2.0, scale=1.0)
        for j in range(2):
            assert stats.kstest(draws[::3, j], ig.cdf).pvalue > 1e-3
        assert stats.kstest(draws[::3, 2], stats.uniform(0.1, 99.9).cdf).pvalue > 1e-3


class TestInterweaving:
    def test_prior_without_likelihood(self):
        design, states = make_problem(seed=2, n_plots=2, n_rings=1, k=2)
        sampler = GibbsSampler(design, states, Priors(phi_upper=100.0), McmcConfig(use_likelihood=False))
        state = sampler.initial_state()
        rng = np.random.default_rng(0)
        draws = []
        for _ in range(6000):
            sampler.update_eta_block(state, rng)
            sampler.update_noncentered(state, rng)
            draws.append((state.params.sigma2_zeta, state.params.sigma2_eps, state.params.sigma2_xi))
        ig = stats.invgamma(2.0, scale=1.0)
        for j in range(3):
            assert stats.kstest(np.array(draws)[::3, j], ig.cdf).pvalue > 1e-3

    def test_same_posterior_as_plain_scan(self):
        # two kernels with the same target: posterior summaries agree within MC error
        design, states = make_problem(seed=5, n_plots=3, n_rings=1, k=2)
        priors = Priors(phi_upper=100.0)
        out = []
        for flag in (True, False):
            s = run_chain(design, states, priors, McmcConfig(12000, 1000, interweave=flag),
                          rng=np.random.default_rng(11))
            cols = {**{f"a{p}": s.alpha[:, p, 0] for p in range(2)},
                    **{f"b{p}": s.beta[:, p, 0] for p in range(3)},
                    "lz": np.log(s.sigma2_zeta), "le": np.log(s.sigma2_eps)}
            out.append({k: (v.mean(), v.std() / np.sqrt(effective_sample_size(v[None])))
                        for k, v in cols.items()})
        for k in out[0]:
            (m1, s1), (m2, s2) = out[0][k], out[1][k]
            assert abs(m1 - m2) < 4 * np.hypot(s1, s2), k

    def test_rescaling_keeps_state_consistent(self):
        design, states = make_problem(seed=6)
        sampler = GibbsSampler(design, states)
        state = sampler.initial_state()
        rng = np.random.default_rng(1)
        for _ in range(5):
            sampler.sweep(state, rng)
        p, f = state.params, state.fields
        np.testing.assert_allclose(f.eta0, design.h @ p.alpha + f.zeta, atol=1e-12)
        np.testing.assert_allclose(f.delta_total, (design.x_sum @ p.beta)[:, None, :]
                                   + f.xi_total[:, None, :] + f.eps_total, atol=1e-12)
        assert np.abs(f.eps_total.sum(axis=1)).max() < 1e-10


class TestOmega:
    def test_means(self):
        design, states = make_problem(seed=2, n_plots=6)
        sampler = GibbsSampler(design, states)
        state = sampler.initial_state()
        rng = np.random.default_rng(0)
        state.fields.eta0[...] = 0.0
        state.fields.delta_total[...] = 2.0
        w0, w1 = [], []
        for _ in range(300):
            aug = sampler.update_omega(state, rng)
            w0.append(aug.omega_start[aug.trials_start == 1])
            w1.append(aug.omega_end[aug.trials_end == 1])
            assert np.all(aug.omega_start[aug.trials_start == 0] == 0)
        assert np.mean(w0) == pytest.approx(0.25, abs=0.003)
        assert np.mean(w1) == pytest.approx(np.tanh(1) / 4, abs=0.003)


class TestVariances:
    def _state(self, seed=0):
        design, states = make_problem(seed=seed, n_plots=5)
        sampler = GibbsSampler(design, states)
        return sampler, sampler.initial_state()

    def test_zero_fields_give_prior_plus_count(self):
        sampler, state = self._state()
        rng = np.random.default_rng(0)
        count = state.fields.zeta.size
        draws = [sampler.update_variances(state, rng).params.sigma2_zeta for _ in range(3000)]
        ref = stats.invgamma(2.0 + count / 2.0, scale=1.0)
        assert stats.kstest(draws, ref.cdf).pvalue > 1e-3

    def test_recovers_known_variance(self):
        rng = np.random.default_rng(1)
        lat = build_hex_lattice(2)
        n = 60
        d = StudyDesign([str(i) for i in range(n)], 65 + 0.2 * (np.arange(n) // 6),
                        -150 + 0.4 * (np.arange(n) % 6), lat, np.full(n, 2000), np.full(n, 2005),
                        np.ones((n, lat.n_cells, 1)), np.ones((n, 5, 1)))
        y = np.zeros((n, lat.n_cells), dtype=int)
        sampler = GibbsSampler(d, PairedStates(y, y, 6))
        state = sampler.initial_state()
        f = state.fields
        f.zeta = np.sqrt(0.5) * rng.standard_normal(f.zeta.shape)
        G = np.exp(-d.D / 30.0) * d.overlap
        f.xi_total = np.linalg.cholesky(0.5 * G) @ rng.standard_normal((n, 5))
        from ecotraj.spatial import sample_constrained_icar
        f.eps_total = np.swapaxes(sample_constrained_icar(d.icar, 0.5 * 5, rng, size=(n, 5)), 1, 2)
        state.params.phi = 30.0
        draws = np.array([[getattr(sampler.update_variances(state, rng).params, n_)
                           for n_ in ("sigma2_zeta", "sigma2_xi", "sigma2_eps")] for _ in range(2000)])
        np.testing.assert_allclose(draws.mean(axis=0), 0.5, rtol=0.10)

    def test_single_subplot_eps_draws_from_prior(self):
        design, states = make_problem(seed=0, n_rings=0)
        sampler = GibbsSampler(design, states)
        state = sampler.initial_state()
        rng = np.random.default_rng(0)
        draws = [sampler.update_variances(state, rng).params.sigma2_eps for _ in range(3000)]
        assert stats.kstest(draws, stats.invgamma(2.0, scale=1.0).cdf).pvalue > 1e-3


class TestPhi:
    def test_single_plot_reproduces_uniform(self):
        lat = build_hex_lattice(0)
        d = StudyDesign(["a"], [65.0], [-150.0], lat, [2000], [2004], np.ones((1, 1, 1)), np.ones((1, 4, 1)))
        y = np.zeros((1, 1), dtype=int)
        with pytest.raises(ConfigError):
            GibbsSampler(d, PairedStates(y, y, 2))
        sampler = GibbsSampler(d, PairedStates(y, y, 2), Priors(phi_lower=1.0, phi_upper=50.0))
        state = sampler.initial_state()
        state.fields.xi_total[:] = 0.7
        rng = np.random.default_rng(0)
        draws = [sampler.update_phi(state, rng).params.phi for _ in range(5000)]
        assert stats.kstest(draws[::5], stats.uniform(1.0, 49.0).cdf).pvalue > 1e-3

    def test_recovers_range(self):
        rng = np.random.default_rng(6)
        n, k = 50, 40
        lat = build_hex_lattice(0)
        d = StudyDesign([str(i) for i in range(n)], 65 + rng.uniform(0, 4, n), -150 + rng.uniform(0, 8, n),
                        lat, np.full(n, 2000), np.full(n, 2001), np.ones((n, 1, 1)), np.ones((n, 1, 1)))
        y = np.zeros((n, 1), dtype=int)
        sampler = GibbsSampler(d, PairedStates(y, y, k + 1))
        state = sampler.initial_state()
        state.params.sigma2_xi = 1.0
        state.fields.xi_total = np.linalg.cholesky(np.exp(-d.D / 50.0) + 1e-10 * np.eye(n)) @ \
            rng.standard_normal((n, k))
        draws = [sampler.update_phi(state, rng).params.phi for _ in range(1500)]
        assert 30.0 < np.median(draws[300:]) < 70.0
        assert max(draws) <= d.phi_max

    def test_bounds_respected_in_chain(self):
        design, states = make_problem(seed=5, n_plots=4)
        s = run_chain(design, states, config=McmcConfig(200, 0), rng=np.random.default_rng(1))
        assert s.phi.max() <= design.phi_max and s.phi.min() > 0


class TestRunChain:
    def test_retained_count(self):
        design, states = make_problem()
        s = run_chain(design, states, config=McmcConfig(50, 20))
        assert s.n_draws == 30
        np.testing.assert_array_equal(s.iteration, np.arange(21, 51))
        assert s.burn_in == 20

    def test_run_length_arithmetic(self):
        assert McmcConfig(10000, 2000).n_retained == 8000
        assert McmcConfig(500, 100, thin=1).n_retained == 400

    def test_zero_retained(self):
        design, states = make_problem()
        s = run_chain(design, states, config=McmcConfig(10, 10))
        assert s.n_draws == 0 and s.alpha.shape[0] == 0

    def test_deterministic(self):
        design, states = make_problem()
        a = run_chain(design, states, config=McmcConfig(30, 5, seed=4))
        b = run_chain(design, states, config=McmcConfig(30, 5, seed=4))
        np.testing.assert_array_equal(a.alpha, b.alpha)
        np.testing.assert_array_equal(a.delta, b.delta)
        np.testing.assert_array_equal(a.phi, b.phi)

    def test_chains_independent_of_threads(self):
        design, states = make_problem()
        cfg = McmcConfig(20, 0, chains=2, seed=1)
        a = run_chains(design, states, config=cfg, threads=1)
        b = run_chains(design, states, config=cfg, threads=2)
        np.testing.assert_array_equal(a.alpha, b.alpha)
        np.testing.assert_array_equal(a.chain, np.repeat([0, 1], 20))

    def test_store_annual_does_not_change_chain(self):
        design, states = make_problem()
        a = run_chain(design, states, config=McmcConfig(20, 0, seed=2))
        b = run_chain(design, states, config=McmcConfig(20, 0, seed=2, store_annual=True))
        np.testing.assert_array_equal(a.alpha, b.alpha)

    def test_nan_aborts_with_context(self, monkeypatch):
        design, states = make_problem()

        def poisoned(self, state, rng):
            state.omega.omega_start = np.full(state.omega.omega_start.shape, np.nan)
            return state.omega

        monkeypatch.setattr(GibbsSampler, "update_omega", poisoned)
        with pytest.raises(NumericalError) as err:
            run_chain(design, states, config=McmcConfig(5, 0))
        assert err.value.iteration == 1
        assert err.value.block == "linear"
        assert "iteration=1" in str(err.value)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            McmcConfig(10, 20)
        with pytest.raises(ConfigError):
            Priors(alpha_var=0.0)


class TestAnnualFields:
    def test_totals_reproduced(self):
        design, states = make_problem(seed=7)
        sampler = GibbsSampler(design, states, config=McmcConfig(store_annual=True))
        state = sampler.initial_state()
        rng = np.random.default_rng(0)
        for _ in range(3):
            sampler.sweep(state, rng)
        f = sampler.materialize_annual(state, rng)
        np.testing.assert_allclose(f.xi.sum(axis=1), f.xi_total, atol=1e-10)
        np.testing.assert_allclose(f.eps.sum(axis=2), f.eps_total, atol=1e-10)
        assert np.abs(f.eps.sum(axis=1)).max() < 1e-8
        assert np.all(f.xi[~design.active] == 0)

    def test_prior_law_of_annual_effects(self):
        # no data, fixed variances: annual xi and eps keep their prior marginals
        design, states = make_problem(seed=8)
        sampler = GibbsSampler(design, states, config=McmcConfig(use_likelihood=False))
        state = sampler.initial_state()
        p = state.params
        p.sigma2_xi, p.sigma2_eps, p.phi = 0.6, 0.4, 20.0
        rng = np.random.default_rng(3)
        xi, eps = [], []
        for _ in range(3000):
            sampler.update_eta_block(state, rng)
            f = sampler.materialize_annual(state, rng)
            t = np.flatnonzero(design.active[0])[0]
            xi.append(f.xi[:, t, 0])
            eps.append(f.eps[0, :, t, 0])
        active0 = design.active[:, np.flatnonzero(design.active[0])[0]]
        np.testing.assert_allclose(np.var(xi, axis=0)[active0], 0.6, rtol=0.1)
        np.testing.assert_allclose(np.cov(np.array(eps).T), 0.4 * design.icar.Q, atol=0.04)


class TestPriorReproduction:
    def test_quantiles(self):
        design, states = make_problem(seed=0, n_plots=2, n_rings=0, k=2)
        cfg = McmcConfig(30000, 1000, use_likelihood=False)
        s = run_chain(design, states, Priors(phi_upper=100.0), cfg, rng=np.random.default_rng(5))
        ig = stats.invgamma(2.0, scale=1.0)
        for name in ("sigma2_zeta", "sigma2_xi", "sigma2_eps"):
            q = np.quantile(getattr(s, name), [0.05, 0.5, 0.95])
            np.testing.assert_allclose(q, ig.ppf([0.05, 0.5, 0.95]), rtol=0.15)
        np.testing.assert_allclose(np.quantile(s.alpha[:, 0, 0], [0.05, 0.5, 0.95]),
                                   stats.norm(0, 10).ppf([0.05, 0.5, 0.95]), atol=1.0)
        lo = 1e-3 * 100.0
        np.testing.assert_allclose(np.quantile(s.phi, [0.05, 0.5, 0.95]),
                                   lo + (100 - lo) * np.array([0.05, 0.5, 0.95]), atol=5.0)


class TestScalarConjugacy:
    def test_matches_quadrature(self):
        draws = scalar_eta_chain(1, 1, 0.5, 2.0, 20_000, burn_in=200, rng=4)
        dens = lambda e: special.expit(e) * stats.norm(0.5, np.sqrt(2.0)).pdf(e)  # noqa: E731
        grid = np.linspace(-15, 15, 20001)
        cdf = integrate.cumulative_trapezoid(dens(grid), grid, initial=0.0)
        cdf /= cdf[-1]
        ks = stats.kstest(draws, lambda v: np.interp(v, grid, cdf)).statistic
        assert ks < 0.03


class TestDiagnostics:
    def test_iid_rhat(self):
        x = np.random.default_rng(0).standard_normal((2, 5000))
        assert split_rhat(x) == pytest.approx(1.0, abs=0.02)
        assert split_rhat(x) >= 1.0

    def test_shifted_chains(self):
        x = np.random.default_rng(0).standard_normal((2, 1000))
        x[1] += 3.0
        assert split_rhat(x) > 1.5

    def test_ar1_ess(self):
        rng = np.random.default_rng(1)
        n, rho = 40_000, 0.5
        e = rng.standard_normal(n)
        x = np.empty(n)
        x[0] = e[0]
        for t in range(1, n):
            x[t] = rho * x[t - 1] + np.sqrt(1 - rho ** 2) * e[t]
        assert effective_sample_size(x) / n == pytest.approx(1 / 3, rel=0.2)

    def test_ess_bounded(self):
        x = np.random.default_rng(2).standard_normal((3, 400))
        ess = effective_sample_size(x)
        assert 0 < ess <= 1200
        # antithetic draws would exceed n without the cap
        alt = np.tile([1.0, -1.0], 200) + 1e-3 * np.random.default_rng(3).standard_normal(400)
        assert effective_sample_size(alt) <= 400

    def test_constant_chain(self):
        with pytest.warns(RuntimeWarning):
            r = summarize("c", np.ones(100))
        assert np.isnan(r.rhat) and np.isnan(r.ess)

    def test_too_few(self):
        with pytest.raises(DomainError):
            summarize("x", [1.0, 2.0, 3.0])

    def test_table_from_samples(self):
        design, states = make_problem()
        s = run_chains(design, states, config=McmcConfig(40, 10, chains=2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows = diagnostics(s)
        assert rows[0].name == "alpha[0][1]"
        assert {r.name for r in rows} >= {"sigma2_zeta", "sigma2_xi", "sigma2_eps", "phi"}
        for r in rows:
            assert r.lower <= r.mean <= r.upper


class TestSlice:
    def test_gamma_target(self):
        rng = np.random.default_rng(0)
        logf = lambda v: 2.0 * np.log(v) - v if v > 0 else -np.inf  # noqa: E731
        x, out = 1.0, []
        for _ in range(20_000):
            x, _ = slice_sample(x, logf, rng, width=2.0, lower=0.0)
            out.append(x)
        assert stats.kstest(out[::10], stats.gamma(3.0).cdf).pvalue > 1e-3

    def test_bounded(self):
        rng = np.random.default_rng(1)
        x, out = 0.5, []
        for _ in range(3000):
            x, _ = slice_sample(x, lambda v: 0.0, rng, width=5.0, lower=0.0, upper=1.0)
            out.append(x)
        assert 0.0 <= min(out) and max(out) <= 1.0
        assert stats.kstest(out, "uniform").pvalue > 1e-3
