import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from abcd.belief import (
    BeliefError,
    BeliefState,
    GpNodeCache,
    InterventionSpec,
    OBSERVATIONAL,
    RootCache,
    RootModel,
    Sample,
    edge_marginals,
    graph_log_posterior,
    initialize,
    log_posterior_after_batch,
    node_log_evidence,
    sample_interventional,
    sample_interventional_batch,
    update,
)
from abcd.dags import Dag, GraphPrior, enumerate_dags
from abcd.gp import GpSnapshot, default_hyperparams
from conftest import OBS_2D, OBS_3D


def make_obs(rows):
    return [Sample(values=v) for v in rows]


def empty_belief(d=2, universe=None, root_model=None):
    """Belief over an empty dataset (evidence identically zero)."""
    universe = tuple(universe if universe is not None else enumerate_dags(d))
    rm = root_model or RootModel()
    keys = tuple(sorted({(i, g.parent_sets[i]) for g in universe for i in range(d)}))
    key_index = {k: i for i, k in enumerate(keys)}
    caches = {}
    hyperparams = {}
    for i, parents in keys:
        if parents:
            h = default_hyperparams(len(parents))
            hyperparams[(i, parents)] = h
            caches[(i, parents)] = GpNodeCache(GpSnapshot.empty(h))
        else:
            caches[(i, parents)] = RootCache.from_data(rm, np.zeros(0))
    graph_key_idx = np.array(
        [[key_index[(i, g.parent_sets[i])] for i in range(d)] for g in universe]
    )
    n = len(universe)
    return BeliefState(
        d=d,
        universe=universe,
        prior=GraphPrior(),
        log_prior_vec=np.full(n, -math.log(n)),
        log_posterior=np.full(n, -math.log(n)),
        data=(),
        caches=caches,
        hyperparams=hyperparams,
        root_models=tuple(rm for _ in range(d)),
        centering=np.zeros(d),
        keys=keys,
        key_index=key_index,
        graph_key_idx=graph_key_idx,
        seed=0,
    )


class TestSampleAndSpec:
    def test_clamping_enforced(self):
        Sample(values=(1.0, 2.0), intervention=InterventionSpec(target=0, value=1.0))
        with pytest.raises(BeliefError, match="clamping"):
            Sample(values=(1.0, 2.0), intervention=InterventionSpec(target=0, value=0.5))

    def test_finiteness(self):
        with pytest.raises(BeliefError):
            Sample(values=(math.nan, 0.0))
        with pytest.raises(BeliefError):
            InterventionSpec(target=0, value=math.inf)

    def test_target_and_value_together(self):
        with pytest.raises(BeliefError):
            InterventionSpec(target=1)
        with pytest.raises(BeliefError):
            InterventionSpec(value=0.3)

    def test_json_round_trip(self):
        s = Sample(values=(0.25, -1.5), intervention=InterventionSpec(target=1, value=-1.5))
        assert Sample.from_json(s.to_json()) == s
        o = Sample(values=(0.1, 0.2))
        assert Sample.from_json(o.to_json()) == o


class TestRootModel:
    def test_batch_evidence_equals_sequential_predictives(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            ys = rng.normal(size=int(rng.integers(1, 12)))
            prior = RootModel()
            batch = RootCache.from_data(prior, ys)
            seq = RootCache.from_data(prior, np.zeros(0))
            for y in ys:
                seq = seq.extend(float(y))
            assert batch.log_evidence == pytest.approx(seq.log_evidence, abs=1e-10)
            assert batch.mu == pytest.approx(seq.mu, abs=1e-12)
            assert batch.beta == pytest.approx(seq.beta, abs=1e-10)

    def test_evidence_matches_numerical_integration(self):
        # independent oracle: integrate N(y | m, v) over the conjugate prior
        prior = RootModel(mu0=0.3, kappa0=2.0, alpha0=3.0, beta0=1.5)
        ys = np.array([0.1, -0.4, 0.9])

        def integrand(v):
            # p(v) InvGamma(alpha0, beta0); p(m | v) = N(mu0, v/kappa0);
            # marginalise m analytically: y ~ N(mu0 1, v(I + 11^T/kappa0))
            n = len(ys)
            cov = v * (np.eye(n) + np.ones((n, n)) / prior.kappa0)
            resid = ys - prior.mu0
            sign, logdet = np.linalg.slogdet(cov)
            quad_term = resid @ np.linalg.solve(cov, resid)
            log_lik = -0.5 * (quad_term + logdet + n * math.log(2 * math.pi))
            log_ig = (
                prior.alpha0 * math.log(prior.beta0)
                - math.lgamma(prior.alpha0)
                - (prior.alpha0 + 1) * math.log(v)
                - prior.beta0 / v
            )
            return math.exp(log_lik + log_ig)

        oracle, err = quad(integrand, 1e-6, 60, limit=200)
        ours = RootCache.from_data(prior, ys).log_evidence
        assert ours == pytest.approx(math.log(oracle), abs=1e-6)

    def test_predictive_is_student_t(self):
        cache = RootCache.from_data(RootModel(), np.array([0.5, -0.2, 1.1]))
        df, loc, scale = cache._t_params()
        ys = np.linspace(-3, 3, 7)
        expected = stats.t.logpdf(ys, df, loc=loc, scale=scale)
        np.testing.assert_allclose(cache.predictive_logpdf(ys), expected, atol=1e-10)

    def test_invalid_prior(self):
        with pytest.raises(BeliefError):
            RootModel(kappa0=0.0)


class TestNodeEvidenceMasking:
    def test_do_y_scores_marginal_or_conditional_per_graph(self, bivariate_belief):
        # one sample from do(X1 = y): under X0 -> X1 the intervened node
        # contributes nothing and X0 is scored on its marginal; under
        # X1 -> X0 the conditional of X0 given the clamped value is scored.
        s = Sample(values=(0.4, -1.2), intervention=InterventionSpec(target=1, value=-1.2))
        data = [s]
        b = bivariate_belief
        assert node_log_evidence(1, (), data, b) == 0.0
        assert node_log_evidence(1, (0,), data, b) == 0.0
        marginal_x = node_log_evidence(0, (), data, b)
        assert math.isfinite(marginal_x) and marginal_x != 0.0
        conditional_x = node_log_evidence(0, (1,), data, b)
        assert math.isfinite(conditional_x) and conditional_x != 0.0

    def test_empty_data_gives_zero(self, bivariate_belief):
        for key in bivariate_belief.keys:
            assert node_log_evidence(key[0], key[1], [], bivariate_belief) == 0.0

    def test_missing_hyperparams_error(self):
        # belief over a universe that never needed this conditional
        restricted = initialize(
            make_obs(OBS_2D), universe=[Dag.from_edges(2, [])], seed=0
        )
        s = Sample(values=(0.1, 0.2))
        with pytest.raises(BeliefError, match="initialize"):
            node_log_evidence(0, (1,), [s], restricted)


class TestGraphPosterior:
    def test_no_data_uniform_prior_is_prior(self):
        b = empty_belief(2)
        vec = graph_log_posterior(b)
        np.testing.assert_allclose(vec, math.log(1 / 3), atol=1e-12)

    def test_two_graphs_equal_evidence_split_half(self):
        universe = (Dag.from_edges(2, [(0, 1)]), Dag.from_edges(2, [(1, 0)]))
        b = empty_belief(2, universe=universe)
        np.testing.assert_allclose(np.exp(graph_log_posterior(b)), [0.5, 0.5], atol=1e-12)

    def test_evidence_gap_gives_logistic_posterior(self):
        # two graphs with evidence difference delta: winner gets 1/(1+e^-delta)
        universe = (Dag.from_edges(2, []), Dag.from_edges(2, [(0, 1)]))
        b = empty_belief(2, universe=universe)
        delta = 1.7
        caches = dict(b.caches)
        rc = caches[(1, ())]
        boosted = RootCache(rc.prior, rc.n, rc.mu, rc.kappa, rc.alpha, rc.beta, delta)
        caches[(1, ())] = boosted  # empty graph's node-1 evidence raised by delta
        object.__setattr__(b, "caches", caches)
        post = np.exp(graph_log_posterior(b))
        assert post[0] == pytest.approx(1.0 / (1.0 + math.exp(-delta)), abs=1e-12)

    def test_normalisation_invariant(self, bivariate_belief):
        vec = graph_log_posterior(bivariate_belief)
        assert abs(np.log(np.sum(np.exp(vec)))) < 1e-12


class TestUpdate:
    def test_incremental_equals_scratch(self, bivariate_belief):
        rng = np.random.default_rng(3)
        b = bivariate_belief
        data = list(b.data)
        for t in range(8):
            target = int(rng.integers(0, 3))  # 2 = observational
            if target < 2:
                x = float(rng.uniform(-2, 2))
                vals = [float(rng.normal()), float(rng.normal())]
                vals[target] = x
                s = Sample(tuple(vals), InterventionSpec(target=target, value=x))
            else:
                s = Sample((float(rng.normal()), float(rng.normal())))
            b = update(b, s)
            data.append(s)
            for i, parents in b.keys:
                scratch = node_log_evidence(i, parents, data, b)
                assert b.caches[(i, parents)].log_evidence == pytest.approx(scratch, abs=1e-8)
            assert abs(np.log(np.sum(np.exp(b.log_posterior)))) < 1e-12

    def test_masking_leaves_intervened_node_untouched(self, bivariate_belief):
        b = bivariate_belief
        s = Sample(values=(0.7, 0.4), intervention=InterventionSpec(target=0, value=0.7))
        b2 = update(b, s)
        for parents in ((), (1,)):
            assert b2.caches[(0, parents)] is b.caches[(0, parents)]
            assert b2.caches[(0, parents)].log_evidence == b.caches[(0, parents)].log_evidence
        assert b2.caches[(1, (0,))] is not b.caches[(1, (0,))]

    def test_original_belief_unchanged(self, bivariate_belief):
        before = bivariate_belief.log_posterior.copy()
        n_before = len(bivariate_belief.data)
        update(bivariate_belief, Sample((0.0, 0.0)))
        np.testing.assert_array_equal(bivariate_belief.log_posterior, before)
        assert len(bivariate_belief.data) == n_before

    def test_batch_order_exchangeability(self, bivariate_belief):
        samples = [
            Sample((0.5, 0.9)),
            Sample((1.5, 1.2), InterventionSpec(target=0, value=1.5)),
            Sample((-0.8, -1.0), InterventionSpec(target=1, value=-1.0)),
            Sample((-0.1, -0.4)),
        ]
        b1 = bivariate_belief
        for s in samples:
            b1 = update(b1, s)
        b2 = bivariate_belief
        for s in reversed(samples):
            b2 = update(b2, s)
        np.testing.assert_allclose(b1.log_posterior, b2.log_posterior, atol=1e-8)

    def test_dimension_mismatch(self, bivariate_belief):
        with pytest.raises(BeliefError):
            update(bivariate_belief, Sample((0.0, 0.0, 0.0)))

    def test_posterior_after_batch_matches_update(self, bivariate_belief):
        rng = np.random.default_rng(4)
        b = bivariate_belief
        for target in (0, 1):
            vals = rng.normal(size=(5, 2))
            after = log_posterior_after_batch(b, vals, target)
            for m in range(5):
                row = vals[m].copy()
                s = Sample(tuple(row), InterventionSpec(target=target, value=float(row[target])))
                b2 = update(b, s)
                np.testing.assert_allclose(after[:, m], b2.log_posterior, atol=1e-10)


class TestSampling:
    def test_clamped_coordinate_exact(self, bivariate_belief):
        g = bivariate_belief.universe[2]
        spec = InterventionSpec(target=0, value=1.234567)
        s = sample_interventional(g, bivariate_belief, spec, seed=0)
        assert s.values[0] == 1.234567

    def test_deterministic_given_seed(self, bivariate_belief):
        g = bivariate_belief.universe[1]
        spec = InterventionSpec(target=1, value=0.5)
        a = sample_interventional(g, bivariate_belief, spec, seed=99)
        b = sample_interventional(g, bivariate_belief, spec, seed=99)
        assert a == b

    def test_do_y_leaves_x_at_marginal_under_forward_graph(self, bivariate_belief):
        # under X0 -> X1 and do(X1 = v), X0 follows its root predictive
        b = bivariate_belief
        g = next(g for g in b.universe if g.edges == ((0, 1),))
        spec = InterventionSpec(target=1, value=2.0)
        rng = np.random.default_rng(7)
        draws = sample_interventional_batch(g, b, spec, 2000, rng)[:, 0]
        root_draws = b.caches[(0, ())].sample_predictive(
            2000, np.random.default_rng(8)
        ) + b.centering[0]
        _, p_value = stats.ks_2samp(draws, root_draws)
        assert p_value > 0.01

    def test_do_x_child_mean_matches_predictive(self, bivariate_belief):
        b = bivariate_belief
        g = next(g for g in b.universe if g.edges == ((0, 1),))
        x = 0.8
        spec = InterventionSpec(target=0, value=x)
        rng = np.random.default_rng(9)
        draws = sample_interventional_batch(g, b, spec, 10_000, rng)[:, 1]
        cache = b.caches[(1, (0,))]
        mean_c, var_f = cache.snapshot.predict_batch(np.array([[x - b.centering[0]]]))
        mu = float(mean_c[0]) + b.centering[1]
        sd = math.sqrt(float(var_f[0]) + cache.snapshot.hyperparams.noise_variance)
        assert abs(float(np.mean(draws)) - mu) < 3.0 * sd / math.sqrt(10_000)

    def test_observational_sampling_allowed(self, bivariate_belief):
        s = sample_interventional(
            bivariate_belief.universe[0], bivariate_belief, OBSERVATIONAL, seed=1
        )
        assert s.intervention.is_observational


class TestInitialize:
    def test_d2_key_inventory(self, bivariate_belief):
        assert set(bivariate_belief.keys) == {(0, ()), (0, (1,)), (1, ()), (1, (0,))}
        assert set(bivariate_belief.hyperparams) == {(0, (1,)), (1, (0,))}

    def test_key_count_formula(self, chain_belief):
        # sum over nodes of 2^(d-1) distinct parent sets
        d = 3
        assert len(chain_belief.keys) == d * 2 ** (d - 1)

    def test_centering_zeroes_observational_means(self, bivariate_belief):
        V = np.array([s.values for s in bivariate_belief.data]) - bivariate_belief.centering
        np.testing.assert_allclose(V.mean(axis=0), 0.0, atol=1e-12)

    def test_too_few_samples_names_n_min(self):
        with pytest.raises(BeliefError, match="n_min=5"):
            initialize(make_obs(OBS_2D[:3]))

    def test_rejects_interventional_samples(self):
        obs = make_obs(OBS_2D)
        obs[0] = Sample((1.0, 0.5), InterventionSpec(target=0, value=1.0))
        with pytest.raises(BeliefError, match="observational"):
            initialize(obs)

    def test_deterministic_given_seed(self):
        b1 = initialize(make_obs(OBS_2D), seed=11)
        b2 = initialize(make_obs(OBS_2D), seed=11)
        assert b1.hyperparams == b2.hyperparams
        np.testing.assert_array_equal(b1.log_posterior, b2.log_posterior)


class TestEdgeMarginals:
    def test_uniform_d2_marginals(self):
        b = empty_belief(2)
        m = edge_marginals(b)
        np.testing.assert_allclose(m, [[0, 1 / 3], [1 / 3, 0]], atol=1e-12)

    def test_degenerate_posterior_returns_adjacency(self):
        universe = tuple(enumerate_dags(2))
        b = empty_belief(2, universe=universe)
        lp = np.full(3, -np.inf)
        lp[2] = 0.0
        object.__setattr__(b, "log_posterior", lp)
        np.testing.assert_array_equal(edge_marginals(b), np.array(universe[2].adjacency, float))

    def test_diagonal_zero(self, chain_belief):
        assert np.all(np.diag(edge_marginals(chain_belief)) == 0.0)


class TestDecomposability:
    def test_shared_parent_sets_share_cache_objects(self, chain_belief):
        # two graphs sharing (node, parent-set) read the same cache entry
        b = chain_belief
        g1 = next(g for g in b.universe if g.edges == ((0, 1), (1, 2)))
        g2 = next(g for g in b.universe if g.edges == ((1, 2),))
        k = (2, (1,))
        assert g1.parent_sets[2] == g2.parent_sets[2] == (1,)
        i1 = b.key_index[(2, g1.parent_sets[2])]
        i2 = b.key_index[(2, g2.parent_sets[2])]
        assert i1 == i2
        assert b.caches[k].log_evidence == b.caches[k].log_evidence

    def test_total_evidence_is_sum_of_node_terms(self, chain_belief):
        b = chain_belief
        totals = b.graph_evidence_totals()
        for g, total in zip(b.universe, totals):
            manual = sum(b.caches[(i, g.parent_sets[i])].log_evidence for i in range(b.d))
            assert total == pytest.approx(manual, abs=1e-12)
