import math

import numpy as np
import pytest

from abcd.belief import InterventionSpec
from abcd.dags import Dag
from abcd.envs import (
    GroundTruthScm,
    Mechanism,
    RootDistribution,
    ScmError,
    bivariate_tanh_scm,
    chain_tanh_scm,
    compile_mechanism,
    sample_truth,
    sample_truth_batch,
)
from abcd.seeds import substream


class TestExpressionGrammar:
    def test_vocabulary(self):
        fn = compile_mechanism("2*tanh(p0) + sin(p1) - 0.5*pow2(p0)", 2)
        cols = np.array([[0.5, 1.0], [-1.2, 0.3]])
        expected = 2 * np.tanh(cols[:, 0]) + np.sin(cols[:, 1]) - 0.5 * cols[:, 0] ** 2
        np.testing.assert_allclose(fn(cols), expected, atol=1e-12)

    def test_constants_and_unary_minus(self):
        fn = compile_mechanism("-p0 + 3.5", 1)
        np.testing.assert_allclose(fn(np.array([[2.0]])), [1.5], atol=1e-12)

    def test_rejects_unknown_names_and_calls(self):
        for expr in ("exp(p0)", "__import__('os')", "p0.real", "q0", "p0 ** 2", "p0 / 2",
                     "lambda: 1", "[1,2]"):
            with pytest.raises(ScmError):
                compile_mechanism(expr, 1)

    def test_rejects_out_of_arity_placeholder(self):
        with pytest.raises(ScmError, match="exceeds parent count"):
            compile_mechanism("p1", 1)

    def test_rejects_bad_syntax(self):
        with pytest.raises(ScmError):
            compile_mechanism("2*", 1)


class TestScmConstruction:
    def test_missing_mechanism_names_node(self):
        graph = Dag.from_edges(2, [(0, 1)])
        with pytest.raises(ScmError, match="node 1"):
            GroundTruthScm(graph, {}, {0: RootDistribution(0.0, 1.0)})

    def test_missing_root_distribution(self):
        graph = Dag.from_edges(2, [(0, 1)])
        with pytest.raises(ScmError, match="root node 0"):
            GroundTruthScm(graph, {1: Mechanism("tanh(p0)", 0.1)}, {})

    def test_json_round_trip(self):
        scm = chain_tanh_scm(3, 0.25)
        clone = GroundTruthScm.from_json(scm.to_json())
        assert clone.graph == scm.graph
        assert clone.mechanisms == scm.mechanisms
        assert clone.root_distributions == scm.root_distributions


class TestSampling:
    def test_clamped_coordinate(self):
        scm = bivariate_tanh_scm("sd")
        s = sample_truth(scm, InterventionSpec(target=0, value=0.625), seed=0)
        assert s.values[0] == 0.625

    def test_zero_noise_chain_is_exact(self):
        graph = Dag.from_edges(2, [(0, 1)])
        scm = GroundTruthScm(
            graph,
            {1: Mechanism("3*p0", 0.0)},
            {0: RootDistribution(0.0, 1.0)},
        )
        s = sample_truth(scm, InterventionSpec(target=0, value=2.0), seed=5)
        assert s.values[1] == 6.0

    def test_zero_noise_draws_identical(self):
        graph = Dag.from_edges(2, [(0, 1)])
        scm = GroundTruthScm(
            graph, {1: Mechanism("tanh(p0)", 0.0)}, {0: RootDistribution(0.5, 0.0)}
        )
        a = sample_truth(scm, InterventionSpec(), seed=1)
        b = sample_truth(scm, InterventionSpec(), seed=99)
        assert a.values == b.values

    def test_deterministic_given_seed(self):
        scm = chain_tanh_scm(3, 0.2)
        a = sample_truth(scm, InterventionSpec(target=1, value=0.4), seed=123)
        b = sample_truth(scm, InterventionSpec(target=1, value=0.4), seed=123)
        assert a == b

    def test_observational_moments_of_tanh_benchmark(self):
        # X ~ N(0,1), Y = 2 tanh(X) + eps: E[Y] ~ 0 and |Y| bounded near 2
        scm = bivariate_tanh_scm("variance")
        rng = substream(7, "obs")
        draws = sample_truth_batch(scm, InterventionSpec(), 4000, rng)
        ys = draws[:, 1]
        assert abs(float(np.mean(ys))) < 0.05
        assert float(np.max(np.abs(ys))) < 2.0 + 5.0 * math.sqrt(0.1)

    def test_do_x_zero_gives_pure_noise(self):
        # tanh(0) = 0, so Y | do(X=0) ~ N(0, 0.1) under the variance reading
        scm = bivariate_tanh_scm("variance")
        rng = substream(8, "dox")
        ys = sample_truth_batch(scm, InterventionSpec(target=0, value=0.0), 4000, rng)[:, 1]
        assert abs(float(np.mean(ys))) < 4.0 * math.sqrt(0.1 / 4000)
        assert float(np.var(ys)) == pytest.approx(0.1, rel=0.15)

    def test_intervention_cuts_upstream_dependence(self):
        # chain X0 -> X1 -> X2 under do(X1): X0 and X2 become independent
        scm = chain_tanh_scm(3, 0.2)
        rng = substream(9, "cut")
        draws = sample_truth_batch(scm, InterventionSpec(target=1, value=0.7), 4000, rng)
        corr = np.corrcoef(draws[:, 0], draws[:, 2])[0, 1]
        assert abs(corr) < 0.05

    def test_noise_readings(self):
        assert bivariate_tanh_scm("variance").mechanisms[1].noise_sd == pytest.approx(
            math.sqrt(0.1)
        )
        assert bivariate_tanh_scm("sd").mechanisms[1].noise_sd == 0.1
        with pytest.raises(ScmError):
            bivariate_tanh_scm("bogus")
