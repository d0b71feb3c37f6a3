"""Float batch evaluation agrees with exact evaluation; chain audits."""

import os
import random
import subprocess
import sys
from fractions import Fraction as F

import numpy as np

from germglue.atlas import GermTransition, run_glue_pipeline
from germglue.jets import Jet, PolyMap, identity_map, jet_add, jet_const, map_eval
from germglue.numeval import batch_eval_map, float_transition_audit
from germglue.sampling import _eval_numpy, batch_eval, points_to_array, term_table
from germglue.scalars import Coeff

from .test_atlas import identity_atlas, scaling_atlas


def random_jet(rng: random.Random, num_vars: int, order: int, max_terms: int) -> Jet:
    terms = {}
    for _ in range(max_terms):
        exp = [0] * num_vars
        budget = rng.randrange(order + 1)
        for _ in range(budget):
            exp[rng.randrange(num_vars)] += 1
        value = Coeff(F(rng.randrange(-9, 10), rng.randrange(1, 7)),
                      F(rng.randrange(-9, 10), rng.randrange(1, 7)))
        if not value.is_zero():
            terms[tuple(exp)] = value
    return Jet(num_vars, order, terms)


def random_points(rng: random.Random, count: int, num_vars: int):
    return [
        tuple(Coeff(F(rng.randrange(-40, 41), 64), F(rng.randrange(-40, 41), 64))
              for _ in range(num_vars))
        for _ in range(count)
    ]


def test_batch_map_matches_exact_eval():
    rng = random.Random(11)
    for _ in range(5):
        comps = [random_jet(rng, num_vars=3, order=4, max_terms=12) for _ in range(2)]
        f = PolyMap(3, comps)
        points = random_points(rng, 17, 3)
        got = batch_eval_map(f, points_to_array(points))
        for row, pt in zip(got, points):
            exact = map_eval(f, pt)
            want = np.array([complex(c.re, c.im) for c in exact])
            assert np.abs(row - want).max() < 1e-9


def test_numpy_kernel_matches_active_backend():
    rng = random.Random(3)
    f = random_jet(rng, num_vars=2, order=5, max_terms=15)
    pts = points_to_array(random_points(rng, 25, 2))
    exps, coeffs = term_table(f)
    reference = _eval_numpy(exps, coeffs, pts)
    assert np.abs(batch_eval(f, pts) - reference).max() < 1e-12


def test_backend_env_flag_selects_numpy():
    code = "import germglue.sampling as s; print(s.active_backend())"
    env = dict(os.environ, GERMGLUE_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_float_audit_exact_cocycle_has_tiny_residuals():
    _, atlas = run_glue_pipeline(scaling_atlas(), samples=10)
    audit = float_transition_audit(atlas.cover, chains=40, seed=5)
    assert audit["ok"]
    assert audit["violations"] == 0
    assert audit["chains_verified"] == 40
    assert audit["max_residual"] < 1e-12
    assert audit["backend"] in ("numba", "numpy")


def test_float_audit_flags_tampered_transition():
    inp = identity_atlas()
    _, atlas = run_glue_pipeline(inp, samples=10)
    old = inp.transitions[("A", "C")]
    drifted = identity_map(2, 3)
    comps = list(drifted.components)
    comps[0] = jet_add(comps[0], jet_const(2, 3, Coeff(F(1, 7))))
    inp.transitions[("A", "C")] = GermTransition(
        "A", "C", old.domain, PolyMap(2, comps)
    )
    audit = float_transition_audit(atlas.cover, chains=60, seed=2)
    assert not audit["ok"]
    assert audit["violations"] > 0
    assert audit["max_residual"] > 1e-3


def test_float_audit_deterministic_for_seed():
    _, atlas = run_glue_pipeline(scaling_atlas(), samples=10)
    first = float_transition_audit(atlas.cover, chains=30, seed=9)
    second = float_transition_audit(atlas.cover, chains=30, seed=9)
    assert first == second
