"""Seeded exact samplers and the float batch evaluator."""

from __future__ import annotations

import random
import subprocess
import sys
from fractions import Fraction

import numpy as np

from germglue.jets import jet_eval, jet_from_terms
from germglue.regions import Polydisc, TubeDomain, point_in_polydisc, point_in_tube
from germglue.sampling import (
    active_backend,
    batch_eval,
    points_to_array,
    sample_in_polydisc,
    sample_in_tube,
    sample_on_zero_section,
    term_table,
)
from germglue.scalars import Coeff


def frac(p, q=1):
    return Coeff(Fraction(p, q))


def test_samples_are_exact_and_inside():
    rng = random.Random(7)
    p = Polydisc([frac(1, 2), frac(-1)], [Fraction(1, 3), Fraction(2)])
    for _ in range(200):
        pt = sample_in_polydisc(rng, p)
        assert all(isinstance(c.re, Fraction) for c in pt)
        assert point_in_polydisc(pt, p, strict=True)


def test_tube_samples_inside():
    rng = random.Random(11)
    t = TubeDomain("c", Polydisc([frac(0)], [Fraction(1)]), 2, Fraction(1, 4))
    for _ in range(100):
        pt = sample_in_tube(rng, t)
        assert point_in_tube(pt, t, strict=True)
    zs = sample_on_zero_section(rng, t)
    assert zs[1].is_zero() and zs[2].is_zero()
    assert point_in_tube(zs, t, strict=False)


def test_sampling_deterministic_under_seed():
    p = Polydisc([frac(0)], [Fraction(1)])
    a = [sample_in_polydisc(random.Random(3), p) for _ in range(1)]
    b = [sample_in_polydisc(random.Random(3), p) for _ in range(1)]
    assert a == b


def _example_jet():
    return jet_from_terms(
        2,
        4,
        [
            ((0, 0), Coeff(Fraction(1, 3))),
            ((1, 0), Coeff(Fraction(-2), Fraction(1, 2))),
            ((1, 2), Coeff(Fraction(0), Fraction(1))),
            ((0, 3), Coeff(Fraction(5, 7))),
        ],
    )


def test_term_table_shape():
    f = _example_jet()
    exps, coeffs = term_table(f)
    assert exps.shape == (4, 2)
    assert coeffs.dtype == np.complex128


def test_batch_eval_matches_exact_eval():
    f = _example_jet()
    rng = random.Random(5)
    p = Polydisc([frac(0), frac(0)], [Fraction(1), Fraction(1)])
    pts = [sample_in_polydisc(rng, p) for _ in range(64)]
    got = batch_eval(f, points_to_array(pts))
    for value, pt in zip(got, pts):
        exact = jet_eval(f, pt)
        assert abs(value - complex(exact.re, exact.im)) < 1e-9


def test_numpy_fallback_matches(tmp_path):
    # run the same evaluation in a subprocess with the fallback forced
    code = (
        "import os\n"
        "os.environ['GERMGLUE_NO_NUMBA'] = '1'\n"
        "import numpy as np\n"
        "from fractions import Fraction\n"
        "from germglue.jets import jet_from_terms\n"
        "from germglue.sampling import batch_eval, active_backend\n"
        "from germglue.scalars import Coeff\n"
        "assert active_backend() == 'numpy'\n"
        "f = jet_from_terms(2, 4, [((1, 0), Coeff(Fraction(-2), Fraction(1, 2))),"
        " ((1, 2), Coeff(Fraction(0), Fraction(1)))])\n"
        "pts = np.array([[0.5 + 0.25j, -0.125j], [1.0, 1.0]])\n"
        "print(repr(batch_eval(f, pts).tolist()))\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    values = eval(out.stdout.strip())
    f = jet_from_terms(
        2,
        4,
        [
            ((1, 0), Coeff(Fraction(-2), Fraction(1, 2))),
            ((1, 2), Coeff(Fraction(0), Fraction(1))),
        ],
    )
    here = batch_eval(
        f, np.array([[0.5 + 0.25j, -0.125j], [1.0, 1.0]], dtype=np.complex128)
    )
    assert np.allclose(np.array(values), here)


def test_active_backend_reports():
    assert active_backend() in ("numba", "numpy")
