import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subfrac.errors import InvalidInputError
from subfrac.families import annulus_family, sample, support_box
from subfrac.grid import SampledFunction
from subfrac.groups import parse_group, parse_norm, quasi_norm
from subfrac.inequalities import (complement_floor_constant, complement_integral_check,
                                  elementary_inequality_check, elementary_slack, hardy_check,
                                  level_set_profile, levelset_lower_bound, picone_check,
                                  picone_remainder, sequence_lemma_check, sobolev_invariance,
                                  sobolev_ratio, sobolev_ratio_scan)
from subfrac.nonlocal_ops import FracParams, QuadratureConfig

LINE, EUC = parse_group("abelian:1"), parse_norm("euclidean")
CORR = QuadratureConfig(near_mode="local_correction")


# --- elementary inequality ------------------------------------------------

@settings(max_examples=500, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 1), st.floats(1.0001, 10))
def test_elementary_slack_nonnegative(re, im, t, p):
    a = complex(re, im)
    slack = elementary_slack(a, t, p)
    scale = abs(a - t) ** p + (1 - t) ** (p - 1) * (abs(a) ** p + t)
    assert slack >= -1e-12 * max(scale, 1.0)


def test_elementary_equality_at_a_equal_one():
    # a = 1: |1 - t|^p = (1 - t)^{p-1} (1 - t)
    t = np.linspace(0, 1, 11)
    assert np.allclose(elementary_slack(1.0, t, 2.7), 0.0, atol=1e-15)


def test_elementary_batch_check():
    rep = elementary_inequality_check(samples=50_000, seed=3)
    assert rep.passed and rep.extra["min_slack"] >= -1e-12


# --- Picone ---------------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_picone_remainder_pointwise(p, rng):
    w = rng.uniform(0.05, 3.0, 60)
    u = rng.normal(size=60)
    assert picone_remainder(w, u, p).min() >= -1e-10


def test_picone_remainder_vanishes_for_proportional_functions():
    w = np.linspace(0.5, 2.0, 7)
    R = picone_remainder(w, 3.0 * w, 2.0)
    assert np.allclose(R, 0.0, atol=1e-12)


def test_picone_integrated_form(rng):
    P = FracParams(0.4, 1.7, 1.0)
    n = 24
    om = SampledFunction("abelian:1", [-1], [1], n, rng.uniform(0.2, 2.0, n), 0)
    u = SampledFunction("abelian:1", [-1], [1], n, rng.normal(size=n), 0)
    rep = picone_check(LINE, EUC, P, om, u)
    assert rep.passed and rep.extra["pointwise_ok"] and rep.rhs >= rep.lhs


def test_picone_rejects_nonpositive_omega():
    P = FracParams(0.4, 2.0, 1.0)
    om = SampledFunction("abelian:1", [-1], [1], 4, [1.0, 0.0, 1.0, 1.0], 0)
    with pytest.raises(InvalidInputError):
        picone_check(LINE, EUC, P, om, om)


# --- level sets and the sequence lemma -------------------------------------

def test_level_set_profile_exact_counts():
    vals = np.array([0.0, 0.3, 1.5, 5.0, 0.0])
    u = SampledFunction("abelian:1", [0], [5], 5, vals, 1)
    prof = level_set_profile(u)
    assert prof.identities_hold()
    assert prof.support_measure == 3.0
    assert prof.a_at(0) == 2.0  # |u| > 1
    assert prof.a_at(2) == 1.0  # |u| > 4
    assert prof.a_at(3) == 0.0
    assert prof.a_at(-50) == 3.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=3, max_size=40))
def test_level_set_identities_property(vals):
    vals = [0.0] + vals + [0.0]
    u = SampledFunction("abelian:1", [0], [1], len(vals), vals, 1)
    assert level_set_profile(u).identities_hold()


def test_levelset_ratio_positive():
    P = FracParams(0.25, 2.0, 1.0)
    for f in annulus_family(LINE, EUC, 4):
        lo, hi, n = support_box(LINE, EUC, f.outer, 256)
        rep = levelset_lower_bound(LINE, EUC, P, sample(LINE, f, lo, hi, n), CORR)
        assert rep.extra["identities"] and rep.extra["ratio"] > 0


def test_sequence_lemma_window_and_constant():
    P = FracParams(0.25, 2.0, 1.0)
    a = [1.0, 0.5, 0.25, 0.0]
    w = sequence_lemma_check(a, 4.0, P)
    c = sequence_lemma_check(a, 4.0, P, extend="constant")
    assert np.isfinite(w.extra["ratio"]) and np.isfinite(c.extra["ratio"])
    assert c.extra["ratio"] <= w.extra["ratio"]  # the shared tail pulls the ratio toward 1
    single = sequence_lemma_check([1.0], 4.0, P)
    assert single.extra["degenerate"]
    assert np.isfinite(sequence_lemma_check([1.0], 4.0, P, extend="constant").extra["ratio"])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=15), st.floats(1.1, 20))
def test_sequence_lemma_ratio_bounded(raw, T):
    P = FracParams(0.25, 2.0, 1.0)
    a = np.sort(raw)[::-1]
    rep = sequence_lemma_check(a, T, P, extend="constant")
    assert 0 < rep.extra["ratio"] < np.inf


def test_sequence_lemma_validates():
    P = FracParams(0.25, 2.0, 1.0)
    with pytest.raises(InvalidInputError):
        sequence_lemma_check([0.1, 0.5], 2.0, P)
    with pytest.raises(InvalidInputError):
        sequence_lemma_check([0.5, 0.1], 1.0, P)


# --- complement integral ---------------------------------------------------

def test_floor_constant_line():
    # int_{|y|>d} |y|^{-1-sp} dy = 2 d^{-sp}/sp with |K| = 2d
    P = FracParams(0.3, 2.0, 1.0)
    assert complement_floor_constant(LINE, EUC, P) == pytest.approx(2 / P.sp * 2 ** P.sp)


@pytest.mark.parametrize("gid,nid,n", [("abelian:1", "euclidean", 400), ("abelian:2", "euclidean", 48),
                                       ("heisenberg1", "koranyi", 32)])
def test_complement_equality_on_balls(gid, nid, n):
    g, spec = parse_group(gid), parse_norm(nid)
    P = FracParams.for_group(g, 0.4, 2.0)
    half = np.array([2.0, 2.0, 1.0]) if g.law == "heisenberg" else np.full(g.N, 2.0)
    K = SampledFunction.from_function(g, lambda X: (quasi_norm(g, spec, X) < 1).astype(float),
                                      -half, half, n)
    rep = complement_integral_check(g, spec, P, K, np.full(g.N, 1e-9))
    assert abs(rep.extra["relative_margin"]) < 0.01


def test_complement_outside_K_is_infinite():
    P = FracParams(0.4, 2.0, 1.0)
    vals = np.zeros(20)
    vals[5:8] = 1
    K = SampledFunction("abelian:1", [-1], [1], 20, vals, 1)
    rep = complement_integral_check(LINE, EUC, P, K, [0.9])
    assert rep.rhs == np.inf and rep.passed


# --- Hardy and Sobolev -----------------------------------------------------

def test_hardy_line_family():
    P = FracParams(0.25, 2.0, 1.0)
    for f in annulus_family(LINE, EUC, 3):
        lo, hi, n = support_box(LINE, EUC, f.outer, 256)
        rep = hardy_check(LINE, EUC, P, 0.25, sample(LINE, f, lo, hi, n), CORR)
        assert rep.passed and rep.extra["ratio"] > 1


def test_hardy_require_zero_policy():
    P = FracParams(0.25, 2.0, 1.0)
    u = SampledFunction.from_function(LINE, lambda X: np.maximum(0, 1 - X[:, 0] ** 2), [-2], [2], 41)
    with pytest.raises(InvalidInputError):
        hardy_check(LINE, EUC, P, 0.25, u, mu=1.0, policy="require_zero")
    assert hardy_check(LINE, EUC, P, 0.25, u, mu=0.1).passed


def test_sobolev_ratio_scale_invariant_line():
    P = FracParams(0.25, 2.0, 1.0)
    f = annulus_family(LINE, EUC, 1)[0]
    rep = sobolev_invariance(LINE, EUC, P, f, 512, shift=[0.3], cfg=CORR)
    assert rep.passed and rep.lhs < 1e-3


def test_sobolev_scan_min_is_reported():
    P = FracParams(0.25, 2.0, 1.0)
    fam = []
    for f in annulus_family(LINE, EUC, 3):
        lo, hi, n = support_box(LINE, EUC, f.outer, 128)
        fam.append(sample(LINE, f, lo, hi, n))
    rep = sobolev_ratio_scan(LINE, EUC, P, fam)
    assert rep.rhs == min(rep.extra["ratios"]) > 0


def test_sobolev_requires_subcritical():
    P = FracParams(0.5, 2.0, 1.0)
    u = SampledFunction.from_function(LINE, lambda X: np.maximum(0, 1 - X[:, 0] ** 2), [-2], [2], 41)
    with pytest.raises(InvalidInputError):
        sobolev_ratio(LINE, EUC, P, u)
