import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branching_mera.circuit import CircuitSpec
from branching_mera.errors import DegenerateInputError, InvalidInputError, ResourceLimitError
from branching_mera.scaling import (CSV_COLUMNS, EntropyCurve, aggregate, block_offsets,
                                    block_sites, default_L_list, entropy_curve, fit_forms)


def test_identity_curve_is_zero():
    c = entropy_curve(CircuitSpec(T=6, gate_mode="identity"), n_seeds=2, n_offsets=3)
    assert np.all(c.mean == 0) and np.all(c.std == 0)


def test_curve_deterministic():
    spec = CircuitSpec(T=7, gate_mode="random_gaussian", seed=11)
    a = entropy_curve(spec, n_seeds=3, n_offsets=4)
    b = entropy_curve(spec, n_seeds=3, n_offsets=4)
    assert np.array_equal(a.samples, b.samples)
    assert a.to_csv() == b.to_csv()


def test_parallel_matches_serial():
    spec = CircuitSpec(T=6, gate_mode="random_gaussian", seed=2)
    a = entropy_curve(spec, n_seeds=3, n_offsets=2)
    b = entropy_curve(spec, n_seeds=3, n_offsets=2, workers=2)
    assert np.array_equal(a.samples, b.samples)


def test_full_branching_curve_monotone():
    c = entropy_curve(CircuitSpec(T=8, gate_mode="random_gaussian", seed=0), n_seeds=10,
                      n_offsets=8)
    m, sd = c.mean, c.std
    for i in range(len(m) - 1):
        pooled = np.sqrt((sd[i] ** 2 + sd[i + 1] ** 2) / 2)
        assert m[i + 1] >= m[i] - 2 * pooled


def test_block_geometry():
    spec = CircuitSpec(T=4)
    assert list(block_sites(spec, 3, 14)) == [14, 15, 0]
    assert block_offsets(spec, 4) == [0, 4, 8, 12]
    assert default_L_list(spec) == [2, 4, 8]
    spec2 = CircuitSpec(dim=2, T=2, gate_mode="random_gaussian")
    assert sorted(block_sites(spec2, 2, 3)) == [0, 3, 12, 15]


def test_fit_exact_log():
    L = 2.0 ** np.arange(1, 10)
    r = fit_forms(L, 1, 2 * np.log2(L) + 0.5)
    assert r.selected == "log"
    assert abs(r.fits["log"].coefficients["a"] - 2) < 1e-10
    assert r.fits["log"].rss < 1e-18


def test_fit_exact_log_squared():
    L = 2.0 ** np.arange(1, 10)
    r = fit_forms(L, 1, 3 * np.log2(L) ** 2 + 1)
    assert r.selected == "log2"
    assert abs(r.fits["log2"].coefficients["a"] - 3) < 1e-10
    assert abs(r.fits["log2"].coefficients["c"] - 1) < 1e-9


def test_fit_2d_forms():
    L = np.arange(2, 17, dtype=float)
    for name, y in (("linear", 4 * L + 1), ("Llog", L * np.log2(L)), ("quadratic", 0.3 * L ** 2)):
        assert fit_forms(L, 2, y).selected == name


def test_noisy_linear_selected():
    rng = np.random.default_rng(123)
    L = 2.0 ** np.arange(2, 10)
    hits = sum(fit_forms(L, 1, 0.7 * L + rng.normal(0, 0.01, L.size)).selected == "linear"
               for _ in range(100))
    assert hits >= 99


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.sampled_from(["log", "log2", "linear"]),
       st.floats(0.2, 5.0))
def test_selection_invariant_under_offset(c, form, a):
    L = 2.0 ** np.arange(1, 10)
    x = {"log": np.log2(L), "log2": np.log2(L) ** 2, "linear": L}[form]
    y = a * x + np.sin(L)  # fixed non-trivial perturbation
    r0 = fit_forms(L, 1, y)
    r1 = fit_forms(L, 1, y + c)
    assert r0.selected == r1.selected
    assert abs(r0.fits[form].coefficients["a"] - r1.fits[form].coefficients["a"]) < 1e-8


def _welford(xs):
    n, mean, m2 = 0, 0.0, 0.0
    for x in xs:
        n += 1
        d = x - mean
        mean += d / n
        m2 += d * (x - mean)
    return mean, np.sqrt(m2 / (n - 1))


def test_aggregate_matches_streaming():
    rng = np.random.default_rng(4)
    samples = rng.gamma(2.0, 3.0, size=(7, 5, 6))
    rows = aggregate([1, 2, 4, 8, 16], samples)
    for i, (L, mean, std, count) in enumerate(rows):
        wm, ws = _welford(samples[:, i, :].ravel())
        assert count == 42
        assert abs(mean - wm) < 1e-12 and abs(std - ws) < 1e-12


def test_fit_input_errors():
    with pytest.raises(InvalidInputError):
        fit_forms([1, 2, 4], 1, [0, 1, 2])
    with pytest.raises(InvalidInputError):
        fit_forms([1, 2, 2, 2, 4], 1, [0, 1, 1, 1, 2])
    with pytest.raises(DegenerateInputError):
        # distinct but numerically indistinguishable block sizes
        fit_forms(1e15 + np.arange(4.0), 1, [0.0, 1, 2, 3])


def test_tie_sets_degenerate_flag():
    L = 2.0 ** np.arange(1, 6)
    r = fit_forms(L, 1, np.full(L.size, 3.0))
    assert r.degenerate and r.selected is None


def test_csv_roundtrip():
    c = entropy_curve(CircuitSpec(T=5, tree=(2, 1, 2, 1, 2), gate_mode="random_gaussian",
                                  seed=9), n_seeds=2, n_offsets=3)
    text = c.to_csv()
    assert text.splitlines()[1].split(",") == list(CSV_COLUMNS)
    back = EntropyCurve.from_csv(text)
    assert back.spec == c.spec
    assert np.allclose(back.mean, c.mean, rtol=1e-11, atol=0)
    assert back.to_csv() == text


def test_curve_guards():
    with pytest.raises(ResourceLimitError):
        entropy_curve(CircuitSpec(T=14, gate_mode="random_gaussian"))
    with pytest.raises(InvalidInputError):
        entropy_curve(CircuitSpec(T=4, gate_mode="random_gaussian"), L_list=[2, 16])
    with pytest.raises(InvalidInputError):
        entropy_curve(CircuitSpec(T=4, gate_mode="random_haar"))
