"""Seeded field families and census runners shared by the regression tests.

FROZEN holds twice the maxima measured with CENSUS_SEED on CENSUS_GRID;
regenerate with ``python3 tests/census.py`` only when the numerics change on
purpose.
"""

from __future__ import annotations

import numpy as np

from kgdirac.operators import make_params
from kgdirac.spectral import GridSpec
from kgdirac.weighted import (
    EstimateReport,
    bessel_census,
    commutator_census,
    embedding_census,
    linear_growth_diag,
    nonlinear_ratio_diag,
    random_nonvanishing_field,
    random_schwartz_field,
    small_time_diag,
    ste1_census,
    weighted_inf,
    y_growth_diag,
)

CENSUS_SEED = 20240601
CENSUS_GRID = GridSpec(1, 16.0, 256)
FAMILY = 50
PARAMS = make_params(1.0, 1)  # k=1, m=3, n=2, J=9
LINEAR_TIMES = np.linspace(0.0, 1.0, 6)
Y_TIMES = np.linspace(0.0, 5.0, 6)
SMALL_TIMES = 0.1 * 2.0 ** -np.arange(8)
COMMUTATOR_ELLS = (1, 2, 3)

FROZEN = {
    "bessel_L2": 2.2,
    "bessel_Linf": 2.02,
    "ste1": 0.0641,
    "embedding": 0.941,
    "linear_growth": 2.0,
    "y_growth": 2.0,
    "small_time": 0.14,
    "nonlinear": 9.93e-104,
    "commutator_l1": 1.66,
    "commutator_l2": 4.22,
    "commutator_l3": 8.82,
}


def families(seed: int = CENSUS_SEED, size: int = FAMILY):
    rng = np.random.default_rng(seed)
    g = CENSUS_GRID
    scalar = [random_schwartz_field(g, 1, rng) for _ in range(size)]
    pair = [random_schwartz_field(g, 2, rng) for _ in range(size)]
    nonvanishing = [random_nonvanishing_field(g, 2, PARAMS.n, rng) for _ in range(size)]
    return scalar, pair, nonvanishing


def _merged(name, parts):
    rep = EstimateReport(name)
    for i, part in enumerate(parts):
        rep.rows.extend((f"f{i}", *r[1:]) for r in part.rows)
    return rep


def run_all(seed: int = CENSUS_SEED, size: int = FAMILY) -> dict[str, EstimateReport]:
    scalar, pair, nonvanishing = families(seed, size)
    p = PARAMS
    out = {
        "bessel_L2": bessel_census(scalar, p.n, "2"),
        "bessel_Linf": bessel_census(scalar, p.n, "inf"),
        "ste1": ste1_census(pair, p),
        "embedding": embedding_census(pair, p),
        "linear_growth": _merged("linear_growth", [linear_growth_diag(f, p, LINEAR_TIMES) for f in pair]),
    }
    ys = [y_growth_diag(f, p, Y_TIMES) for f in pair]
    out["y_growth"] = _merged("y_growth", ys)
    out["y_growth"].fitted_exponent = max(r.fitted_exponent for r in ys)
    st = [small_time_diag(f, p, SMALL_TIMES) for f in pair]
    out["small_time"] = _merged("small_time", st)
    out["small_time"].fitted_exponent = min(r.fitted_exponent for r in st)
    eta = 1.0 / min(weighted_inf(u, p.n) for u in nonvanishing)
    out["nonlinear"] = nonlinear_ratio_diag(nonvanishing, p, eta)
    for ell in COMMUTATOR_ELLS:
        out[f"commutator_l{ell}"] = commutator_census(scalar, ell)
    return out


if __name__ == "__main__":
    import time

    t = time.perf_counter()
    reps = run_all()
    print(f"elapsed {time.perf_counter() - t:.1f}s")
    for k, r in reps.items():
        print(f'    "{k}": {2 * r.max_ratio:.3g},  # family {r.family_size}, exponent {r.fitted_exponent}')
