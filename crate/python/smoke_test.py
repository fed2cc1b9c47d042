"""Smoke test for the impulse_game extension module.

Build and install first, e.g.
    pip install maturin
    maturin develop --manifest-path crates/py/Cargo.toml
"""

import math

import impulse_game as ig


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    params = ig.Params()
    eq = ig.Equilibrium(params)

    ell1, alpha, beta, ell2 = eq.thresholds(0.0)
    expected = (3.3822, 4.5111, 5.5731, 7.0305)
    assert all(close(g, e, 1e-2) for g, e in zip((ell1, alpha, beta, ell2), expected))
    assert eq.region(0.0, 5.0) == "interior"
    assert eq.impulse_map(0.0, 5.0) is None
    target, xi = eq.impulse_map(0.0, 8.0)
    assert close(target, beta, 1e-12) and close(xi, beta - 8.0, 1e-12)

    path = eq.rollout(8.0)
    assert path["events"][0]["tau"] == 0.0
    assert close(path["j2"], eq.value_v2(0.0, 8.0), 5e-3)
    assert math.isclose(eq.value_v1(0.0, 8.0), path["j1"], rel_tol=1e-12)

    low = ig.Equilibrium(ig.Params(w2=1.0))
    assert close(low.thresholds(0.0)[3], 8.8240, 1e-2)

    bound = ig.impulse_bound(params, 0.0, 10.0)
    assert bound["k"] == 42

    report = eq.verify(0.0, 10.0, nt=40, nx=40, oracle=False)
    assert report["passed"], report

    try:
        ig.Params(D=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative fixed cost accepted")

    print("impulse_game smoke test passed:", params)


if __name__ == "__main__":
    main()
