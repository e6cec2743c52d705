"""Smoke test for the dpminimax extension module.

Build and install first:
    maturin develop -m crates/python/Cargo.toml --release
"""

import math

import dpminimax as dm


def main():
    p = dm.DiscreteDistribution.bernoulli(0.3)
    q = dm.DiscreteDistribution.bernoulli(0.5)
    assert abs(dm.tv(p, q) - 0.2) < 1e-12
    assert dm.kl(p, q) <= dm.renyi(2.0, p, q)

    dp = dm.PrivacyConstraint.pure_dp(math.log(2))
    r = dm.le_cam_private(dp, 2, 0.5, form="product")
    assert abs(r["value"] - 0.28125) < 1e-12, r

    z = dm.PrivacyConstraint.zcdp(0.1)
    tvs = [[0.0 if i == j else 1.0 for j in range(3)] for i in range(3)]
    f = dm.fano_private(z, 1, tvs)
    assert abs(f["value"] - (1 - (1 + 0.1 * 6 / 9) / math.log(3))) < 1e-12

    u = dm.DiscreteDistribution.uniform
    assert abs(dm.min_disagreement_lp([u([-1, 0]), u([0, 1]), u([1, -1])]) - 2.0) < 1e-9

    m = dm.estimate_disagreement("maximal", [p, q], trials=50_000, seed=1)
    assert abs(m["estimates"][0][1] - 0.2) <= 3 * m["stderr"][0][1]

    code = dm.varshamov_gilbert(66, 0.25, 0)
    assert len(code) >= math.ceil(math.exp(0.25**2 * 66 / 2))

    checks = dm.verify_randomized_response(math.log(3), dm.PrivacyConstraint.pure_dp(math.log(3)))
    assert checks["privacy"]["holds"] and checks["le_cam_admissibility"]["holds"]

    rep = dm.run_uniform([10, 20], [dm.PrivacyConstraint.none()], trials=2_000, seed=3)
    for cell in rep["cells"]:
        n = cell["n"]
        assert cell["bounds"][0]["value"] == math.exp(-1) / (8 * n * n)

    try:
        dm.PrivacyConstraint.pure_dp(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative epsilon accepted")

    print("dpminimax smoke test ok")


if __name__ == "__main__":
    main()
