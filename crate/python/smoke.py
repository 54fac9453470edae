"""Smoke test for the fas_sep_py extension."""

import math

import fas_sep_py as fs


def main():
    mu = fs.mu_from_w(0.2)
    assert abs(mu - 0.967853) < 1e-6, mu

    g = 10.0
    r = fs.sep_exact("bfsk", 1, 1, 10.0, mu=0.0)
    want = 0.5 * (1.0 - math.sqrt(g / (2.0 + g)))
    assert abs(r["value"] - want) < 1e-10 * want, r
    assert r["method"] == "closed_form", r

    cf = fs.cf_value(-0.3, 3, 3, 2.0, 0.0)
    assert abs(cf - (1.0 + 0.3 * 2.0) ** -3) < 1e-12, cf

    exact = fs.sep_exact("psk:4", 4, 2, 5.0, w=0.5)["value"]
    mc = fs.simulate("psk:4", 4, 2, 5.0, w=0.5, max_trials=2_000_000, seed=7)
    assert mc["errors"] >= 200, mc
    sigma = math.sqrt(exact * (1.0 - exact) / mc["trials"])
    assert abs(mc["ser"] - exact) <= 4.0 * sigma, (mc, exact)

    asym = fs.sep_asymptotic("psk:4", 2, 1, 40.0, mu=0.5)
    ratio = asym / fs.sep_exact("psk:4", 2, 1, 40.0, mu=0.5)["value"]
    assert 0.9 <= ratio <= 1.1, ratio

    try:
        fs.sep_exact("psk:4", 2, 3, 10.0)
    except ValueError as e:
        assert "K" in str(e)
    else:
        raise AssertionError("K > N accepted")

    print("smoke ok")


if __name__ == "__main__":
    main()
