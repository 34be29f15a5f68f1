"""Smoke test for the isotau_py extension."""
import json
import math

import isotau_py as it


def max_diff(a, b):
    return max(abs(p - q) for r, s in zip(a, b) for p, q in zip(r, s))


def main():
    slice_model = it.Model("pii-slice")
    eta = slice_model.eta([1, 1])
    assert abs(eta[0][1] - 1 / (2j * math.pi)) < 1e-10, eta

    for name in ("pii", "pvi", "three-pole", "twisted-pair"):
        model = it.Model(name)
        x = model.sample(seed=1)
        assert max_diff(model.eta(x), model.eta_closed_form(x)) < 1e-9, name
        print(f"{name}: eta matches closed form")

    scalar = it.ScalarModel.sample(3, seed=2)
    residual = [d - w for d, w in zip(scalar.dlog_tau(), scalar.omega())]
    corr = scalar.correction()
    kappa = sum(c.conjugate() * r for c, r in zip(corr, residual)) / sum(abs(c) ** 2 for c in corr)
    assert max(abs(r - kappa * c) for r, c in zip(residual, corr)) < 1e-10
    print(f"scalar: kappa = {kappa:.12f}")

    report = json.loads(it.run(["star-j", "--seed", "1", "--count", "3"]))
    assert report["pass"], report
    print("star-j:", report["max_residual"])


if __name__ == "__main__":
    main()
