"""Smoke test for the pyshsk extension module.

Build and install first, e.g. ``maturin develop`` or
``pip install --no-build-isolation .`` inside ``crates/python``.
"""

import math
import os
import tempfile

import pyshsk


def main():
    eye = pyshsk.Matrix.identity(2)
    assert (eye.nrows, eye.ncols) == (2, 2)
    assert eye.apply([3.0, -1.0]) == [3.0, -1.0]

    assert pyshsk.soft_shrinkage([3.0, -0.5, -2.0], 1.5) == [1.5, 0.0, -0.5]
    assert pyshsk.conjugate_f([3.0, 0.0], 1.5) == 0.5 * 1.5**2
    d = pyshsk.bregman_distance([3.0, 0.0], [1.5, 0.0], [1.5, 0.0], 1.5)
    assert abs(d) < 1e-12

    problem = pyshsk.Problem(eye, [2.0, 1.0], 1.5, [2.0, 1.0])
    cert = pyshsk.rate_certificate(problem)
    assert abs(cert.nu - 4.0) < 1e-12 and abs(cert.q - 0.125) < 1e-12, cert
    assert abs(pyshsk.sigma_tilde_min(eye) - 1.0) < 1e-12

    gauss = pyshsk.Problem.gaussian(400, 200, seed=7)
    results = {}
    for name, theta in [("shskr", None), ("shskpr", 0.0), ("shskpr", 1.0)]:
        res = pyshsk.solve(gauss, name, theta=theta)
        assert res.stop_reason == "RseTol", res
        assert res.final_rse < 1e-6
        assert len(res.residual_norms) == res.iterations + 1
        results[(name, theta)] = res.iterations
    assert results[("shskr", None)] <= results[("shskpr", 1.0)], results

    greedy = pyshsk.solve(gauss, "greedy", max_iters=50)
    partial = pyshsk.solve(gauss, "shskpr", theta=1.0, max_iters=50)
    assert greedy.x == partial.x

    x_hat = gauss.reference
    assert pyshsk.rse(x_hat, x_hat) == 0.0
    assert math.isinf(pyshsk.snr(x_hat, x_hat))

    with tempfile.TemporaryDirectory() as tmp:
        gauss.save_bundle(os.path.join(tmp, "b"))
        back = pyshsk.Problem.load_bundle(os.path.join(tmp, "b"))
        assert back.rhs == gauss.rhs and back.reference == x_hat

    try:
        pyshsk.solve(gauss, "shskpr")
    except ValueError:
        pass
    else:
        raise AssertionError("shskpr without theta must fail")

    print("pyshsk smoke test passed:", results)


if __name__ == "__main__":
    main()
