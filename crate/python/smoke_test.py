#!/usr/bin/env python3
"""Smoke test for the rmkit_py extension module.

Builds nothing itself: run `cargo build --release -p rmkit-python` first.
The script locates the compiled cdylib, exposes it under the importable
name `rmkit_py`, and exercises the main operations.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "librmkit_py.so",
        REPO / "target" / "debug" / "librmkit_py.so",
        REPO / "target" / "release" / "librmkit_py.dylib",
        REPO / "target" / "debug" / "librmkit_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "rmkit_py cdylib not found; run `cargo build --release -p rmkit-python` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="rmkit-py-"))
    shutil.copy2(built, stage / "rmkit_py.so")
    sys.path.insert(0, str(stage))
    import rmkit_py

    return rmkit_py


def approx(a, b, tol):
    return abs(a - b) <= tol


def main():
    rm = load_module()
    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}")
        if not ok:
            sys.exit(1)

    print("rmkit_py smoke test")

    p = rm.ModelParams(0.6, 0.3, 2.5)
    check("params round-trip", (p.eps, p.alpha, p.kappa) == (0.6, 0.3, 2.5))
    check("derived flags", p.noise_subcritical and p.alpha_admissible)
    check("theta_star", approx(p.theta_star, 2.0 / (2.5 * 0.36), 1e-12))

    try:
        rm.ModelParams(0.0, 0.3, 2.5)
        check("invalid params rejected", False)
    except ValueError:
        check("invalid params rejected", True)

    d = rm.drift(p, 0.0, 0.0)
    check("origin is an equilibrium", d == (0.0, 0.0))
    check("noise only on the prey", rm.diffusion(p, 1.0, 5.0) == (0.6, 0.0))

    mean, var = rm.gamma_moments(p)
    check("stationary mean", approx(mean, 2.05, 1e-12))
    check("stationary variance", approx(var, 0.9225, 1e-12))
    check("cdf is a cdf", 0.0 <= rm.gamma_cdf(p, 1.0) <= rm.gamma_cdf(p, 3.0) <= 1.0)

    lam = rm.lambda_invasion(p)
    check("invasion rate near 0.34", approx(lam, 0.34, 0.01))
    report = rm.classify_regime(p)
    check("coexistence regime", report["regime"] == "persistence")
    extinct = rm.classify_regime(rm.ModelParams(0.6, 0.9, 2.5))
    check("extinction regime", extinct["regime"] == "predator_extinction")
    check(
        "extinction rate bound attained",
        extinct["rate_bounds"][0][2] and approx(extinct["rate_bounds"][0][1], -0.26, 0.01),
    )

    kind, equilibrium = rm.deterministic_regime(p)
    check("deterministic taxonomy", kind == "limit_cycle" and equilibrium is not None)
    check(
        "invasion weights in coexistence",
        rm.hofbauer_weights(p) is not None
        and rm.hofbauer_weights(rm.ModelParams(0.6, 0.9, 2.5)) is None,
    )
    check("bracket determinant", approx(rm.hormander_det(p, 1.0, 1.0), 0.09, 1e-12))

    exps = rm.rate_exponents(p, 3)
    check("rate exponents", approx(exps["q0"], 1 + 0.3 / (0.36 * 3), 1e-12))

    times, prey, predators = rm.simulate(p, 0.75, 1.25, 1e-3, 5000, 42)
    check("trajectory length", len(times) == len(prey) == len(predators) == 5001)
    check("positivity", min(prey) > 0 and min(predators) > 0)
    t2, prey2, _ = rm.simulate(p, 0.75, 1.25, 1e-3, 5000, 42)
    check("determinism", prey == prey2 and times == t2)

    _, em = rm.simulate_logistic(p, 1.0, 1e-4, 10000, 7, "plain")
    _, exact = rm.exact_logistic(p, 1.0, 1e-4, 10000, 7)
    rms = math.sqrt(sum((a - b) ** 2 for a, b in zip(em, exact)) / len(em))
    check("explicit-solution oracle", rms < 0.05)

    ks = rm.occupation_ks_to_gamma(
        rm.ModelParams(0.6, 0.9, 2.5), 0.75, 1.25, 1e-3, 600000, 100000, 901
    )
    check("occupation KS sane", 0.0 < ks < 0.2)

    steering = rm.ModelParams(0.6, 0.3, 0.5)
    success, _, sx1, sx2 = rm.reach(steering, (0.3, 0.3), (1.0, 2.0))
    check("steering succeeds", success)
    check("steering stays interior", min(sx1) > 0 and min(sx2) > 0)

    print(f"all {checks} checks passed")


if __name__ == "__main__":
    main()
