"""Reference laws for the top melon line.

The top line at time 1 of a melon of n standard Brownian motions has the law
of the largest eigenvalue of an n x n GUE matrix with density proportional to
exp(-tr H^2 / 2). Two samplers of that eigenvalue live here (dense and
tridiagonal), together with the Tracy-Widom GUE distribution function
computed as a Fredholm determinant, and the versioned large-n fixture.
"""

from __future__ import annotations

import argparse
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate, linalg, special

from .env import RngStream

FIXTURE_NAME = "tw_reference_v1.json"


def gue_top_dense(n: int, rng: np.random.Generator) -> float:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (a + a.conj().T) / 2.0
    return float(linalg.eigh(h, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])


def gue_top_tridiagonal(n: int, rng: np.random.Generator) -> float:
    """Largest eigenvalue of the beta = 2 tridiagonal model (same law as the dense GUE)."""
    if n == 1:
        return float(rng.standard_normal())
    diag = rng.standard_normal(n)
    off = np.sqrt(rng.chisquare(2.0 * np.arange(n - 1, 0, -1)) / 2.0)
    top = linalg.eigvalsh_tridiagonal(diag, off, select="i", select_range=(n - 1, n - 1))
    return float(top[0])


def scaled_top(value: float, n: int) -> float:
    return n ** (1.0 / 6.0) * (value - 2.0 * math.sqrt(n))


@lru_cache(maxsize=8)
def _quadrature(m: int):
    nodes, weights = np.polynomial.legendre.leggauss(m)
    return nodes, weights


def tracy_widom_cdf(s: float, m: int = 64) -> float:
    """F_2(s) = det(I - K_Airy) on L^2(s, inf), by Nystrom discretisation.

    The half line is mapped onto (-1, 1) by x = s + 10 tan(pi (u + 1) / 4).
    """
    u, w = _quadrature(m)
    theta = np.pi * (u + 1.0) / 4.0
    x = s + 10.0 * np.tan(theta)
    wx = w * 10.0 * (np.pi / 4.0) / np.cos(theta) ** 2
    ai, aip, _, _ = special.airy(x)
    dx = x[:, None] - x[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :]) / dx
    k[np.diag_indices(m)] = aip**2 - x * ai**2
    sw = np.sqrt(wx)
    return float(np.linalg.det(np.eye(m) - sw[:, None] * k * sw[None, :]))


def tracy_widom_moments(lo: float = -9.0, hi: float = 6.0, points: int = 1501) -> dict:
    """Mean and variance of Tracy-Widom GUE from the Fredholm distribution function."""
    s = np.linspace(lo, hi, points)
    F = np.array([tracy_widom_cdf(v) for v in s])
    # E X = hi - int F, E X^2 = hi^2 - int 2 s F, valid since F(lo) ~ 0 and F(hi) ~ 1
    second = hi**2 - _integrate(2.0 * s * F, s)
    mean = hi - _integrate(F, s)
    return {"mean": float(mean), "variance": float(second - mean**2)}


def _integrate(y, x) -> float:
    return float(integrate.simpson(y, x=x))


def build_tw_fixture(n: int = 2000, samples: int = 100_000, seed: int = 20240501) -> dict:
    """Monte Carlo moments of n^{1/6}(lambda_max - 2 sqrt n) from the tridiagonal model."""
    root = RngStream(seed, 0)
    xs = np.empty(samples)
    for i in range(samples):
        xs[i] = scaled_top(gue_top_tridiagonal(n, root.child(i).generator()), n)
    var = float(xs.var(ddof=1))
    return {
        "version": 1,
        "config": {
            "sampler": "gue_top_tridiagonal",
            "n": n,
            "samples": samples,
            "master_seed": seed,
            "statistic": "n^(1/6) (lambda_max - 2 sqrt(n))",
        },
        "mean": float(xs.mean()),
        "variance": var,
        "mean_se": math.sqrt(var / samples),
        "variance_se": float(np.sqrt(np.var((xs - xs.mean()) ** 2, ddof=1) / samples)),
        "quantiles": {str(q): float(np.quantile(xs, q)) for q in (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)},
        "tail_above_4": float(np.mean(xs > 4.0)),
        "tail_below_minus_4": float(np.mean(xs < -4.0)),
    }


def load_tw_fixture() -> dict:
    text = resources.files("blpp").joinpath("fixtures", FIXTURE_NAME).read_text()
    return json.loads(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate the Tracy-Widom reference fixture.")
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--samples", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=20240501)
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args(argv)
    fixture = build_tw_fixture(args.n, args.samples, args.seed)
    out = args.out or Path(str(resources.files("blpp").joinpath("fixtures", FIXTURE_NAME)))
    out.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    print(json.dumps({k: fixture[k] for k in ("mean", "variance", "mean_se")}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
