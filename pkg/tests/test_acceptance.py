"""The thirteen acceptance criteria, one test each.

Every test prints (and records for the terminal summary) a single line
``criterion NN [PASS|FAIL] ...`` with the measured value, its threshold and
the runtime against its budget.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from levyou.charfn import decay_probe, ou_exponent
from levyou.density import GridSpec, derivative_grid, invert_density, pushforward_density
from levyou.harness import parse_config, run_experiment
from levyou.levy import (
    IsotropicStable,
    LevyTriplet,
    SumOf,
    gaussian_triplet,
    hypothesis_check,
    stable_triplet,
    truncate_measure,
    uniform_box_measure,
)
from levyou.linalg import OUSystem, gramian_floor, kolmogorov_system, mat_exp, rank_condition
from levyou.quadrature import composite_rule
from levyou.simulate import SimConfig, sample_compound_convolution

ST15 = stable_triplet(1.5, 1.0, 1)


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def verdict(number, title, ok, detail, clock, budget):
    ok = bool(ok) and clock.elapsed < budget
    line = (
        f"criterion {number:02d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        f" (runtime {clock.elapsed:.2f}s, budget {budget:g}s)"
    )
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def kolmogorov_config(samples, seed=2024):
    raw = {
        "scenario": "kolmogorov",
        "triplet": {"measure": {"family": "stable", "alpha": 1.5, "c_alpha": 1.0}},
        "t": 1.0,
        "x": [0.0, 0.0],
        "grid": {"points_per_axis": 1024, "freq_radius": [14.5, 24.0]},
        "sim": {
            "small_jump_mode": "gaussian-substitute",
            "small_jump_cutoff": 0.1,
            "sample_count": samples,
            "seed": seed,
        },
        "validate": {"expect_decaying": True, "expect_alpha": 1.5},
    }
    return parse_config(raw)


def test_01_kolmogorov_rank():
    with Clock() as c:
        good = run_experiment(parse_config({"scenario": "rank-check", "system": {"preset": "kolmogorov"}}))
        bad = run_experiment(
            parse_config({"scenario": "rank-check", "system": {"A": [[0, 0], [1, 0]], "B": [[0], [0]]}})
        )
    ok = (
        good.metrics["rank"] == 2
        and good.metrics["satisfied"]
        and "rank 2/2, satisfied" in good.notes
        and bad.metrics["rank"] == 0
    )
    verdict(1, "Kolmogorov rank", ok, f"rank {good.metrics['rank']} (satisfied), perturbed rank {bad.metrics['rank']}", c, 1)


def random_system(rng):
    n = int(rng.integers(1, 5))
    d = int(rng.integers(1, n + 1))
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, d))
    if n > 1 and rng.uniform() < 0.5:
        # block triangular with the noise confined to an invariant subspace
        k = int(rng.integers(1, n))
        A[k:, :k] = 0.0
        B[k:, :] = 0.0
    return OUSystem(A, B)


def test_02_gramian_equivalence():
    rng = np.random.default_rng(20)
    disagree, deficient, total = 0, 0, 40
    with Clock() as c:
        for _ in range(total):
            sys = random_system(rng)
            sat = rank_condition(sys).satisfied
            deficient += not sat
            disagree += sat != (gramian_floor(sys, 1.0) > 1e-10)
    ok = disagree == 0 and 0 < deficient < total
    verdict(2, "Gramian equivalence", ok, f"{disagree} disagreements over {total} systems ({deficient} rank deficient)", c, 10)


def test_03_exponent_closed_form():
    rng = np.random.default_rng(3)
    sys = OUSystem([[-1.0]], [[1.0]])
    ts = rng.uniform(0.01, 5.0, 100)
    hs = rng.normal(size=100) * rng.uniform(0.1, 20.0, 100)
    with Clock() as c:
        got = np.array([ou_exponent(sys, ST15, t, [h]) for t, h in zip(ts, hs)])
    exact = np.abs(hs) ** 1.5 * (1 - np.exp(-1.5 * ts)) / 1.5
    err = float(np.max(np.abs(got - exact) / exact))
    verdict(3, "exponent closed form", err <= 1e-8, f"max relative error {err:.3g} <= 1e-8", c, 1)


FLEET_MEASURES = [
    None,
    IsotropicStable(1.5, 1.0, 1),
    IsotropicStable(0.8, 0.5, 1),
    uniform_box_measure(-0.5, 1.5, 2.0),
    SumOf((IsotropicStable(1.2, 0.7, 1), uniform_box_measure(-1.0, 1.0, 1.0))),
]


def test_04_semigroup_identity():
    rng = np.random.default_rng(4)
    worst, count = 0.0, 200
    with Clock() as c:
        for _ in range(count):
            n = int(rng.integers(1, 4))
            A = rng.normal(size=(n, n))
            A *= rng.uniform(0.1, 2.0) / np.linalg.norm(A, 2)
            sys = OUSystem(A, rng.normal(size=(n, 1)))
            nu = FLEET_MEASURES[int(rng.integers(len(FLEET_MEASURES)))]
            q = float(rng.uniform(0, 1)) if nu is None or rng.uniform() < 0.5 else 0.0
            trip = LevyTriplet([[q]], [float(rng.normal())], nu)
            h = rng.normal(size=n) * rng.uniform(0.1, 6.0)
            t, s = rng.uniform(0.05, 1.5, 2)
            lhs = ou_exponent(sys, trip, t + s, h)
            rhs = ou_exponent(sys, trip, t, h) + ou_exponent(sys, trip, s, mat_exp(A.T, t) @ h)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    verdict(4, "semigroup identity", worst <= 1e-8, f"max deviation {worst:.3g} <= 1e-8 over {count} tuples", c, 30)


def test_05_gaussian_inversion():
    sys = OUSystem(np.zeros((2, 2)), np.eye(2))
    with Clock() as c:
        grid = invert_density(sys, gaussian_triplet(2), 1.0, GridSpec(2, 128, 8.0))
    P = grid.points()
    exact = np.exp(-0.5 * np.sum(P**2, axis=1)) / (2 * np.pi)
    err = float(np.max(np.abs(grid.values.ravel() - exact)))
    verdict(5, "Gaussian inversion", err <= 1e-6, f"L-infinity error {err:.3g} <= 1e-6", c, 10)


def trapezoid_density(y, t=1.0, alpha=1.5, points=10**6, hmax=60.0):
    # separate route: closed-form exponent, cosine transform, plain trapezoid
    g = (1 - np.exp(-alpha * t)) / alpha
    h = np.linspace(0.0, hmax, points + 1)
    w = np.full(h.size, h[1] - h[0])
    w[0] = w[-1] = 0.5 * (h[1] - h[0])
    damp = np.exp(-g * h**alpha) * w
    return np.array([np.cos(h * v) @ damp for v in y]) / np.pi


def test_06_stable_inversion():
    with Clock() as c:
        grid = invert_density(OUSystem([[-1.0]], [[1.0]]), ST15, 1.0, GridSpec(1, 4096))
        y = grid.axes()[0]
        sel = np.abs(y) < 25
        ref = trapezoid_density(y[sel])
    err = float(np.max(np.abs(ref - grid.values[sel])))
    verdict(6, "stable OU inversion", err <= 1e-5, f"L-infinity error {err:.3g} <= 1e-5 on |y| < 25", c, 30)


def test_07_mc_versus_density(tmp_path):
    with Clock() as c:
        rep = run_experiment(kolmogorov_config(100000), str(tmp_path))
    crit = rep.metrics["ks_critical"]
    ks = rep.ks_distances
    ok = all(k <= crit for k in ks) and rep.l1_error <= 0.05 and rep.passed
    detail = f"KS {ks[0]:.4g}, {ks[1]:.4g} <= {crit:.4g}; L1 {rep.l1_error:.4g} <= 0.05"
    verdict(7, "Monte Carlo versus density", ok, detail, c, 300)


def test_08_decay_bound():
    with Clock() as c:
        rep = decay_probe(kolmogorov_system(), ST15, 1.0)
        cp = LevyTriplet([[0.0]], [0.0], uniform_box_measure(-1.0, 1.0, 2.0))
        cp_rep = decay_probe(OUSystem([[-1.0]], [[1.0]]), cp, 1.0)
    ok = abs(rep.fitted_alpha - 1.5) <= 0.05 and rep.fit_residual < 0.05 and rep.decaying and not cp_rep.decaying
    detail = (
        f"alpha {rep.fitted_alpha:.4g} (1.5 +- 0.05), residual {rep.fit_residual:.3g} < 0.05,"
        f" compound Poisson decaying={cp_rep.decaying}"
    )
    verdict(8, "decay bound", ok, detail, c, 60)


def test_09_hypothesis():
    nu = IsotropicStable(1.5, 1.0, 1)
    C = 2.0 * nu.projected_constant / (2.0 - nu.alpha)
    with Clock() as c:
        rep = hypothesis_check(nu, 1.5, C, [1.0, 0.5, 0.1, 0.01, 1e-4], 4)
        fin = hypothesis_check(uniform_box_measure(-1.0, 1.0), 1.5, 1e-2, [1.0, 0.1, 1e-3], 2)
    ratios = [row.ratio for row in rep.rows]
    spread = max(abs(r - 1.0) for r in ratios)
    ok = spread <= 1e-6 and rep.satisfied and not fin.satisfied
    verdict(9, "small-ball hypothesis", ok, f"stable ratio 1 +- {spread:.2g}, finite measure worst {fin.worst_ratio:.3g}", c, 10)


def test_10_compound_zero_atom():
    sys = OUSystem([[-1.0]], [[1.0]])
    with Clock() as c:
        tm = truncate_measure(uniform_box_measure(0.5, 1.5, 2.0), 0.0, np.inf)
        s = sample_compound_convolution(sys, tm, 1.0, SimConfig(sample_count=100000, seed=10))
    freq, exact = s.extras["zero_atom_frequency"], np.exp(-2.0)
    sigma = np.sqrt(exact * (1 - exact) / s.count)
    ok = abs(freq - exact) <= 3 * sigma
    verdict(10, "compound zero atom", ok, f"{freq:.4f} vs {exact:.4f} +- {3 * sigma:.4f}", c, 30)


def _unit_square(x):
    return np.all((x >= 0) & (x <= 1), axis=1).astype(float)


def _gauss(x):
    return np.exp(-0.5 * np.sum(x**2, axis=1)) / (2 * np.pi) ** (x.shape[1] / 2)


def test_11_pushforward():
    from levyou.density import PushforwardConfig

    with Clock() as c:
        tri = pushforward_density([[1.0, 1.0]], _unit_square, [[1.0]])[0]
        y = np.linspace(-3, 3, 13)[:, None]
        marg = pushforward_density([[1.0, 0.0]], _gauss, y)
        L = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, -1.0]])
        nodes, w = composite_rule(-12.0, 12.0, 24, 16)
        Y = np.stack(np.meshgrid(nodes, nodes, indexing="ij"), -1).reshape(-1, 2)
        mass = float(np.sum(pushforward_density(L, _gauss, Y, PushforwardConfig(panels=32)) * np.outer(w, w).ravel()))
    e1 = abs(tri - 1.0)
    e2 = float(np.max(np.abs(marg - np.exp(-0.5 * y[:, 0] ** 2) / np.sqrt(2 * np.pi))))
    e3 = abs(mass - 1.0)
    ok = e1 <= 1e-6 and e2 <= 1e-8 and e3 <= 1e-4
    verdict(11, "pushforward density", ok, f"triangular {e1:.2g} <= 1e-6, marginal {e2:.2g} <= 1e-8, mass {e3:.2g} <= 1e-4", c, 10)


def test_12_normalisation_and_derivatives():
    ou = OUSystem([[-1.0]], [[1.0]])
    cases = [
        (OUSystem(np.zeros((2, 2)), np.eye(2)), gaussian_triplet(2), GridSpec(2, 128, 8.0)),
        (ou, ST15, GridSpec(1, 4096)),
        (OUSystem([[0.5]], [[1.0]]), stable_triplet(0.8, 1.0, 1), GridSpec(1, 8192)),
        (OUSystem([[-0.3]], [[2.0]]), stable_triplet(1.9, 0.5, 1), GridSpec(1, 2048)),
        (ou, LevyTriplet([[0.5]], [0.3], SumOf((IsotropicStable(1.2, 1.0, 1), uniform_box_measure(-1, 2, 1.0)))), GridSpec(1, 4096)),
        (kolmogorov_system(), ST15, GridSpec(2, 256)),
        (OUSystem([[-1.0, 0.0], [1.0, -0.5]], [[1.0], [0.0]]), ST15, GridSpec(2, 256)),
    ]
    deriv_cases = [(ou, ST15, GridSpec(1, 4096)), (OUSystem([[0.0]], [[1.0]]), gaussian_triplet(1), GridSpec(1, 512, 12.0))]
    with Clock() as c:
        masses = [invert_density(s, tr, 1.0, sp).mass() for s, tr, sp in cases]
        ints = [np.sum(g.values) * g.cell_volume for g in (derivative_grid(s, tr, 1.0, sp, (1,)) for s, tr, sp in deriv_cases)]
    mass_err = max(abs(m - 1.0) for m in masses)
    int_err = max(abs(v) for v in ints)
    ok = mass_err <= 5e-3 and int_err <= 1e-4
    verdict(12, "normalisation and derivatives", ok, f"mass error {mass_err:.2g} <= 5e-3, derivative integral {int_err:.2g} <= 1e-4", c, 60)


def test_13_determinism(tmp_path):
    with Clock() as c:
        for sub in ("a", "b"):
            run_experiment(kolmogorov_config(10000, seed=99), str(tmp_path / sub))
    same = all(
        (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        for name in ("density.csv", "samples.csv", "summary.json", "density_header.json")
    )
    verdict(13, "determinism", same, f"CSV bodies identical: {same}", c, 60)

