"""Experiment drivers.  Each takes an ExperimentConfig and returns (results, checks).

``checks`` is a list of :class:`Check` records; every numeric verdict carries the
measured value next to the limit it was compared against.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import entropy as ent
from . import harmonic as hm
from . import quat as qt
from .moebius import (scale_map, matrix_coefficient, matrix_coefficient_exact, random_moebius,
                      rn_derivative, apply, uniform_points, log_nrn, sigma0)
from .reps import (FamilyParams, build_free_family, build_surface_family, build_product_family,
                   padded_rotation_set, lps_product_images, alpha_of, Representation)
from .rng import make_rng
from .stationary import (build_grid, transfer_fixed_point, transfer_matrix, sample_stationary,
                         empirical_cell_masses, tv_distance, coarse_masses, pushforward_mass,
                         regime_check)
from .words import (GroupDescriptor, FiniteGroupMeasure, reduce_word, read_measure,
                    symmetric_generating_measure, build_mubar, convolve, entropy_H,
                    moments)


@dataclass
class Check:
    name: str
    value: float
    limit: float
    op: str
    passed: bool

    def to_dict(self):
        return asdict(self)


_OPS = {"<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
        ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def check(name: str, value, op: str, limit) -> Check:
    value, limit = float(value), float(limit)
    return Check(name, value, limit, op, bool(_OPS[op](value, limit)))


# -- shared setup ------------------------------------------------------------

def parse_group(text: str) -> GroupDescriptor:
    kind, rank = text.split()
    return GroupDescriptor(kind, int(rank))


def walk_setup(cfg):
    """(mu, mubar) for the configured group: measure file or uniform on A u A^-1."""
    group = parse_group(cfg.group)
    if cfg.measure:
        mu = read_measure(cfg.measure)
        if mu.group != group:
            raise ValueError(f"measure group {mu.group} does not match config group {group}")
    else:
        mu = symmetric_generating_measure(group)
    A = [reduce_word([i], group) for i in group.generators()]
    B = A[1:] if group.kind == "free" else A[1:group.rank] + A[group.rank + 1:]
    return group, mu, build_mubar(mu, A, B)


def family_fn(cfg, group: GroupDescriptor):
    """r -> Representation for the configured family."""
    if cfg.family == "free":
        W = padded_rotation_set(group.rank - 1)
        return lambda r: build_free_family(FamilyParams(cfg.s, r), W)
    if cfg.family == "surface":
        rho0 = padded_rotation_set(2 * group.rank - 2)
        return lambda r: build_surface_family(FamilyParams(cfg.s, r), rho0, group.rank)
    if cfg.family == "product":
        W = lps_product_images(len(cfg.r), group.rank - 1)
        return lambda r: build_product_family(FamilyParams(cfg.s, r), W)
    raise ValueError(f"unknown family {cfg.family!r}")


# -- stationary --------------------------------------------------------------

def run_stationary(cfg):
    group, mu, mubar = walk_setup(cfg)
    rho = family_fn(cfg, group)(cfg.r[0])
    grid = build_grid(cfg.grid)
    regime_limit = regime_check(rho, mubar)[1]
    A = transfer_matrix(rho, mubar.mubar, grid)
    rep = transfer_fixed_point(rho, mubar, grid, tol=cfg.tol, max_iter=cfg.max_iter, A=A)
    phi = rep.density
    rng = make_rng(cfg.seed, (1,))
    sols = []
    for k in range(cfg.starts):
        init = rng.uniform(0.05, 2.0, grid.n)
        sols.append(transfer_fixed_point(rho, mubar, grid, tol=cfg.tol * 1e-2,
                                         max_iter=cfg.max_iter, A=A, init=init).density.values)
    l1 = max((float(np.mean(np.abs(a - b))) for i, a in enumerate(sols) for b in sols[i + 1:]),
             default=0.0)
    samples = sample_stationary(rho, mu, cfg.burn_in, cfg.samples, make_rng(cfg.seed, (2,)))
    emp = empirical_cell_masses(samples, grid)
    tv = tv_distance(emp, phi.cell_masses())
    # multinomial sampling floor: E TV for a perfect model at this sample size
    lam = phi.cell_masses() * cfg.samples
    tv_floor = float(np.sum(np.sqrt(2 * lam / np.pi)) / cfg.samples / 2)
    coarse = build_grid(cfg.coarse_grid)
    tv_coarse = tv_distance(coarse_masses(emp, grid, coarse),
                            coarse_masses(phi.cell_masses(), grid, coarse))
    tv_coarse_floor = float(np.sum(np.sqrt(2 * coarse_masses(phi.cell_masses(), grid, coarse)
                                           * cfg.samples / np.pi)) / cfg.samples / 2)
    mass = pushforward_mass(rho, mubar.mubar, grid)
    results = {
        "fixed_point": rep.to_dict(),
        "alpha": alpha_of(rho),
        "certified_alpha_limit": regime_limit,
        "mass_integral_error": abs(phi.mass - 1.0),
        "pushforward_mass": mass,
        "uniqueness_l1": l1,
        "tv_samples": tv,
        "tv_noise_floor": tv_floor,
        "tv_coarse": tv_coarse,
        "tv_coarse_noise_floor": tv_coarse_floor,
        "coarse_cells": coarse.n,
        "samples": cfg.samples,
        "burn_in": cfg.burn_in,
    }
    checks = [
        check("residual", rep.residual, "<", cfg.residual_limit),
        check("min_density", rep.min_density, ">", 0.0),
        check("mass_error", abs(phi.mass - 1.0), "<", 1e-12),
        check("contraction", rep.contraction, "<", 1.0),
        check("pushforward_mass_error", abs(mass - 1.0), "<", 1e-3),
        check("tv_samples", tv, "<", cfg.tv_limit),
        check("uniqueness_l1", l1, "<", 1e-6),
        check("tv_coarse_within_4x_floor", tv_coarse, "<", 4 * tv_coarse_floor),
    ]
    artifacts = {"density.csv": phi.to_csv}
    return results, checks, artifacts


# -- entropy -----------------------------------------------------------------

def run_entropy_sweep(cfg):
    group, mu, mubar = walk_setup(cfg)
    fam = family_fn(cfg, group)
    L = moments(mu, 0.0)[0]
    rows, checks, points = [], [], []
    grid = build_grid(cfg.grid) if cfg.quadrature else None
    for i, r in enumerate(cfg.r_values):
        rho = fam(r)
        h = ent.entropy_mc(rho, mu, cfg.samples, cfg.burn_in, make_rng(cfg.seed, (100 + i,)))
        br = ent.bounds_report(rho, mu, mubar, cfg.samples, h=h, lmax=cfg.lmax,
                               avez_n=cfg.avez_n)
        pt = {"r": r, "mc": h.to_dict(), "bounds": br.to_dict()}
        rows.append(ent.SweepRow(float(r), h.value, h.stderr, br.spectral_lower, br.upper))
        s3 = 3 * h.stderr
        checks += [
            check(f"r={r}:nonnegative", h.value + s3, ">=", 0.0),
            check(f"r={r}:upper L*alpha", h.value - s3, "<=", br.upper),
            check(f"r={r}:spectral_lower", br.spectral_lower - s3, "<=", h.value),
            check(f"r={r}:avez", h.value - s3, "<=", br.avez_upper),
        ]
        if grid is not None:
            fp = transfer_fixed_point(rho, mubar, grid, tol=cfg.tol, max_iter=cfg.max_iter)
            q = ent.entropy_quadrature(rho, mu, fp.density)
            pt["quadrature"] = q.to_dict()
            pt["fixed_point"] = fp.to_dict()
            checks.append(check(f"r={r}:mc_vs_quadrature", abs(h.value - q.value), "<",
                                max(3 * h.stderr, cfg.cross_tol)))
        if cfg.burn_in_doubling:
            h2 = ent.entropy_mc(rho, mu, cfg.samples, 2 * cfg.burn_in,
                                make_rng(cfg.seed, (200 + i,)))
            pt["burn_in_doubled"] = h2.to_dict()
            pt["burn_in_agree"] = abs(h2.value - h.value) <= 2 * math.hypot(h.stderr, h2.stderr)
        points.append(pt)
    flags = []
    for a, b in zip(rows, rows[1:]):
        allowed = 5 * L * abs(b.r - a.r) + 3 * (a.stderr + b.stderr)
        flags.append({"r0": a.r, "r1": b.r, "diff": abs(b.h - a.h), "allowed": allowed,
                      "flag": abs(b.h - a.h) > allowed})
    results = {"points": points, "continuity": flags, "L": L, "f_prime_1": mubar.f_prime_1}
    artifacts = {"sweep.csv": lambda p: ent.write_sweep_csv(rows, p)}
    return results, checks, artifacts


def run_realize(cfg):
    group, mu, mubar = walk_setup(cfg)
    fam = family_fn(cfg, group)
    h_max = ent.entropy_mc(fam(cfg.r_max), mu, cfg.samples, cfg.burn_in, make_rng(cfg.seed, (0,)))
    target = cfg.target_fraction * h_max.value
    res = ent.realize_entropy(fam, mu, target, cfg.realize_tol, rng=cfg.seed, r_max=cfg.r_max,
                              samples=cfg.samples, max_samples=cfg.max_samples,
                              max_steps=cfg.max_steps, burn_in=cfg.burn_in, h_max=h_max)
    est = res.estimate
    results = {"target": target, "h_max": h_max.to_dict(), "r": res.r, "estimate": est.to_dict(),
               "steps": res.steps, "history": res.history}
    checks = [
        check("|h - t| - 3 sigma", abs(est.value - target) - 3 * est.stderr, "<=", cfg.realize_tol),
        check("steps", res.steps, "<=", cfg.max_steps),
    ]
    return results, checks, {}


def run_cube(cfg):
    group, mu, mubar = walk_setup(cfg)
    d = len(cfg.r)
    fam = family_fn(cfg, group)
    rho = fam(cfg.r)
    full = ent.cube_entropy(rho, mu, np.ones(d), cfg.samples, make_rng(cfg.seed, (1,)),
                            cfg.burn_in)
    factors = [ent.entropy_mc(rho.factor(j), mu, cfg.samples, cfg.burn_in,
                              make_rng(cfg.seed, (10 + j,))) for j in range(d)]
    masks = {}
    for bits in range(2 ** d):
        mask = [(bits >> j) & 1 for j in range(d)]
        est = ent.cube_entropy(rho, mu, mask, cfg.samples, make_rng(cfg.seed, (100 + bits,)),
                               cfg.burn_in)
        masks["".join(map(str, mask))] = est.to_dict()
    diff = full.value - sum(f.value for f in factors)
    sig = math.sqrt(full.stderr ** 2 + sum(f.stderr ** 2 for f in factors))
    results = {"full": full.to_dict(), "factors": [f.to_dict() for f in factors],
               "masks": masks, "difference": diff, "combined_stderr": sig,
               "alpha": alpha_of(rho), "factor_alpha": [alpha_of(rho.factor(j)) for j in range(d)]}
    checks = [check("additivity", abs(diff), "<", max(3 * sig, cfg.cross_tol))]
    return results, checks, {}


# -- gaps --------------------------------------------------------------------

def run_gap(cfg):
    results, checks = {}, []
    todo = cfg.checks or ["lps", "class-norm", "two-subspace", "product"]
    if "lps" in todo:
        g = hm.kappa_estimate(hm.lps_quaternions(), cfg.lmax, "LPS p=5")
        bound = hm.ramanujan_norm(3)
        results["lps"] = g.to_dict() | {"ramanujan_norm": bound}
        checks += [check("lps max norm <= sqrt5/3", g.max_norm, "<=", bound + 1e-9),
                   check("lps max norm >= 0.74", g.max_norm, ">=", 0.74)]
    if "class-norm" in todo:
        phis = np.linspace(0.15, np.pi - 0.15, cfg.angles)
        worst = 0.0
        table = []
        for phi in phis:
            for dim in range(2, int(round(2 * cfg.jmax)) + 2):
                quad = float(np.linalg.norm(hm.class_block_quadrature(phi, dim), 2))
                exact = hm.class_character_norm(phi, dim)
                worst = max(worst, abs(quad - exact))
            table.append({"phi": float(phi), "q_norm": hm.q_class_norm(phi, cfg.jmax)})
        results["class_norm"] = {"table": table, "max_error": worst}
        checks.append(check("class-norm quadrature vs closed form", worst, "<", 1e-6))
    if "two-subspace" in todo:
        kap = None if cfg.kappa == "random" else float(cfg.kappa)
        rep = hm.avg_contraction_check(cfg.dim, kap, cfg.trials, make_rng(cfg.seed, (3,)),
                                       random_dim=True)
        results["two_subspace"] = rep.to_dict()
        checks.append(check("two-subspace violations", rep.violations, "<=", 0))
    if "product" in todo:
        rng = make_rng(cfg.seed, (4,))
        B = hm.lps_quaternions()
        out = []
        for n in (2, 3):
            abar = [qt.UnitQuaternion.one()] + [qt.UnitQuaternion.from_array(v)
                                                for v in qt.sample_haar(rng, n - 1)]
            rep = hm.product_gap_experiment(B, abar, cfg.jmax, min(cfg.lmax, 20), rng,
                                            cfg.conjugator_samples)
            out.append(rep.to_dict())
        results["product"] = out
        checks.append(check("product gap lower bound", min(o["gap_lower"] for o in out), ">=", 0.0))
    return results, checks, {}


# -- quaternion / moebius verification ---------------------------------------

def _ks(samples: np.ndarray, cdf) -> float:
    x = np.sort(samples)
    n = len(x)
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _verify_matrix_coefficient(cfg, results, checks):
    grid = build_grid(cfg.grid)
    errs = {}
    for t in (0.1, 0.5, 1.0, 2.0):
        errs[str(t)] = abs(matrix_coefficient(scale_map(t, 0.0), grid) - matrix_coefficient_exact(t))
    results["matrix_coefficient"] = {"grid": grid.n, "errors": errs}
    checks.append(check("matrix coefficient max error", max(errs.values()), "<", 1e-6))


_TEST_FUNCS = {
    "x": lambda p: p[..., 0],
    "z^2": lambda p: p[..., 2] ** 2,
    "exp(y+z)": lambda p: np.exp(p[..., 1] + p[..., 2]),
}


def _verify_rn_change(cfg, results, checks):
    grid = build_grid(cfg.grid)
    rng = make_rng(cfg.seed, (5,))
    nodes2, w2 = grid.subnodes(2)
    worst = 0.0
    rows = []
    for k in range(20):
        g = random_moebius(rng, 2.0)
        gi = g.inverse()
        pts = uniform_points(rng, cfg.samples)
        J2 = rn_derivative(gi, nodes2)
        J1 = rn_derivative(gi, grid.centers)
        gx = apply(g, pts)
        for name, f in _TEST_FUNCS.items():
            q2 = float(np.sum(w2 * f(nodes2) * J2))
            q1 = float(np.mean(f(grid.centers) * J1))
            vals = f(gx)
            mc = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
            err = math.hypot(se, abs(q2 - q1))
            z = abs(q2 - mc) / err
            worst = max(worst, z)
            rows.append({"g": k, "f": name, "quadrature": q2, "mc": mc, "mc_stderr": se,
                         "quad_error": abs(q2 - q1), "z": z})
    results["rn_change"] = {"rows": rows, "max_z": worst}
    checks.append(check("rn change of variables max z", worst, "<=", 3.0))


ARCHIMEDES_PAIRS = ((np.pi / 2, np.pi / 2), (0.3, 0.7), (1.0, 1.0), (2.5, 0.4), (1.2, 2.9))


def _verify_archimedes(cfg, results, checks):
    rng = make_rng(cfg.seed, (6,))
    out = []
    for a, b in ARCHIMEDES_PAIRS:
        p = qt.sample_class(rng, a, cfg.samples)
        q = qt.sample_class(rng, b, cfg.samples)
        ang = qt.theta(qt.qmul(p, q))
        ks = _ks(ang, qt.class_convolve(a, b).cdf)
        out.append({"alpha": a, "beta": b, "ks": ks})
    results["archimedes"] = out
    checks.append(check("archimedes max KS", max(o["ks"] for o in out), "<", 0.005))


def _verify_haar(cfg, results, checks):
    rng = make_rng(cfg.seed, (7,))
    ang = qt.theta(qt.sample_haar(rng, cfg.samples))
    ks = _ks(ang, qt.haar_angle_cdf)
    balls = []
    worst = 0.0
    for a in (0.5, 1.0, np.pi / 2):
        vol = qt.haar_angle(a)[1]
        frac = float(np.mean(ang < a))
        se = math.sqrt(vol * (1 - vol) / cfg.samples)
        worst = max(worst, abs(frac - vol) / se)
        balls.append({"alpha": a, "predicted": vol, "mc": frac, "stderr": se})
    results["haar"] = {"ks": ks, "balls": balls}
    checks += [check("haar KS", ks, "<", 0.005), check("ball volume max z", worst, "<", 3.0)]


def _verify_commutator(cfg, results, checks):
    rng = make_rng(cfg.seed, (8,))
    worst = 0.0
    for v in qt.sample_haar(rng, 100):
        W = qt.UnitQuaternion.from_array(v)
        T, R = qt.solve_commutator(W)
        C = qt.commutator(T, R)
        worst = max(worst, float(np.linalg.norm(C.to_moebius().m - W.to_moebius().m)))
    results["commutator"] = {"max_residual": worst}
    checks.append(check("commutator residual", worst, "<", 1e-12))


def _verify_surface(cfg, results, checks):
    g = parse_group(cfg.group)
    if g.kind != "surface":
        g = GroupDescriptor.surface(3)
    rho0 = padded_rotation_set(2 * g.rank - 2)
    worst, alpha_err = 0.0, 0.0
    for s in np.linspace(0, 1, 5):
        for r in (0.02, 0.05, 0.1, 0.5, 1.0):
            rho = build_surface_family(FamilyParams(float(s), r), rho0, g.rank)
            worst = max(worst, rho.relator_residual())
            alpha_err = max(alpha_err, abs(alpha_of(rho) - r))
    results["surface"] = {"genus": g.rank, "max_relator_residual": worst, "max_alpha_error": alpha_err}
    checks.append(check("surface relator residual", worst, "<", 1e-10))


VERIFIERS = {
    "matrix-coefficient": _verify_matrix_coefficient,
    "rn-change": _verify_rn_change,
    "archimedes": _verify_archimedes,
    "haar": _verify_haar,
    "commutator": _verify_commutator,
    "surface": _verify_surface,
}


def run_quat_verify(cfg):
    results, checks = {}, []
    for name in cfg.checks or list(VERIFIERS):
        if name not in VERIFIERS:
            raise ValueError(f"unknown check {name!r}; choose from {sorted(VERIFIERS)}")
        t = time.perf_counter()
        VERIFIERS[name](cfg, results, checks)
        results.setdefault("_seconds", {})[name] = time.perf_counter() - t
    results.pop("_seconds")  # timing is not part of the numeric payload
    return results, checks, {}


def run_net(cfg):
    out, checks = [], []
    for n in cfg.n_values:
        net = qt.separated_net(n, make_rng(cfg.seed, (n,)))
        sep = qt.min_separation(net)
        bound = 1 / (100 * n ** (1 / 3))
        out.append({"n": n, "min_separation": sep if n > 1 else None, "bound": bound,
                    "achieved_times_cuberoot_n": sep * n ** (1 / 3) if n > 1 else None})
        if n > 1:
            checks.append(check(f"n={n} separation", sep, ">=", bound))
    return {"nets": out}, checks, {}


# -- selftest ----------------------------------------------------------------

def run_selftest(cfg):
    checks = []
    f3, s2 = GroupDescriptor.free(3), GroupDescriptor.surface(2)
    checks.append(check("a1 a1^-1 = e", len(reduce_word([1, -1], f3)), "<=", 0))
    checks.append(check("a1 a2 a2^-1 a1 length", len(reduce_word([1, 2, -2, 1], f3)), "<=", 2))
    checks.append(check("surface relator reduces", len(reduce_word(s2.relator(), s2)), "<=", 0))
    mu = symmetric_generating_measure(f3)
    checks.append(check("delta_e * mu = mu", convolve(FiniteGroupMeasure.dirac(f3), mu).tv_distance(mu),
                        "<", 1e-15))
    checks.append(check("H(uniform A u A^-1) - log 6", abs(entropy_H(mu) - math.log(6)), "<", 1e-12))
    checks.append(check("moments eps=0", abs(moments(mu, 0.0)[0] - 1), "<", 1e-12))
    checks.append(check("log_nrn scale_map(1)", abs(log_nrn(scale_map(1.0)) - 1), "<", 1e-12))
    checks.append(check("rn at z=0", abs(rn_derivative(scale_map(0.7), (0, 0, -1.0)) - math.exp(0.7)),
                        "<", 1e-12))
    checks.append(check("sigma0 at z=0", abs(sigma0(scale_map(0.7), (0, 0, -1.0)) + 0.7), "<", 1e-12))
    checks.append(check("scale_map(0, pi) rotation", log_nrn(scale_map(0.0, math.pi)), "<", 1e-12))
    checks.append(check("theta((1+i+j+k)/2)", abs(qt.theta(np.array([.5, .5, .5, .5])) - math.pi / 3),
                        "<", 1e-12))
    checks.append(check("ball volume pi", abs(qt.haar_angle(math.pi)[1] - 1), "<", 1e-15))
    T, R = qt.solve_commutator(qt.UnitQuaternion(-1.0, 0, 0, 0))
    checks.append(check("[T,R] = -1", abs(qt.commutator(T, R).a + 1), "<", 1e-12))
    checks.append(check("kappa identity", hm.kappa_estimate([qt.UnitQuaternion.one()], 4).kappa,
                        "<=", 0.0))
    checks.append(check("q_class_norm(pi/2)", abs(hm.q_class_norm(math.pi / 2, 4) - 1 / 3), "<", 1e-12))
    e = np.eye(2)
    checks.append(check("delta orthogonal lines", hm.angular_separation(e[:, :1], e[:, 1:]), ">=", 1.0))
    checks.append(check("grid 12 cells", build_grid(12).n, "<=", 12))
    grp = GroupDescriptor.free(4)
    B = padded_rotation_set(3)
    rot = Representation(grp, 1, {1: (scale_map(0.0, 0.6 * math.pi),),
                                  **{i + 2: (q.to_moebius(),) for i, q in enumerate(B)}})
    fp = transfer_fixed_point(rot, symmetric_generating_measure(grp), build_grid(500), tol=1e-12)
    checks.append(check("rotation fixed point |phi - 1|", float(np.abs(fp.density.values - 1).max()),
                        "<", 1e-12))
    return {"count": len(checks)}, checks, {}


RUNNERS = {
    "stationary": run_stationary,
    "entropy-sweep": run_entropy_sweep,
    "realize": run_realize,
    "cube": run_cube,
    "gap": run_gap,
    "quat-verify": run_quat_verify,
    "net": run_net,
    "selftest": run_selftest,
}
