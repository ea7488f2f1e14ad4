"""Acceptance suite: one test per criterion, at the stated tolerances and budgets."""

import json
import math
import time

import numpy as np
import pytest

from spoints import cli, jets, lse, radial, scattering
from spoints.potentials import bump, gaussian, support_ball, with_coupling, zero_potential

from oracles import bump_q, fd_bound_state_count, gaussian_q


def _kernel(p, n):
    return lse.assemble_kernel(lse.build_grid(support_ball(p), n), p)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_free_space_identities(rng):
    with Timer() as t:
        p = zero_potential(1.0)
        K = _kernel(p, 16)
        phi = lse.solve_field(K, 1.0)
        y = np.array([0.31, -0.27, 0.113])
        G = lse.green_function(K, y)
        nodes = K.grid.nodes
        basis = jets.q_harmonic_basis(K, 2)
        pts = rng.uniform(-0.5, 0.5, size=(10, 3))
        ranks = [jets.numerical_rank(jets.jet_matrix(basis, a, 2).matrix)[0] for a in pts]
    np.testing.assert_allclose(phi.values, 1.0, rtol=0, atol=1e-15)
    np.testing.assert_allclose(G.values, 1.0 / (4 * np.pi * np.linalg.norm(nodes - y, axis=1)),
                               rtol=1e-14)
    assert ranks == [9] * 10
    assert t.elapsed < 10


@pytest.mark.slow
def test_criterion_2_dichotomy():
    with Timer() as t:
        base = gaussian(-1.0)
        alpha_c = radial.first_critical_coupling(base)
        below = with_coupling(base, 0.5 * alpha_c)
        above = with_coupling(base, 1.5 * alpha_c)
        scan_below = jets.scan_spoints(_kernel(below, 24), 1, resolution=32)
        scan_above = jets.scan_spoints(_kernel(above, 24), 1, resolution=32)
        zeros = radial.radial_phi(above).zeros()
    assert scan_below.candidates == []
    spheres = scan_above.sphere_radii()
    assert len(zeros) == 1 and len(spheres) == 1
    assert abs(spheres[0] - zeros[0]) <= 2 * scan_above.cell
    assert t.elapsed < 300


@pytest.mark.slow
def test_criterion_3_cross_pipeline_phi():
    with Timer() as t:
        p = gaussian(-8.0)
        K = _kernel(p, 24)
        phi3 = lse.solve_field(K, 1.0)
        phir = radial.radial_phi(p)
        radii = cli.cross_radii(p.support_radius, phir.zeros(), K.grid.h)
        x = radii[:, None] * np.array([0.6, 0.48, 0.64])
        rel = np.abs(phi3.interpolate(x) - phir(radii)) / np.abs(phir(radii))
    assert len(radii) == 20
    assert rel.max() <= 0.01
    assert t.elapsed < 120


SPECTRA = [(bump(-4.0, 1.0), bump_q(-4.0), (0, 0)),
           (gaussian(-8.0), gaussian_q(-8.0), (1, 0)),
           (gaussian(-20.0), gaussian_q(-20.0), (2, 1))]


def test_criterion_4_kram_sum_rule():
    with Timer() as t:
        for p, q, expected in SPECTRA:
            counts = tuple(radial.count_bound_states(p, l) for l in (0, 1))
            assert counts == expected
            assert tuple(fd_bound_state_count(q, l) for l in (0, 1)) == expected
            for l in range(3):
                for m in range(l + 1):
                    rep = radial.verify_sum_rule(p, m, l)
                    assert rep.z_measured == rep.z_predicted, rep.as_dict()
                    assert not rep.tangential
    assert t.elapsed < 30


def test_criterion_5_levinson():
    with Timer() as t:
        rep = scattering.levinson_check(gaussian(-20.0), L_max=2)
    for ch in rep.channels:
        assert ch["defect"] <= 0.02 * math.pi
    assert rep.total_index == 5
    assert rep.phase_index == 5
    assert t.elapsed < 60


@pytest.mark.slow
def test_criterion_6_second_order_consistency():
    with Timer() as t:
        p = gaussian(-16.0)
        oracle = radial.find_s_spheres(p, 2)
        s16 = jets.scan_spoints(_kernel(p, 16), 2, resolution=32)
        s24 = jets.scan_spoints(_kernel(p, 24), 2, resolution=32)
    expected = list(oracle.radii)
    assert expected
    found = s24.sphere_radii()
    assert found
    for r in expected:
        assert min(abs(np.asarray(found) - r)) <= 2 * s24.cell
    assert jets.persistent_candidates(s24, s16)
    assert t.elapsed < 600


def test_criterion_7_convention_sensitivity():
    with Timer() as t:
        base = gaussian(-1.0)
        alpha_c = radial.first_critical_coupling(base)
        sig, slope = [], []
        for f in (0.9, 1.0, 1.1):
            p = with_coupling(base, f * alpha_c)
            sig.append(lse.check_convention(_kernel(p, 16)).sigma_min)
            slope.append(radial.asymptotic_slope(p)[0])
    assert sig[1] < sig[0] and sig[1] < sig[2]
    assert slope[0] * slope[2] < 0
    assert t.elapsed < 120


def test_criterion_8_psi_identity():
    with Timer() as t:
        res = radial.psi_residual(gaussian(-8.0))
        free = radial.solve_psi_radial(zero_potential(1.0))
        r = np.linspace(0.05, 3.0, 60)
    assert res <= 1e-6
    np.testing.assert_allclose(free(r), r**2, rtol=1e-12)
    assert t.elapsed < 10


CONFIG = """
[run]
n = 12
m = 1, 2
scan_resolution = 12
l_max = 2
n_k = 128
alpha_range = 0.25:0.75:0.25

[potential]
shape = gaussian
depth = -16
width = 1
"""


@pytest.mark.slow
def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(CONFIG)
    reports = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["all", "--config", str(cfg), "--out", str(out)]) == 0
        reports.append((out / "report.json").read_bytes())
    assert reports[0] == reports[1]
    assert json.loads(reports[0])["exit_code"] == 0
