"""Mesh diagnostics: FHS Chern number, Zak winding, EGP, CSV replay."""
import numpy as np
import pytest

from topoqc import measure
from topoqc.invariants import (AmbiguousWinding, ChernResult, DegenerateLink,
                               MeshGrid, NotQuantized, OverlapField, chern,
                               egp, integer_field, load_overlap_csv,
                               plaquette_field, save_overlap_csv, wrap_angle,
                               zak_phase, zak_winding)
from topoqc.model import Band, ModelParams

MESH = MeshGrid(8, 8)
ORACLE_MUS = (0.5, -0.5, 1.0, -1.0, 1.9, -1.9, 2.1, -2.1, 3.0, -3.0)


def _uniform_field(mesh, value=1.0 + 0j):
    raw = np.full((mesh.n_kx, mesh.n_ky, 2, 2, 2), np.nan, dtype=complex)
    raw[:, :, :, 1, 1] = value
    return OverlapField(mesh=mesh, raw=raw)


def _phase_field(mesh, phases_x, phases_y):
    raw = np.full((mesh.n_kx, mesh.n_ky, 2, 2, 2), np.nan, dtype=complex)
    raw[:, :, 0, 1, 1] = np.exp(1j * phases_x)
    raw[:, :, 1, 1, 1] = np.exp(1j * phases_y)
    return OverlapField(mesh=mesh, raw=raw)


def test_mesh_wraps():
    assert MESH.neighbor(7, 3, 0) == (0, 3)
    assert MESH.neighbor(2, 7, 1) == (2, 0)
    assert MESH.point(0, 0).kx == pytest.approx(-np.pi)


def test_plaquette_field_trivial():
    U = _uniform_field(MESH)
    f = plaquette_field(U, (2, 5))
    assert f == 0.0


def test_plaquette_field_small_phases():
    # plaquette log = a + b - c - d when inside the principal branch
    phases_x = np.zeros((8, 8))
    phases_y = np.zeros((8, 8))
    phases_x[0, 0] = 0.2   # a: U_x(0,0)
    phases_y[1, 0] = 0.3   # b: U_y(1,0)
    phases_x[0, 1] = 0.1   # c: U_x(0,1)
    phases_y[0, 0] = 0.1   # d: U_y(0,0)
    U = _phase_field(MESH, phases_x, phases_y)
    f = plaquette_field(U, (0, 0))
    assert f.real == pytest.approx(0.0, abs=1e-15)
    assert f.imag == pytest.approx(0.3, abs=1e-12)


def test_chern_trivial_field():
    res = chern(_uniform_field(MESH))
    assert res.C == 0 and res.admissible
    assert np.all(res.n == 0) and res.residual < 1e-15


def test_oracle_quantization_and_sign():
    for mu in ORACLE_MUS:
        U = measure.oracle_overlap_field(ModelParams(mu=mu), MESH)
        res = chern(U)
        want = 0 if abs(mu) > 2 else int(np.sign(mu))
        assert res.C == want, (mu, res.C)
        assert res.residual < 1e-9
        assert res.admissible
        assert np.max(np.abs(res.n)) <= 2
        assert res.n.sum() == res.C


def test_integer_field_matches_chern():
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH)
    n = integer_field(U)
    assert n.sum() == 1


def test_chern_mesh_mismatch():
    U = _uniform_field(MESH)
    with pytest.raises(ValueError):
        chern(U, mesh=MeshGrid(4, 4))


def test_corrupted_and_missing_links():
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH)
    # replacing one link only redistributes phase between the two
    # plaquettes it borders, so the total stays quantized
    raw = U.raw.copy()
    raw[3, 4, 0, 1, 1] = 0.5 + 0.5j
    assert chern(OverlapField(mesh=MESH, raw=raw)).C == 1
    # a dead link is rejected instead of silently normalized
    raw = U.raw.copy()
    raw[3, 4, 0, 1, 1] = 0.0
    with pytest.raises(DegenerateLink):
        chern(OverlapField(mesh=MESH, raw=raw))


def test_not_quantized_guard():
    # the quantization guard compares the rounding residual against
    # integer_tolerance; an impossible tolerance must trip it
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH)
    with pytest.raises(NotQuantized):
        chern(U, integer_tolerance=0.0)


def test_degenerate_link_floor():
    U = _uniform_field(MESH, value=0.01 + 0j)
    with pytest.raises(DegenerateLink):
        chern(U)
    ok = OverlapField(mesh=MESH, raw=U.raw, modulus_floor=0.0)
    assert chern(ok).C == 0


def test_zak_phase_rows():
    U = _uniform_field(MESH)
    assert zak_phase(U, 3) == 0.0
    phases_x = np.zeros((8, 8))
    phases_x[:, 2] = np.pi / 16  # row 2 picks up 8 * pi/16 = pi/2
    U = _phase_field(MESH, phases_x, np.zeros((8, 8)))
    assert zak_phase(U, 2) == pytest.approx(np.pi / 2, abs=1e-12)


def test_zak_winding_synthetic():
    assert zak_winding(np.zeros(8)) == 0
    ramp = -np.linspace(0, 2 * np.pi, 9)[:-1]  # one negative turn
    assert zak_winding(ramp) == 1
    assert zak_winding(-ramp) == -1
    with pytest.raises(AmbiguousWinding):
        zak_winding(np.array([0.0, np.pi - 0.05, 0.0, 0.0]))


def test_zak_profile_oracle():
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH)
    prof = measure.zak_profile(U)
    assert zak_winding(prof) == 1
    incs = [abs(wrap_angle(prof.phi[(j + 1) % 8] - prof.phi[j]))
            for j in range(8)]
    assert max(incs) > 1.5  # sharp jump across the zone edge

    U = measure.oracle_overlap_field(ModelParams(mu=2.1), MESH)
    prof = measure.zak_profile(U)
    assert zak_winding(prof) == 0
    incs = [abs(wrap_angle(prof.phi[(j + 1) % 8] - prof.phi[j]))
            for j in range(8)]
    assert max(incs) < 1.5


def test_chern_equals_zak_winding():
    for mu in ORACLE_MUS:
        U = measure.oracle_overlap_field(ModelParams(mu=mu), MESH)
        assert chern(U).C == zak_winding(measure.zak_profile(U))


def test_egp_requires_energies():
    U = _uniform_field(MESH)
    with pytest.raises(ValueError):
        egp(U, 2.1, 0)


def test_egp_rejects_bad_beta():
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH,
                                     band_pairs=measure.ALL_PAIRS)
    with pytest.raises(ValueError):
        egp(U, 0.0, 0)


def test_egp_zak_limit():
    for mu in (1.9, 2.1):
        U = measure.oracle_overlap_field(ModelParams(mu=mu), MESH,
                                         band_pairs=measure.ALL_PAIRS)
        zak = measure.zak_profile(U).phi
        prof = measure.egp_profile(U, 50.0)
        for a, b in zip(prof.phiE, zak):
            assert abs(wrap_angle(a - b)) < 1e-3


def test_egp_deviation_shrinks_with_beta():
    for mu in (1.9, 2.1):
        U = measure.oracle_overlap_field(ModelParams(mu=mu), MESH,
                                         band_pairs=measure.ALL_PAIRS)
        zak = measure.zak_profile(U).phi
        devs = []
        for beta in (2.1, 4.2, 8.4):
            prof = measure.egp_profile(U, beta)
            devs.append([abs(wrap_angle(a - b)) for a, b in zip(prof.phiE, zak)])
        for j in range(MESH.n_ky):
            assert devs[0][j] >= devs[1][j] - 1e-12
            assert devs[1][j] >= devs[2][j] - 1e-12


def test_egp_scaled_evaluator_matches_direct():
    # at small beta the thermal product can be formed directly; the
    # log-scaled evaluator must agree to machine precision
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH,
                                     band_pairs=measure.ALL_PAIRS)
    beta = 0.4
    for ky in range(8):
        m = np.eye(2, dtype=complex)
        for i in range(8):
            e = float(U.energies[i, ky]) * beta
            m = m @ (np.diag([np.exp(-e), np.exp(e)]) @ U.raw[i, ky, 0])
        direct = float(np.angle(np.linalg.det(np.eye(2) + m)))
        assert abs(egp(U, beta, ky) - direct) < 1e-12


def test_egp_large_beta_no_overflow():
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH,
                                     band_pairs=measure.ALL_PAIRS)
    val = egp(U, 500.0, 0)  # beta*E ~ 2000 overflows a naive product
    assert np.isfinite(val)


def test_egp_incomplete_matrix():
    # a minus-band-only field lacks the interband entries of the 2x2
    # link matrices
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH)
    with pytest.raises(DegenerateLink):
        egp(U, 2.1, 0)


def test_gauge_invariance():
    rng = np.random.default_rng(41)
    for mu in (1.9, 2.1):
        U = measure.oracle_overlap_field(ModelParams(mu=mu), MESH,
                                         band_pairs=measure.ALL_PAIRS)
        base_c = chern(U).C
        base_zak = zak_winding(measure.zak_profile(U))
        base_egp = zak_winding(measure.egp_profile(U, 2.1).phiE)
        base_sum = integer_field(U).sum()
        for _ in range(20):
            theta = rng.uniform(0, 2 * np.pi, size=(8, 8, 2))
            raw = np.array(U.raw)
            for i in range(8):
                for j in range(8):
                    for d in range(2):
                        i2, j2 = MESH.neighbor(i, j, d)
                        bra = np.exp(-1j * theta[i, j])
                        ket = np.exp(1j * theta[i2, j2])
                        raw[i, j, d] = bra[:, None] * raw[i, j, d] * ket[None, :]
            G = OverlapField(mesh=MESH, raw=raw, energies=U.energies)
            assert chern(G).C == base_c
            assert integer_field(G).sum() == base_sum
            assert zak_winding(measure.zak_profile(G)) == base_zak
            assert zak_winding(measure.egp_profile(G, 2.1).phiE) == base_egp


def test_csv_round_trip(tmp_path):
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH,
                                     band_pairs=measure.ALL_PAIRS)
    path = tmp_path / "field.csv"
    save_overlap_csv(U, path)
    back = load_overlap_csv(path)
    assert back.mesh == MESH
    mask = ~np.isnan(U.raw)
    assert np.array_equal(mask, ~np.isnan(back.raw))
    assert np.allclose(U.raw[mask], back.raw[mask], atol=0, rtol=0)
    # replayed data feeds the full pipeline
    assert chern(back).C == 1


def test_csv_partial_field(tmp_path):
    U = measure.oracle_overlap_field(ModelParams(mu=1.9), MESH)
    path = tmp_path / "minus.csv"
    save_overlap_csv(U, path)
    back = load_overlap_csv(path)
    assert chern(back).C == 1
    with pytest.raises(ValueError):
        egp(back, 2.1, 0)  # energies not stored in the CSV


def test_csv_header_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        load_overlap_csv(path)


def test_field_shape_validation():
    with pytest.raises(ValueError):
        OverlapField(mesh=MESH, raw=np.zeros((2, 2, 2, 2, 2), dtype=complex))
