import itertools

import numpy as np
import pytest

from copygate.geometry import (
    CESIUM,
    RUBIDIUM,
    AtomSpec,
    BlockadeMatrix,
    C6Table,
    Layout,
    Species,
    pairwise_blockade,
    ring_layout,
    uniform_blockade,
)


def test_species_decay_rates():
    assert CESIUM.gamma == pytest.approx(1.0 / 176.0)
    assert RUBIDIUM.gamma == pytest.approx(1.0 / 190.0)
    with pytest.raises(ValueError):
        Species("X", -1.0)


def test_layout_requires_exactly_one_data_atom():
    a = AtomSpec(CESIUM, "ancilla", (0.0, 0.0))
    with pytest.raises(ValueError):
        Layout((a,))
    d1 = AtomSpec(RUBIDIUM, "data", (0.0, 0.0))
    d2 = AtomSpec(RUBIDIUM, "data", (3.0, 0.0))
    with pytest.raises(ValueError):
        Layout((d1, d2))


def test_layout_rejects_close_pairs():
    d = AtomSpec(RUBIDIUM, "data", (0.0, 0.0))
    a = AtomSpec(CESIUM, "ancilla", (1.5, 0.0))
    with pytest.raises(ValueError):
        Layout((d, a), min_separation=2.0)
    # exactly at the minimum is allowed
    Layout((d, AtomSpec(CESIUM, "ancilla", (2.0, 0.0))), min_separation=2.0)


def test_ring_layout_single_ancilla():
    layout = ring_layout(1, radius=2.0)
    assert layout.n_ancillae == 1
    assert layout.data_index == 0
    assert layout.distances()[0, 1] == pytest.approx(2.0)


def test_ring_layout_two_ancillae_diametrically_opposed():
    layout = ring_layout(2, radius=2.0)
    d = layout.distances()
    assert d[1, 2] == pytest.approx(4.0)


def test_ring_layout_five_ancillae_nearest_chord():
    layout = ring_layout(5, radius=2.0)
    d = layout.distances()
    anc = d[1:, 1:]
    nearest = anc[anc > 0].min()
    assert nearest == pytest.approx(2.0 * 2.0 * np.sin(np.radians(36.0)), rel=1e-12)
    assert nearest == pytest.approx(2.351, abs=5e-4)


def test_ring_layout_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ring_layout(0, radius=2.0)
    with pytest.raises(ValueError):
        ring_layout(3, radius=-1.0)
    # radius below the minimum separation puts every ancilla too close
    with pytest.raises(ValueError):
        ring_layout(3, radius=1.0)


def test_ring_layout_distance_multiset_rotation_invariant():
    base = sorted(ring_layout(5, radius=2.0).distances().ravel())
    # relabeling ancillae is a rotation of the polygon; distances unchanged
    layout = ring_layout(5, radius=2.0)
    rolled = Layout((layout.atoms[0],) + layout.atoms[2:] + (layout.atoms[1],))
    assert np.allclose(sorted(rolled.distances().ravel()), base)


def test_c6_table_lookup_and_validation():
    table = C6Table()
    assert table.coefficient(CESIUM, CESIUM) == -2.9
    assert table.coefficient(CESIUM, RUBIDIUM) == -1.7
    assert table.coefficient(RUBIDIUM, CESIUM) == -1.7
    with pytest.raises(KeyError):
        table.coefficient(RUBIDIUM, RUBIDIUM)
    with pytest.raises(ValueError):
        C6Table(c6_cs_cs=0.0)


def test_pairwise_blockade_values_at_two_microns():
    # Cs-Cs pair: |V| = 2900 / 64 MHz; Cs-Rb pair: |V| = 1700 / 64 MHz
    d = AtomSpec(RUBIDIUM, "data", (0.0, 0.0))
    a1 = AtomSpec(CESIUM, "ancilla", (2.0, 0.0))
    a2 = AtomSpec(CESIUM, "ancilla", (2.0, 2.0))
    v = pairwise_blockade(Layout((d, a1, a2))).v_mhz
    assert v[0, 1] == pytest.approx(-1700.0 / 64.0)
    assert v[0, 1] == pytest.approx(-26.5625)
    assert v[1, 2] == pytest.approx(-2900.0 / 64.0)
    assert v[1, 2] == pytest.approx(-45.3125)


def test_pairwise_blockade_r6_scaling():
    d = AtomSpec(RUBIDIUM, "data", (0.0, 0.0))
    near = pairwise_blockade(Layout((d, AtomSpec(CESIUM, "ancilla", (2.0, 0.0)))))
    far = pairwise_blockade(Layout((d, AtomSpec(CESIUM, "ancilla", (4.0, 0.0)))))
    assert near.v_mhz[0, 1] == pytest.approx(64.0 * far.v_mhz[0, 1])


def test_blockade_monotone_in_distance():
    d = AtomSpec(RUBIDIUM, "data", (0.0, 0.0))
    mags = []
    for r in (2.0, 2.5, 3.0, 4.0):
        layout = Layout((d, AtomSpec(CESIUM, "ancilla", (r, 0.0))))
        mags.append(abs(pairwise_blockade(layout).v_mhz[0, 1]))
    assert all(a > b for a, b in itertools.pairwise(mags))


def test_blockade_matrix_invariants():
    v = pairwise_blockade(ring_layout(4, radius=2.0))
    assert np.allclose(v.v_mhz, v.v_mhz.T)
    assert np.all(np.diag(v.v_mhz) == 0.0)
    assert v.max_abs_mhz == pytest.approx(26.5625)
    with pytest.raises(ValueError):
        BlockadeMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        BlockadeMatrix(np.array([[1.0, 2.0], [2.0, 0.0]]))


def test_uniform_blockade():
    v = uniform_blockade(3, 45.0)
    assert v.v_mhz.shape == (3, 3)
    off = v.v_mhz[~np.eye(3, dtype=bool)]
    assert np.all(off == 45.0)
    assert np.all(np.diag(v.v_mhz) == 0.0)
