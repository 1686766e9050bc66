"""Resource grid, QPSK mapping, and OFDM modulation round trips."""

import numpy as np
import pytest

from ofdmce.phy import (
    GridConfig,
    build_grid,
    extract_data,
    extract_pilot_ls,
    generate_pilots,
    ofdm_demodulate,
    ofdm_modulate,
    qpsk_demodulate,
    qpsk_modulate,
)

DEFAULT = GridConfig()
SMALL = GridConfig(n_subcarriers=64, n_pilots=8, n_symbols=2, cp_len=12)


def random_grid(rng: np.random.Generator, cfg: GridConfig) -> np.ndarray:
    bits = rng.integers(0, 2, size=cfg.data_bits_per_block)
    pilots = generate_pilots(7, cfg)
    return build_grid(qpsk_modulate(bits), pilots, cfg)


# ---------------------------------------------------------------------------
# Grid configuration
# ---------------------------------------------------------------------------


class TestGridConfig:
    def test_default_dimensions(self):
        assert DEFAULT.pilot_spacing == 8
        assert DEFAULT.n_data == 448
        assert DEFAULT.samples_per_block == 2 * (512 + 40)
        assert DEFAULT.data_bits_per_block == 2 * 2 * 448

    def test_pilot_indices_are_spacing_multiples(self):
        assert np.array_equal(DEFAULT.pilot_indices, np.arange(0, 512, 8))
        assert DEFAULT.pilot_indices[0] == 0, "subcarrier 0 carries a pilot"

    def test_pilots_and_data_partition_the_grid(self):
        """Every subcarrier is exactly one of pilot or data."""
        merged = np.concatenate([DEFAULT.pilot_indices, DEFAULT.data_indices])
        assert np.array_equal(np.sort(merged), np.arange(512))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_subcarriers": 500},
            {"n_pilots": 48},
            {"n_pilots": 1024},
            {"n_symbols": 0},
            {"cp_len": -1},
            {"cp_len": 513},
        ],
    )
    def test_bad_dimensions_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GridConfig(**kwargs)


# ---------------------------------------------------------------------------
# QPSK mapping
# ---------------------------------------------------------------------------


class TestQpsk:
    def test_constellation_points(self):
        """All four bit pairs land on the Gray-mapped corners."""
        syms = qpsk_modulate(np.array([0, 0, 0, 1, 1, 0, 1, 1]))
        root = 1 / np.sqrt(2)
        expected = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) * root
        assert np.allclose(syms, expected, atol=1e-15), f"got {syms}"

    def test_unit_modulus(self):
        rng = np.random.default_rng(3)
        syms = qpsk_modulate(rng.integers(0, 2, size=256))
        assert np.abs(np.abs(syms) ** 2 - 1.0).max() <= 1e-15

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, size=2048)
        assert np.array_equal(qpsk_demodulate(qpsk_modulate(bits)), bits)

    def test_boundary_decides_bit_zero(self):
        """Components exactly on the decision boundary demap to 0."""
        bits = qpsk_demodulate(np.array([0.0 + 0.0j, 0.0 - 0.3j, 0.5 + 0.0j]))
        assert bits.tolist() == [0, 0, 0, 1, 0, 0]

    def test_odd_bit_count_rejected(self):
        with pytest.raises(ValueError, match="even"):
            qpsk_modulate(np.zeros(5))


# ---------------------------------------------------------------------------
# Pilots
# ---------------------------------------------------------------------------


class TestPilots:
    def test_shape_and_modulus(self):
        pilots = generate_pilots(123, DEFAULT)
        assert pilots.shape == (64, 2)
        assert np.abs(np.abs(pilots) ** 2 - 1.0).max() <= 1e-15

    def test_reproducible_from_seed(self):
        assert np.array_equal(generate_pilots(9, DEFAULT), generate_pilots(9, DEFAULT))
        assert not np.array_equal(generate_pilots(9, DEFAULT), generate_pilots(10, DEFAULT))


# ---------------------------------------------------------------------------
# Grid assembly
# ---------------------------------------------------------------------------


class TestGridAssembly:
    def test_data_round_trip(self):
        rng = np.random.default_rng(5)
        data = qpsk_modulate(rng.integers(0, 2, size=SMALL.data_bits_per_block))
        grid = build_grid(data, generate_pilots(1, SMALL), SMALL)
        assert grid.shape == (64, 2)
        assert np.array_equal(extract_data(grid, SMALL), data)

    def test_pilot_cells_hold_pilot_values(self):
        pilots = generate_pilots(2, SMALL)
        grid = build_grid(np.zeros(SMALL.n_symbols * SMALL.n_data), pilots, SMALL)
        assert np.array_equal(grid[SMALL.pilot_indices, :], pilots)

    def test_wrong_data_length_rejected(self):
        with pytest.raises(ValueError, match="data symbols"):
            build_grid(np.zeros(10), generate_pilots(1, SMALL), SMALL)


# ---------------------------------------------------------------------------
# OFDM modulation
# ---------------------------------------------------------------------------


class TestOfdmModulate:
    def test_dc_only_cell_gives_constant_body(self):
        """One unit cell on subcarrier 0 spreads to a constant 1/sqrt(N)."""
        cfg = GridConfig(n_subcarriers=64, n_pilots=8, n_symbols=1, cp_len=0)
        grid = np.zeros((64, 1), dtype=complex)
        grid[0, 0] = 1.0
        samples = ofdm_modulate(grid, cfg)
        assert np.allclose(samples, np.full(64, 1 / 8.0), atol=1e-14)

    def test_cyclic_prefix_copies_symbol_tail(self):
        rng = np.random.default_rng(6)
        grid = random_grid(rng, SMALL)
        samples = ofdm_modulate(grid, SMALL)
        per_sym = samples.reshape(SMALL.n_symbols, SMALL.samples_per_symbol)
        cp, body = per_sym[:, : SMALL.cp_len], per_sym[:, SMALL.cp_len :]
        assert np.array_equal(cp, body[:, -SMALL.cp_len :])

    def test_sample_power_matches_cell_power(self):
        """sqrt(N) scaling keeps body power equal to grid cell power."""
        rng = np.random.default_rng(7)
        grid = random_grid(rng, SMALL)
        body = ofdm_modulate(grid, SMALL).reshape(SMALL.n_symbols, -1)[:, SMALL.cp_len :]
        assert abs(np.mean(np.abs(body) ** 2) - np.mean(np.abs(grid) ** 2)) <= 1e-10

    def test_round_trip(self):
        rng = np.random.default_rng(8)
        grid = random_grid(rng, DEFAULT)
        back = ofdm_demodulate(ofdm_modulate(grid, DEFAULT), DEFAULT)
        assert np.abs(back - grid).max() <= 1e-12

    def test_batched_round_trip_matches_single(self):
        rng = np.random.default_rng(9)
        grids = np.stack([random_grid(rng, SMALL) for _ in range(4)])
        batched = ofdm_demodulate(ofdm_modulate(grids, SMALL), SMALL)
        for i in range(4):
            single = ofdm_demodulate(ofdm_modulate(grids[i], SMALL), SMALL)
            assert np.array_equal(batched[i], single)

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="grid"):
            ofdm_modulate(np.zeros((8, 3)), SMALL)
        with pytest.raises(ValueError, match="samples"):
            ofdm_demodulate(np.zeros(17), SMALL)


# ---------------------------------------------------------------------------
# Pilot extraction and the noiseless end-to-end chain
# ---------------------------------------------------------------------------


class TestEndToEnd:
    def test_pilot_ls_on_clean_grid_is_all_ones(self):
        """Without a channel the LS observation is exactly H = 1."""
        pilots = generate_pilots(11, SMALL)
        grid = build_grid(np.zeros(SMALL.n_symbols * SMALL.n_data), pilots, SMALL)
        ls = extract_pilot_ls(grid, pilots, SMALL)
        assert np.abs(ls - 1.0).max() <= 1e-15

    def test_noiseless_bits_survive_the_chain(self):
        rng = np.random.default_rng(12)
        bits = rng.integers(0, 2, size=DEFAULT.data_bits_per_block)
        pilots = generate_pilots(13, DEFAULT)
        grid = build_grid(qpsk_modulate(bits), pilots, DEFAULT)
        rx_grid = ofdm_demodulate(ofdm_modulate(grid, DEFAULT), DEFAULT)
        recovered = qpsk_demodulate(extract_data(rx_grid, DEFAULT))
        assert np.array_equal(recovered, bits)
