import numpy as np
import pytest

from qpat2d import build_grid, load_field_csv, make_phantom, save_field_csv, save_field_pgm
from qpat2d.phantoms import Inclusion, PhantomSpec

from conftest import MU_HI, MU_LO


class TestMakePhantom:
    def test_background_only(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        pair = make_phantom(PhantomSpec(0.1, 1.0), grid, MU_LO, MU_HI)
        np.testing.assert_array_equal(pair.mu_a, 0.1)
        np.testing.assert_array_equal(pair.mu_s, 1.0)

    def test_disk_cell_count(self):
        grid = build_grid(64, 64, 1.0, 1.0)
        spec = PhantomSpec(0.1, 1.0, [Inclusion("disk", (0.5, 0.5, 0.25), 0.2, 1.0)])
        pair = make_phantom(spec, grid, MU_LO, MU_HI)
        count = int(np.sum(pair.mu_a == 0.2))
        expected = np.pi * (0.25 * 64) ** 2
        perimeter = 2 * np.pi * 0.25 * 64
        assert abs(count - expected) <= perimeter

    def test_rectangle(self):
        grid = build_grid(16, 16, 1.0, 1.0)
        spec = PhantomSpec(0.1, 1.0, [Inclusion("rect", (0.25, 0.25, 0.75, 0.75), 0.3, 2.0)])
        pair = make_phantom(spec, grid, MU_LO, MU_HI)
        assert pair.mu_a[8, 8] == 0.3
        assert pair.mu_a[0, 0] == 0.1

    def test_smooth_mode_admissible(self):
        grid = build_grid(32, 32, 1.0, 1.0)
        spec = PhantomSpec(
            0.1, 1.0, [Inclusion("disk", (0.5, 0.5, 0.2), 0.2, 1.5)],
            smooth=True, smooth_width=0.1,
        )
        pair = make_phantom(spec, grid, MU_LO, MU_HI)
        assert np.all(pair.mu_a >= 0.1) and np.all(pair.mu_a <= 0.2)
        assert pair.mu_a[16, 16] > 0.19  # bump peak at the center

    def test_rejects_out_of_domain_geometry(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        spec = PhantomSpec(0.1, 1.0, [Inclusion("disk", (0.9, 0.5, 0.2), 0.2, 1.0)])
        with pytest.raises(ValueError):
            make_phantom(spec, grid, MU_LO, MU_HI)

    def test_rejects_out_of_bounds_values(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        spec = PhantomSpec(0.1, 1.0, [Inclusion("disk", (0.5, 0.5, 0.2), 20.0, 1.0)])
        with pytest.raises(ValueError):
            make_phantom(spec, grid, MU_LO, MU_HI)

    def test_rejects_unknown_shape(self):
        with pytest.raises(ValueError):
            Inclusion("triangle", (0.5, 0.5, 0.2), 0.2, 1.0)


class TestCsvRoundTrip:
    def test_random_field_bit_equal(self, tmp_path):
        grid = build_grid(9, 7, 1.3, 0.8)
        rng = np.random.default_rng(19)
        field = rng.standard_normal(grid.shape) * 1e3
        path = tmp_path / "field.csv"
        save_field_csv(path, field, grid)
        loaded, file_grid = load_field_csv(path, grid)
        np.testing.assert_array_equal(loaded, field)
        assert file_grid == grid

    def test_wrong_grid_rejected(self, tmp_path):
        grid = build_grid(8, 8, 1.0, 1.0)
        other = build_grid(16, 8, 1.0, 1.0)
        path = tmp_path / "field.csv"
        save_field_csv(path, np.zeros(grid.shape), grid)
        with pytest.raises(ValueError):
            load_field_csv(path, other)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3\n4,5,6\n")
        with pytest.raises(ValueError):
            load_field_csv(path)

    def test_malformed_row_rejected(self, tmp_path):
        grid = build_grid(2, 3, 1.0, 1.0)
        path = tmp_path / "bad.csv"
        path.write_text("nx,ny,lx,ly\n2,3,1,1\n1,2,3\n4,5\n")
        with pytest.raises(ValueError):
            load_field_csv(path, grid)

    def test_shape_mismatch_on_save(self, tmp_path):
        grid = build_grid(4, 4, 1.0, 1.0)
        with pytest.raises(ValueError):
            save_field_csv(tmp_path / "x.csv", np.zeros((3, 4)), grid)


class TestPgm:
    def test_constant_field_all_pixels_equal(self, tmp_path):
        path = tmp_path / "c.pgm"
        save_field_pgm(path, np.full((5, 4), 3.7))
        lines = path.read_text().splitlines()
        assert lines[0] == "P2"
        assert lines[1] == "5 4"
        values = {v for line in lines[3:] for v in line.split()}
        assert values == {"0"}

    def test_linear_scaling_extremes(self, tmp_path):
        field = np.array([[0.0, 0.5], [1.0, 0.25]])
        path = tmp_path / "s.pgm"
        save_field_pgm(path, field)
        body = " ".join(path.read_text().splitlines()[3:]).split()
        assert "0" in body and "65535" in body
