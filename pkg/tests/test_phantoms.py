import numpy as np
import pytest

from src.helper.errors import DataError, DimensionError, ParameterError
from src.models.containers import Volume
from src.models.params import PhantomSpec, Tube
from src.services import phantoms


def z_tube(radius=2.0, intensity=1.0):
    return Tube(point=(8.0, 8.0, 0.0), direction=(0.0, 0.0, 1.0), radius=radius, intensity=intensity)


class TestPhantom:
    def test_on_axis_voxels_carry_intensity(self):
        v = phantoms.phantom(PhantomSpec(tubes=[z_tube(intensity=3.0)]), (17, 17, 9))
        np.testing.assert_allclose(v.data[8, 8, :], 3.0)

    def test_profile_at_one_radius(self):
        v = phantoms.phantom(PhantomSpec(tubes=[z_tube(radius=2.0)]), (17, 17, 5))
        assert v.data[10, 8, 2] == pytest.approx(np.exp(-0.5))
        assert v.data[8, 6, 2] == pytest.approx(np.exp(-0.5))

    def test_crossing_takes_maximum(self):
        x_tube = Tube(point=(0.0, 8.0, 8.0), direction=(1.0, 0.0, 0.0), radius=2.0)
        z = Tube(point=(8.0, 8.0, 0.0), direction=(0.0, 0.0, 1.0), radius=2.0)
        v = phantoms.phantom(PhantomSpec(tubes=[x_tube, z]), (17, 17, 17))
        assert v.data[8, 8, 8] == pytest.approx(1.0)

    def test_crossing_tubes_spec(self):
        spec = phantoms.crossing_tubes((32, 32, 32))
        assert len(spec.tubes) == 3
        v = phantoms.phantom(spec, (32, 32, 32))
        assert 0.9 < v.data.max() <= 1.0
        assert v.data.min() >= 0

    def test_bad_dims(self):
        with pytest.raises(DimensionError):
            phantoms.phantom(PhantomSpec(tubes=[z_tube()]), (8, 0, 8))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            Tube(point=(0, 0, 0), direction=(1.0, 1.0, 0.0), radius=1.0)
        with pytest.raises(ValueError):
            Tube(point=(0, 0, 0), direction=(1.0, 0.0, 0.0), radius=0.0)


class TestNoise:
    def test_zero_sigma_is_identity(self, rng):
        v = Volume(rng.standard_normal((4, 4, 4)))
        assert np.array_equal(phantoms.add_noise(v, 0.0, seed=1).data, v.data)

    def test_same_seed_same_noise(self):
        v = Volume(np.zeros((8, 8, 8)))
        a = phantoms.add_noise(v, 0.5, seed=7).data
        assert np.array_equal(a, phantoms.add_noise(v, 0.5, seed=7).data)
        assert not np.array_equal(a, phantoms.add_noise(v, 0.5, seed=8).data)

    def test_sample_deviation(self):
        v = Volume(np.ones((64, 64, 64)))
        out = phantoms.add_noise(v, 0.3, seed=42)
        assert np.std(out.data - v.data) == pytest.approx(0.3, rel=0.02)

    def test_complex_volume_gets_total_sigma(self):
        v = Volume(np.zeros((64, 64, 64), dtype=np.complex128))
        noise = phantoms.add_noise(v, 0.3, seed=3).data
        assert np.sqrt(np.mean(np.abs(noise) ** 2)) == pytest.approx(0.3, rel=0.02)

    def test_negative_sigma(self):
        with pytest.raises(ParameterError):
            phantoms.add_noise(Volume(np.zeros((2, 2, 2))), -1.0, seed=0)


class TestMetrics:
    def test_identical_inputs(self, rng):
        v = Volume(rng.standard_normal((6, 6, 6)))
        m = phantoms.metrics(v, v)
        assert m.rel_l2 == 0.0
        assert m.psnr == phantoms.PSNR_CAP_DB

    def test_constant_offset(self, rng):
        b = Volume(rng.standard_normal((6, 6, 6)))
        a = Volume(b.data + 0.5)
        peak = np.abs(b.data).max()
        assert phantoms.metrics(a, b).psnr == pytest.approx(20 * np.log10(peak / 0.5))

    def test_doubled_input(self, rng):
        b = Volume(rng.standard_normal((6, 6, 6)))
        assert phantoms.metrics(Volume(2 * b.data), b).rel_l2 == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            phantoms.metrics(Volume(np.zeros((2, 2, 2))), Volume(np.zeros((2, 2, 3))))

    def test_zero_reference(self, rng):
        zero = Volume(np.zeros((4, 4, 4)))
        assert phantoms.metrics(zero, zero).rel_l2 == 0.0
        with pytest.raises(DataError):
            phantoms.metrics(Volume(rng.standard_normal((4, 4, 4))), zero)


def test_pad_then_crop(rng):
    v = Volume(rng.standard_normal((5, 6, 7)))
    padded = phantoms.pad_volume(v, (2, 0, 3))
    assert padded.dims == (9, 6, 13)
    assert padded.data[0].sum() == 0
    assert np.array_equal(phantoms.crop_volume(padded, (2, 0, 3)).data, v.data)
    with pytest.raises(ParameterError):
        phantoms.pad_volume(v, (-1, 0, 0))
    with pytest.raises(DimensionError):
        phantoms.crop_volume(v, (3, 0, 0))
