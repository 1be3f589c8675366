import numpy as np
import pytest

from slowwave.errors import ScheduleOverlap, SupportViolation
from slowwave.helmholtz import curl, divergence
from slowwave.signal import compute_dff, spatial_mean
from slowwave.synth import (
    EventSpec,
    make_fig2b_stimulus,
    make_manufactured_field,
    make_recording,
    make_translating_blob,
)


class TestTranslatingBlob:
    def test_zero_velocity_static(self):
        stack, _ = make_translating_blob(velocity=(0.0, 0.0), n_frames=4)
        for t in range(1, 4):
            assert np.array_equal(stack[t], stack[0])

    def test_closed_form_values(self):
        stack, truth = make_translating_blob(shape=(32, 32), velocity=(0.5, -0.25),
                                             n_frames=3, sigma_blob=4.0,
                                             amplitude=2.0, background=1.0)
        r0, c0 = truth["center0"]
        for t in range(3):
            cr, cc = r0 + 0.5 * t, c0 - 0.25 * t
            rr, cols = np.mgrid[0:32, 0:32].astype(float)
            want = 1.0 + 2.0 * np.exp(
                -((rr - cr) ** 2 + (cols - cc) ** 2) / (2 * 4.0 ** 2))
            assert np.allclose(stack[t], want)

    def test_shift_by_one_frame(self):
        # integer velocity: frame t+1 is frame t rolled by one pixel
        stack, _ = make_translating_blob(shape=(40, 40), velocity=(1.0, 0.0),
                                         n_frames=2, sigma_blob=4.0)
        rolled = np.roll(stack[0], 1, axis=0)
        assert np.allclose(stack[1][5:-5], rolled[5:-5], atol=1e-10)

    def test_velocity_limit(self):
        with pytest.raises(ValueError):
            make_translating_blob(velocity=(3.0, 0.0))


class TestFig2b:
    def test_shapes_and_metadata(self):
        stack, truth = make_fig2b_stimulus(shape=(24, 48), n_frames=7,
                                           trend_direction=(0.0, 2.0),
                                           source_center=(10, 30))
        assert stack.shape == (7, 24, 48)
        assert truth["trend_direction"] == (0.0, 1.0)  # normalized
        assert truth["source_center"] == (10, 30)

    def test_first_frame_flat(self):
        stack, _ = make_fig2b_stimulus(baseline=2.0)
        assert np.allclose(stack[0], 2.0)

    def test_high_edge_opposes_travel(self):
        # wave travels downward (increasing rows): top edge leads
        stack, _ = make_fig2b_stimulus(shape=(32, 32), n_frames=5,
                                       trend_direction=(1.0, 0.0),
                                       source_rate=0.0)
        assert stack[-1][0].mean() > stack[-1][-1].mean()

    def test_source_grows_at_center(self):
        stack, _ = make_fig2b_stimulus(shape=(32, 32), n_frames=6,
                                       trend_rate=0.0, source_rate=0.5,
                                       source_center=(12, 20))
        diff = stack[-1] - stack[0]
        assert np.unravel_index(np.argmax(diff), diff.shape) == (12, 20)


class TestManufacturedField:
    def test_gradient_field_curl_free(self):
        mask = np.ones((40, 40), bool)
        f, _ = make_manufactured_field("gradient", mask)
        c = curl(f)
        d = divergence(f)
        # np.gradient fields: curl vanishes to truncation error, far
        # smaller than the divergence that carries the signal
        assert np.abs(c[2:-2, 2:-2]).max() < 0.05 * np.abs(d).max()

    def test_rotational_field_div_free(self):
        mask = np.ones((40, 40), bool)
        f, _ = make_manufactured_field("rotational", mask)
        d = divergence(f)
        c = curl(f)
        assert np.abs(d[2:-2, 2:-2]).max() < 0.05 * np.abs(c).max()

    def test_compact_support(self):
        mask = np.ones((30, 30), bool)
        f, pot = make_manufactured_field("gradient", mask)
        border = np.ones((30, 30), bool)
        border[3:-3, 3:-3] = False
        assert np.allclose(pot[border], 0.0)
        assert np.allclose(f.u[border], 0.0)

    def test_support_violation(self):
        mask = np.ones((20, 20), bool)
        with pytest.raises(SupportViolation):
            make_manufactured_field("gradient", mask, radius=15.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_manufactured_field("solenoidal", np.ones((10, 10), bool))

    def test_scale_linear(self):
        mask = np.ones((30, 30), bool)
        f1, _ = make_manufactured_field("gradient", mask, scale=1.0)
        f2, _ = make_manufactured_field("gradient", mask, scale=3.0)
        assert np.allclose(f2.u, 3.0 * f1.u)
        assert np.allclose(f2.v, 3.0 * f1.v)


class TestMakeRecording:
    def test_empty_schedule_constant(self):
        rec, truth = make_recording(shape=(8, 16), duration_s=1.0, schedule=[])
        assert np.allclose(rec.frames, 100.0)
        assert truth["events"] == []

    def test_event_frames_match_truth(self):
        rec, truth = make_recording(
            shape=(16, 32), fs=100.0, duration_s=10.0,
            schedule=[EventSpec(2.0, 1.0, 0.2), EventSpec(6.0, 0.5, 0.1)],
        )
        assert truth["events"][0]["onset_frame"] == 200
        assert truth["events"][0]["offset_frame"] == 300
        assert truth["events"][1]["onset_frame"] == 600
        # frames outside every event equal the baseline exactly
        assert np.allclose(rec.frames[:200], 100.0)
        assert np.allclose(rec.frames[310:590], 100.0)

    def test_peak_amplitude_exact(self):
        rec, truth = make_recording(
            shape=(16, 32), fs=100.0, duration_s=6.0,
            schedule=[EventSpec(2.0, 1.0, 0.25)],
        )
        dff = compute_dff(rec)
        trace = spatial_mean(dff, rec.mask)
        assert trace.max() == pytest.approx(0.25, abs=1e-9)

    def test_overlap_raises(self):
        with pytest.raises(ScheduleOverlap):
            make_recording(duration_s=5.0,
                           schedule=[EventSpec(1.0, 1.0, 0.1),
                                     EventSpec(1.5, 1.0, 0.1)])

    def test_heartbeat_present(self):
        from slowwave.signal import peak_frequency

        rec, truth = make_recording(shape=(8, 8), fs=100.0, duration_s=10.0,
                                    schedule=[], heartbeat_amplitude=0.05)
        assert truth["heartbeat_hz"] == 15.0
        trace = spatial_mean(rec.frames, rec.mask)
        assert peak_frequency(trace - trace.mean(), 100.0) == pytest.approx(15.0, abs=0.2)

    def test_seed_determinism(self):
        kw = dict(shape=(8, 8), duration_s=2.0, schedule=[], noise_sigma=0.01)
        r1, _ = make_recording(seed=3, **kw)
        r2, _ = make_recording(seed=3, **kw)
        r3, _ = make_recording(seed=4, **kw)
        assert np.array_equal(r1.frames, r2.frames)
        assert not np.array_equal(r1.frames, r3.frames)

    def test_masks_partition_image(self):
        rec, _ = make_recording(shape=(10, 20), duration_s=1.0, schedule=[])
        assert not np.any(rec.mask_left & rec.mask_right)
        assert np.all(rec.mask_left | rec.mask_right)

    def test_truth_json_roundtrip(self):
        import json

        _, truth = make_recording(shape=(8, 16), duration_s=4.0,
                                  schedule=[EventSpec(1.0, 0.5, 0.1)])
        again = json.loads(json.dumps(truth))
        assert again == truth
