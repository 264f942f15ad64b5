import numpy as np
import pytest

from lossyckpt import checkpoint as ck
from lossyckpt import compressor as cp
from lossyckpt import fields, solvers
from lossyckpt.errors import UnrecoverableImageError

REL4 = cp.CompressorConfig.value_range_relative(1e-4)


def run_steps(problem, method="cg", steps=20, restart_len=10):
    a, m, b = problem
    cfg = solvers.SolveConfig(restart_len=restart_len, max_iterations=100_000)
    state = solvers.init(method, a, m, b, cfg)
    for _ in range(steps):
        if state.converged:
            break
        state.step()
    return state, cfg


class TestTraditional:
    def test_round_trip_bitwise(self, poisson16):
        a, m, b = poisson16
        state, cfg = run_steps(poisson16)
        target = ck.StorageTarget()
        image, _ = ck.checkpoint_traditional(state, target)
        recovered, _ = ck.recover(image, "cg", a, m, b, cfg)
        assert np.array_equal(recovered.x, state.x)
        assert recovered.iteration == state.iteration

    def test_size_is_raw_doubles_plus_header(self, poisson16):
        state, _ = run_steps(poisson16)
        image, cost = ck.checkpoint_traditional(state, ck.StorageTarget())
        header = 8 + 4 + 8 + 1 + 8 + 8  # magic, version, iteration, kind, length, checksum
        assert cost.payload_bytes == 8 * 256 + header
        assert cost.t_compress == 0.0

    def test_million_element_write_time(self):
        class Snapshot:
            x = np.zeros(1_000_000)
            iteration = 0

        target = ck.StorageTarget(write_bandwidth=66_667.0)
        _, cost = ck.checkpoint_traditional(Snapshot(), target)
        assert cost.t_write == pytest.approx(120.0, rel=1e-3)


class TestLossy:
    def test_recovered_vector_within_bound(self, poisson16):
        a, m, b = poisson16
        state, cfg = run_steps(poisson16)
        image, _ = ck.checkpoint_lossy(state, REL4, ck.StorageTarget())
        recovered, _ = ck.recover(image, "cg", a, m, b, cfg)
        eb = cp.CompressedBlock.from_bytes(image.payload).eb_abs
        assert np.max(np.abs(recovered.x - state.x)) <= eb

    def test_recover_then_converge_reports_delay(self, poisson16):
        a, m, b = poisson16
        baseline = solvers.solve_to_convergence(
            solvers.init("cg", a, m, b, solvers.SolveConfig(restart_len=10)))
        state, cfg = run_steps(poisson16, steps=20)
        image, _ = ck.checkpoint_lossy(state, REL4, ck.StorageTarget())
        recovered, _ = ck.recover(image, "cg", a, m, b, cfg)
        solvers.solve_to_convergence(recovered)
        assert recovered.converged
        n_prime = recovered.iteration - baseline.iteration
        assert abs(n_prime) < baseline.iteration  # finite, recorded

    def test_constant_vector_compresses_below_one_percent(self):
        class Snapshot:
            x = np.full(1_000_000, 2.5)
            iteration = 3

        _, cost = ck.checkpoint_lossy(Snapshot(), REL4, ck.StorageTarget())
        assert cost.payload_bytes < 0.01 * 8 * 1_000_000

    def test_smooth_iterate_ratio_above_four(self):
        class Snapshot:
            x = fields.solver_iterate(m=32, method="cg", at_iteration=50)
            iteration = 50

        raw_bytes = 8 * len(Snapshot.x)
        _, cost = ck.checkpoint_lossy(Snapshot(), REL4, ck.StorageTarget())
        assert raw_bytes / cost.payload_bytes > 4.0

    def test_checkpoint_time_calibration_scenario(self):
        # raw write pinned to 120 time units; lossy write plus injected
        # compression time lands at 25: the 120 -> 25 calibration scenario
        class Snapshot:
            x = fields.sine_mixture(100_000, n_modes=3, seed=1)
            iteration = 0

        raw_image, raw_cost = ck.checkpoint_traditional(Snapshot(), ck.StorageTarget())
        bandwidth = raw_cost.payload_bytes / 120.0
        target = ck.StorageTarget(write_bandwidth=bandwidth)
        _, raw_cost = ck.checkpoint_traditional(Snapshot(), target)
        assert raw_cost.total == pytest.approx(120.0)
        _, lossy_cost = ck.checkpoint_lossy(Snapshot(), REL4, target,
                                            t_comp_override=0.0)
        assert lossy_cost.t_write < 120.0 / 4
        t_comp = 25.0 - lossy_cost.t_write
        _, calibrated = ck.checkpoint_lossy(Snapshot(), REL4, target,
                                            t_comp_override=t_comp)
        assert calibrated.total == pytest.approx(25.0)

    def test_payload_monotone_in_error_bound(self, poisson16):
        state, _ = run_steps(poisson16, steps=30)
        sizes = []
        for eb_rel in (1e-8, 1e-6, 1e-4, 1e-2):
            config = cp.CompressorConfig.value_range_relative(eb_rel)
            _, cost = ck.checkpoint_lossy(state, config, ck.StorageTarget())
            sizes.append(cost.payload_bytes)
        assert all(b >= a for a, b in zip(sizes[1:], sizes))  # non-increasing


class TestImages:
    def test_serialization_round_trip(self, poisson16):
        state, _ = run_steps(poisson16)
        image, _ = ck.checkpoint_lossy(state, REL4, ck.StorageTarget())
        again = ck.CheckpointImage.from_bytes(image.to_bytes())
        assert again.iteration == image.iteration
        assert again.payload == image.payload
        assert again.checksum == image.checksum

    def test_checksum_corruption_detected(self, poisson16):
        state, _ = run_steps(poisson16)
        image, _ = ck.checkpoint_traditional(state, ck.StorageTarget())
        blob = bytearray(image.to_bytes())
        blob[-5] ^= 0x40
        with pytest.raises(UnrecoverableImageError):
            ck.CheckpointImage.from_bytes(bytes(blob))

    def test_file_backed_commit_and_reload(self, tmp_path, poisson16):
        a, m, b = poisson16
        state, cfg = run_steps(poisson16)
        target = ck.StorageTarget(path=tmp_path / "ckpt.img")
        image, _ = ck.checkpoint_traditional(state, target)
        loaded = target.load_last()
        assert loaded.payload == image.payload
        recovered, _ = ck.recover(loaded, "cg", a, m, b, cfg)
        assert np.array_equal(recovered.x, state.x)

    def test_stale_tmp_file_does_not_clobber(self, tmp_path, poisson16):
        state, _ = run_steps(poisson16)
        target = ck.StorageTarget(path=tmp_path / "ckpt.img")
        image, _ = ck.checkpoint_traditional(state, target)
        (tmp_path / "ckpt.img.tmp").write_bytes(b"torn write garbage")
        loaded = target.load_last()
        assert loaded.checksum == image.checksum

    def test_unwritable_target_raises_checkpoint_failed(self, tmp_path, poisson16):
        from lossyckpt.errors import CheckpointFailedError

        state, _ = run_steps(poisson16)
        target = ck.StorageTarget(path=tmp_path / "no_such_dir" / "ckpt.img")
        with pytest.raises(CheckpointFailedError):
            ck.checkpoint_traditional(state, target)

    def test_created_at_carried_into_image(self, poisson16):
        state, _ = run_steps(poisson16)
        image, _ = ck.checkpoint_traditional(state, ck.StorageTarget(), created_at=123.5)
        assert image.created_at == 123.5

    def test_last_good_semantics_in_memory(self, poisson16):
        state, _ = run_steps(poisson16, steps=10)
        target = ck.StorageTarget()
        first, _ = ck.checkpoint_traditional(state, target)
        state.step()
        second, _ = ck.checkpoint_traditional(state, target)
        assert target.load_last().iteration == second.iteration

    def test_recovery_cost_includes_read_and_decompression(self, poisson16):
        a, m, b = poisson16
        state, cfg = run_steps(poisson16)
        target = ck.StorageTarget(read_bandwidth=1000.0)
        image, _ = ck.checkpoint_lossy(state, REL4, target)
        _, cost = ck.recover(image, "cg", a, m, b, cfg, target=target,
                             t_decomp_override=0.75)
        assert cost.t_read == image.nbytes / 1000.0
        assert cost.t_decompress == 0.75
        assert cost.total == cost.t_read + 0.75
