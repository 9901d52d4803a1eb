import numpy as np
import pytest

from geoblock.attention import AttentionTensor, FusionConfig, WindowSpec
from geoblock.decode import (
    DecodeConfig,
    DecoderState,
    DenoiserOutput,
    decode_block,
    decode_sequence,
    infer_block,
    unmask_step,
)
from geoblock.errors import ArgumentError, ConfigError, StateError, WindowRangeError
from geoblock.scoring import ScoreParams
from geoblock.synth import PlantedStructureSpec, SimDenoiser, SyntheticWorld, simulate_world

from oracles import naive_fuse, naive_profile_masses, naive_scores, naive_select, replay_block


def _state(prompt_len=2, total=10):
    return DecoderState.initial(np.arange(prompt_len), total)


def _output(conf, base=0):
    conf = np.asarray(conf, dtype=np.float64)
    return DenoiserOutput(confidence=conf, tokens=np.arange(base, base + conf.shape[0]) + 500)


class TestUnmaskStep:
    def test_threshold_rule(self):
        st = _state(0, 3)
        st.active_end = 3
        committed = unmask_step(st, _output([0.97, 0.40, 0.92]), 0.9)
        assert committed == (0, 2)
        assert st.nfe == 1
        assert not st.mask_flags[0] and st.mask_flags[1] and not st.mask_flags[2]

    def test_argmax_fallback(self):
        st = _state(0, 3)
        st.active_end = 3
        assert unmask_step(st, _output([0.10, 0.20, 0.15]), 0.9) == (1,)

    def test_fallback_tie_takes_lowest_index(self):
        st = _state(0, 3)
        st.active_end = 3
        assert unmask_step(st, _output([0.2, 0.2, 0.2]), 0.9) == (0,)

    def test_sequential_limit(self):
        st = _state(0, 4)
        st.active_end = 4
        conf = [0.99, 0.98, 0.97, 0.96]
        steps = 0
        while st.mask_flags.any():
            committed = unmask_step(st, _output(conf), 1.0)
            assert len(committed) == 1
            steps += 1
        assert steps == 4

    def test_fully_parallel_limit_tau_zero(self):
        # spec example at the op level: tau=0 commits everything positive in one step
        st = _state(0, 8)
        st.active_end = 8
        committed = unmask_step(st, _output([0.5] * 8), 0.0)
        assert len(committed) == 8

    def test_no_masked_positions_is_state_error(self):
        st = _state(0, 3)
        st.active_end = 3
        unmask_step(st, _output([1.0, 1.0, 1.0]), 0.5)
        with pytest.raises(StateError):
            unmask_step(st, _output([1.0, 1.0, 1.0]), 0.5)

    def test_no_active_block_is_state_error(self):
        with pytest.raises(StateError):
            unmask_step(_state(), _output([1.0]), 0.5)

    def test_commits_only_masked(self):
        st = _state(0, 3)
        st.active_end = 3
        unmask_step(st, _output([0.95, 0.0, 0.0]), 0.9)
        committed = unmask_step(st, _output([0.99, 0.99, 0.99]), 0.9)
        assert committed == (1, 2)


class _ScriptedDenoiser:
    """Confidence matrix indexed by refinement step; no attention."""

    def __init__(self, conf_by_step):
        self.conf_by_step = conf_by_step

    def evaluate(self, state, start, end, step, attention_window=None):
        row = self.conf_by_step[min(step, len(self.conf_by_step) - 1)]
        return _output(row[: end - start])

    def attention_for(self, state, window):
        raise NotImplementedError


class TestDecodeBlock:
    def test_single_token_block_single_step(self):
        st = _state(0, 4)
        cfg = DecodeConfig(threshold=0.9, max_len=4)
        steps = decode_block(st, _ScriptedDenoiser([[0.5]]), 1, cfg)
        assert steps == 1
        assert st.frontier == 1
        assert st.blocks == [(0, 1)]

    def test_tau_low_finishes_fast(self):
        st = _state(0, 8)
        cfg = DecodeConfig(threshold=0.01, max_len=8)
        steps = decode_block(st, _ScriptedDenoiser([[0.5] * 8]), 8, cfg)
        assert steps == 1

    def test_scripted_replay_oracle(self):
        conf_by_step = [
            [0.50, 0.30, 0.70, 0.20, 0.10, 0.40, 0.60, 0.15],
            [0.95, 0.40, 0.92, 0.30, 0.20, 0.50, 0.91, 0.25],
            [0.99, 0.93, 0.99, 0.50, 0.40, 0.96, 0.99, 0.35],
            [0.99, 0.99, 0.99, 0.94, 0.92, 0.99, 0.99, 0.91],
        ]
        want_steps, want_order = replay_block(conf_by_step, 0.9)
        st = _state(0, 8)
        cfg = DecodeConfig(threshold=0.9, max_len=8)
        trace = []
        steps = decode_block(st, _ScriptedDenoiser(conf_by_step), 8, cfg, trace)
        assert steps == want_steps
        got_order = [ev.positions for ev in trace if ev.kind == "commit"]
        assert [tuple(p) for p in got_order] == [tuple(o) for o in want_order]

    def test_block_beyond_canvas(self):
        st = _state(0, 4)
        cfg = DecodeConfig(threshold=0.9, max_len=4)
        with pytest.raises(WindowRangeError):
            decode_block(st, _ScriptedDenoiser([[0.5] * 8]), 8, cfg)


class TestDecodeConfig:
    def test_threshold_domain(self):
        with pytest.raises(ConfigError):
            DecodeConfig(threshold=0.0, max_len=4)
        with pytest.raises(ConfigError):
            DecodeConfig(threshold=1.01, max_len=4)

    def test_fixed_requires_block(self):
        with pytest.raises(ConfigError):
            DecodeConfig(scheduler="fixed", max_len=4)

    def test_unknown_scheduler(self):
        with pytest.raises(ConfigError):
            DecodeConfig(scheduler="magic", max_len=4)

    def test_unknown_probe_mode(self):
        with pytest.raises(ConfigError):
            DecodeConfig(probe_mode="psychic", max_len=4)


class TestDenoiserOutput:
    def test_confidence_domain(self):
        with pytest.raises(ArgumentError):
            DenoiserOutput(confidence=np.array([1.2]), tokens=np.array([1]))
        with pytest.raises(ArgumentError):
            DenoiserOutput(confidence=np.array([np.nan]), tokens=np.array([1]))


class TestInferBlock:
    def _clique_tensor(self, n=8, clique=5, strong=0.95):
        """Dense clique on the first `clique` tokens, weak uniform tail rows."""
        w = np.zeros((1, 1, n, n))
        w[0, 0, :clique, :clique] = strong / clique
        w[0, 0, :clique, clique:] = (1 - strong) / (n - clique)
        w[0, 0, clique:, :] = 1.0 / n
        return AttentionTensor(w)

    def test_block_diagonal_clique_pipeline(self):
        t = self._clique_tensor()
        window = WindowSpec(0, 8)
        cfg = DecodeConfig(
            score_params=ScoreParams(alpha=0.5, min_block=2, delta=0.1, max_block=16),
            fusion=FusionConfig((0,), (1.0,)),
            max_len=8,
        )
        decision = infer_block(t, window, cfg)
        assert decision.block_len == 5
        # independent full-pipeline oracle
        fused = naive_fuse(t.weights, (0,), (1.0,), 1)
        splits = list(range(2, 8))
        cc, ch, cf = naive_profile_masses(fused, 0, 2, splits)
        scores, degenerate = naive_scores(cc, ch, cf, 0.5)
        want_x, _ = naive_select(splits, scores, degenerate, 0.1, 2)
        assert decision.block_len == want_x

    def test_uniform_rows_terminal(self):
        w = np.full((1, 1, 8, 8), 1.0 / 8)
        cfg = DecodeConfig(
            score_params=ScoreParams(alpha=0.5, min_block=4, delta=0.1, max_block=16),
            fusion=FusionConfig((0,), (1.0,)),
            max_len=8,
        )
        decision = infer_block(AttentionTensor(w), WindowSpec(0, 8), cfg, closed_end=True)
        assert decision.block_len == 8  # min(B_max, window)

    def test_window_equal_min_block_forced(self):
        t = self._clique_tensor()
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=4, max_block=4),
            fusion=FusionConfig((0,), (1.0,)),
            max_len=8,
        )
        decision = infer_block(t, WindowSpec(0, 4), cfg)
        assert decision.block_len == 4

    def test_roi_aligned_shape_mismatch(self):
        t = self._clique_tensor()
        cfg = DecodeConfig(max_len=8, fusion=FusionConfig((0,), (1.0,)))
        with pytest.raises(WindowRangeError):
            infer_block(t, WindowSpec(0, 4), cfg, roi_aligned=True)

    def test_roi_aligned_equals_crop_route(self):
        t = self._clique_tensor(n=12, clique=6)
        window = WindowSpec(2, 10)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=2, delta=0.1, max_block=16),
            fusion=FusionConfig((0,), (1.0,)),
            max_len=12,
        )
        from geoblock.attention import extract_roi

        roi = extract_roi(t, window)
        a = infer_block(t, window, cfg)
        b = infer_block(roi, window, cfg, roi_aligned=True)
        assert a == b


class _CheckingDenoiser(SimDenoiser):
    """SimDenoiser that asserts state invariants on every evaluation."""

    def evaluate(self, state, start, end, step, attention_window=None):
        state.check()
        return super().evaluate(state, start, end, step, attention_window)


def _world(segments, seed=0, **kw):
    spec = PlantedStructureSpec(segment_lengths=segments, seed=seed, **kw)
    return SyntheticWorld(spec, prompt_len=4)


class TestDecodeSequence:
    def test_fixed_sequential_arithmetic(self):
        world = _world((16,) * 16)
        cfg = DecodeConfig(
            scheduler="fixed", fixed_block=16, threshold=1.0, max_len=world.total_len
        )
        report = simulate_world(world, cfg)
        assert report.total_nfe == 256
        assert report.probe_nfe == 0
        assert report.block_lengths == (16,) * 16
        assert report.extra_nfe_ratio == 0.0

    def test_blocks_tile_generated_region(self):
        world = _world((7, 9, 6, 8), noise=0.1, p_in=0.8, p_out=0.05, seed=3)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=4, delta=0.1, max_block=13),
            max_len=world.total_len,
        )
        report = decode_sequence(
            np.arange(4), _CheckingDenoiser(world), cfg, collect_trace=True
        )
        assert sum(report.block_lengths) == report.generated == world.total_len - 4

    def test_nfe_accounting_identity(self):
        world = _world((8, 8, 8, 8), noise=0.2, seed=5)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=4, delta=0.1, max_block=13),
            max_len=world.total_len,
        )
        report = simulate_world(world, cfg, collect_trace=True)
        commits = sum(1 for ev in report.trace if ev.kind == "commit")
        probes = sum(1 for ev in report.trace if ev.kind == "probe")
        assert report.total_nfe == commits + probes
        assert report.probe_nfe == probes == len(report.block_lengths)

    def test_determinism(self):
        world = _world((6, 9, 11, 7), noise=0.3, seed=11)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=4, delta=0.1, max_block=13),
            max_len=world.total_len,
        )
        a = simulate_world(world, cfg, collect_trace=True)
        b = simulate_world(world, cfg, collect_trace=True)
        assert a == b
        assert a.to_text() == b.to_text()

    def test_scheduler_equivalence_in_limit(self):
        world = _world((9,) * 6, noise=0.2, seed=2)
        geo = DecodeConfig(
            score_params=ScoreParams(min_block=8, delta=0.1, max_block=8),
            max_len=world.total_len,
        )
        fixed = DecodeConfig(
            scheduler="fixed", fixed_block=8, max_len=world.total_len
        )
        assert simulate_world(world, geo).block_lengths == simulate_world(world, fixed).block_lengths

    def test_oracle_scheduler_recovers_truth(self):
        world = _world((6, 9, 11, 7), noise=0.3, seed=4)
        cfg = DecodeConfig(
            scheduler="oracle",
            score_params=ScoreParams(min_block=4, max_block=16),
            max_len=world.total_len,
        )
        report = simulate_world(world, cfg, recovery_slack=0)
        assert report.block_lengths == (6, 9, 11, 7)
        assert report.boundary_recovery == 1.0

    def test_reuse_pass_single_bootstrap_probe(self):
        world = _world((8,) * 6, noise=0.2, seed=6)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=4, delta=0.1, max_block=13),
            probe_mode="reuse_pass",
            max_len=world.total_len,
        )
        report = simulate_world(world, cfg)
        assert report.probe_nfe == 1

    def test_probe_and_reuse_pick_same_blocks(self):
        # planted attention is state-independent, so modes agree on spans
        world = _world((7, 10, 6, 9), noise=0.15, seed=8)
        kw = dict(
            score_params=ScoreParams(min_block=4, delta=0.1, max_block=13),
            max_len=world.total_len,
        )
        a = simulate_world(world, DecodeConfig(probe_mode="dedicated_probe", **kw))
        b = simulate_world(world, DecodeConfig(probe_mode="reuse_pass", **kw))
        assert a.block_lengths == b.block_lengths
        assert b.total_nfe < a.total_nfe

    def test_terminator_stops_decoding(self):
        world = _world((8,) * 4, seed=9)

        class TerminatingDenoiser(SimDenoiser):
            def evaluate(self, state, start, end, step, attention_window=None):
                out = super().evaluate(state, start, end, step, attention_window)
                out.tokens = np.where(out.tokens >= 1020, 9999, out.tokens)
                return out

        cfg = DecodeConfig(
            scheduler="fixed",
            fixed_block=8,
            threshold=0.9,
            terminator=9999,
            max_len=world.total_len,
        )
        report = decode_sequence(np.arange(4), TerminatingDenoiser(world), cfg)
        assert report.generated < world.total_len - 4
        assert sum(report.block_lengths) == report.generated

    def test_sequential_collapse_min_block_one(self):
        # chain world + m=1: every decision collapses to a one-token block and
        # the decoder behaves exactly like a pure sequential scheduler
        spec = PlantedStructureSpec(
            segment_lengths=(1,) * 24, p_in=1.0, p_out=0.0, chain_mix=1.0, noise=0.1, seed=15
        )
        world = SyntheticWorld(spec, prompt_len=4)
        geo = DecodeConfig(
            score_params=ScoreParams(min_block=1, delta=0.1, max_block=8),
            threshold=0.9,
            max_len=1,
        )
        fixed = DecodeConfig(scheduler="fixed", fixed_block=1, threshold=0.9, max_len=1)
        rg, rf = simulate_world(world, geo), simulate_world(world, fixed)
        assert set(rg.block_lengths) == {1}
        assert rg.block_lengths == rf.block_lengths
        assert rg.total_nfe - rg.probe_nfe == rf.total_nfe

    def test_tail_clip_records_truncation(self):
        # m = B_max = 8 forces blocks of exactly 8; the 3-token tail must clip
        world = _world((8, 8, 3), seed=10)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=8, delta=0.1, max_block=8),
            max_len=world.total_len,
        )
        report = simulate_world(world, cfg)
        assert report.truncated
        assert report.block_lengths == (8, 8, 3)
        assert report.probe_nfe == 2  # the clipped tail performs no inference

    def test_max_len_must_exceed_prompt(self):
        cfg = DecodeConfig(max_len=4)
        with pytest.raises(ArgumentError):
            decode_sequence(np.arange(4), _ScriptedDenoiser([[0.5]]), cfg)

    def test_report_text_fields(self):
        world = _world((8, 8), seed=1)
        cfg = DecodeConfig(scheduler="fixed", fixed_block=8, threshold=1.0, max_len=world.total_len)
        text = simulate_world(world, cfg).to_text()
        for field in (
            "total_nfe:",
            "probe_nfe:",
            "extra_nfe_ratio:",
            "block_lengths:",
            "block_length_mean:",
            "block_length_std:",
            "boundary_recovery:",
            "truncated:",
        ):
            assert field in text

    def test_mean_std_recomputable(self):
        world = _world((6, 9, 11, 7), noise=0.3, seed=13)
        cfg = DecodeConfig(
            score_params=ScoreParams(min_block=4, delta=0.1, max_block=13),
            max_len=world.total_len,
        )
        r = simulate_world(world, cfg)
        lengths = np.asarray(r.block_lengths, dtype=np.float64)
        assert r.block_length_mean == pytest.approx(lengths.mean())
        assert r.block_length_std == pytest.approx(lengths.std())
