"""Extraction layer math against loop-based oracles, plus the host model."""

import math

import numpy as np
import pytest

from textsql.gate import (
    GateConfig,
    GateModel,
    GateParams,
    ParamsFormatError,
    copy_distribution,
    cross_attention,
    epsilon_sweep,
    extraction_gate,
    generation_head,
    grad_check,
    load_params,
    merge,
    random_check_instance,
    run_gate,
    save_params,
)
from textsql.gate.autodiff import Tensor


def rand_params(d, vocab, seed):
    rng = np.random.default_rng(seed)
    return GateParams(
        w_q=rng.standard_normal((d, d)),
        w_kv=rng.standard_normal((d, d)),
        ff_w=rng.standard_normal((d, d)),
        ff_b=rng.standard_normal(d),
        ln_dec_gain=rng.standard_normal(d) * 0.1 + 1.0,
        ln_dec_bias=rng.standard_normal(d) * 0.1,
        ln_ctx_gain=rng.standard_normal(d) * 0.1 + 1.0,
        ln_ctx_bias=rng.standard_normal(d) * 0.1,
        gate_w=rng.standard_normal((2 * d, 1)),
        gate_b=rng.standard_normal(1),
        out_w=rng.standard_normal((d, vocab)),
        out_b=rng.standard_normal(vocab),
    )


# --- loop-based recomputation, no linear-algebra shortcuts -------------------


def _dot(u, v):
    return sum(x * y for x, y in zip(u, v))


def _matmul(m, w):
    cols = list(zip(*w))
    return [[_dot(row, c) for c in cols] for row in m]


def _softmax_row(row):
    top = max(row)
    e = [math.exp(x - top) for x in row]
    s = sum(e)
    return [x / s for x in e]


def _ln_row(row, gain, bias, eps=1e-6):
    mu = sum(row) / len(row)
    var = sum((x - mu) ** 2 for x in row) / len(row)
    scale = (var + eps) ** -0.5
    return [(x - mu) * scale * g + b for x, g, b in zip(row, gain, bias)]


def naive_gate(h_enc, h_dec, src_ids, p: GateParams, vocab):
    g = {n: getattr(p, n).data.tolist() for n in (
        "w_q", "w_kv", "ff_w", "ff_b", "ln_dec_gain", "ln_dec_bias",
        "ln_ctx_gain", "ln_ctx_bias", "gate_w", "gate_b", "out_w", "out_b",
    )}
    q = _matmul(h_dec.tolist(), g["w_q"])
    kv = _matmul(h_enc.tolist(), g["w_kv"])
    score = [[_dot(qt, ks) for ks in kv] for qt in q]
    attn = [_softmax_row(r) for r in score]
    read = _matmul(attn, kv)
    context = [
        [max(0.0, x + b) for x, b in zip(row, g["ff_b"])] for row in _matmul(read, g["ff_w"])
    ]
    p_ext = []
    for dec_row, ctx_row in zip(h_dec.tolist(), context):
        joined = _ln_row(dec_row, g["ln_dec_gain"], g["ln_dec_bias"]) + _ln_row(
            ctx_row, g["ln_ctx_gain"], g["ln_ctx_bias"]
        )
        z = _dot(joined, [w[0] for w in g["gate_w"]]) + g["gate_b"][0]
        p_ext.append(1.0 / (1.0 + math.exp(-z)))
    o_gen = [
        _softmax_row([x + b for x, b in zip(row, g["out_b"])])
        for row in _matmul(h_dec.tolist(), g["out_w"])
    ]
    o_ext = [[0.0] * vocab for _ in attn]
    for t, row in enumerate(attn):
        for s, w in enumerate(row):
            o_ext[t][int(src_ids[s])] += w
    o_final = [
        [(1 - pt) * gv + pt * ev for gv, ev in zip(gen_row, ext_row)]
        for pt, gen_row, ext_row in zip(p_ext, o_gen, o_ext)
    ]
    return score, attn, context, p_ext, o_gen, o_ext, o_final


class TestLayerOracle:
    def test_full_pass_matches_loop_recomputation(self):
        d, vocab = 4, 9
        rng = np.random.default_rng(42)
        h_enc = rng.standard_normal((3, d))
        h_dec = rng.standard_normal((2, d))
        src_ids = rng.integers(0, vocab, size=3)
        params = rand_params(d, vocab, 1)
        _, snap = run_gate(h_enc, h_dec, src_ids, params)
        score, attn, context, p_ext, o_gen, o_ext, o_final = naive_gate(
            h_enc, h_dec, src_ids, params, vocab
        )
        np.testing.assert_allclose(snap.score, score, atol=1e-10)
        np.testing.assert_allclose(snap.attn, attn, atol=1e-12)
        np.testing.assert_allclose(snap.context, context, atol=1e-10)
        np.testing.assert_allclose(snap.p_ext[:, 0], p_ext, atol=1e-12)
        np.testing.assert_allclose(snap.o_gen, o_gen, atol=1e-12)
        np.testing.assert_allclose(snap.o_ext, o_ext, atol=1e-12)
        np.testing.assert_allclose(snap.o_final, o_final, atol=1e-12)

    def test_scores_are_unscaled_dot_products(self):
        # No 1/sqrt(d) factor on the extraction read.
        d = 6
        params = rand_params(d, 5, 2)
        h_enc = np.eye(d)[:2]
        h_dec = np.eye(d)[:1]
        score, _, _ = cross_attention(h_enc, h_dec, params)
        q = h_dec @ params.w_q.data
        k = h_enc @ params.w_kv.data
        np.testing.assert_allclose(score.data, q @ k.T, atol=1e-12)


class TestDistributionInvariants:
    def _snapshot(self, seed, gated=True):
        rng = np.random.default_rng(seed)
        d, vocab, S, T = 8, 12, 5, 4
        params = rand_params(d, vocab, seed)
        h_enc = rng.standard_normal((S, d)) * 2
        h_dec = rng.standard_normal((T, d)) * 2
        src_ids = rng.integers(0, vocab, size=S)
        _, snap = run_gate(h_enc, h_dec, src_ids, params, p_ext_scale=1.0 if gated else 0.0)
        return snap

    def test_attention_rows_sum_to_one(self):
        for seed in range(10):
            snap = self._snapshot(seed)
            np.testing.assert_allclose(snap.attn.sum(axis=-1), 1.0, atol=1e-6)

    def test_all_output_rows_are_distributions(self):
        for seed in range(10):
            snap = self._snapshot(seed)
            for dist in (snap.o_gen, snap.o_ext, snap.o_final):
                assert np.all(dist >= 0)
                np.testing.assert_allclose(dist.sum(axis=-1), 1.0, atol=1e-6)

    def test_gate_strictly_interior(self):
        for seed in range(10):
            snap = self._snapshot(seed)
            assert np.all(snap.p_ext > 0.0)
            assert np.all(snap.p_ext < 1.0)

    def test_ablation_reduces_to_generation_head(self):
        snap = self._snapshot(3, gated=False)
        np.testing.assert_array_equal(snap.o_final, snap.o_gen)
        np.testing.assert_array_equal(snap.p_ext, np.zeros_like(snap.p_ext))


class TestMergeLimits:
    def test_exact_at_gate_zero_and_one(self):
        rng = np.random.default_rng(0)
        o_gen = rng.dirichlet(np.ones(6), size=3)
        o_ext = rng.dirichlet(np.ones(6), size=3)
        zero = merge(o_gen, o_ext, np.zeros((3, 1)))
        one = merge(o_gen, o_ext, np.ones((3, 1)))
        assert np.array_equal(zero.data, o_gen)
        assert np.array_equal(one.data, o_ext)

    def test_interior_gate_is_convex_blend(self):
        o_gen = np.array([[1.0, 0.0]])
        o_ext = np.array([[0.0, 1.0]])
        out = merge(o_gen, o_ext, np.array([[0.25]]))
        np.testing.assert_allclose(out.data, [[0.75, 0.25]])


class TestShapeValidation:
    def test_params_must_be_square(self):
        good = rand_params(4, 6, 0)
        with pytest.raises(ValueError, match="square"):
            GateParams(
                w_q=np.zeros((4, 3)),
                w_kv=good.w_kv,
                ff_w=good.ff_w,
                ff_b=good.ff_b,
                ln_dec_gain=good.ln_dec_gain,
                ln_dec_bias=good.ln_dec_bias,
                ln_ctx_gain=good.ln_ctx_gain,
                ln_ctx_bias=good.ln_ctx_bias,
                gate_w=good.gate_w,
                gate_b=good.gate_b,
                out_w=good.out_w,
                out_b=good.out_b,
            )

    def test_states_must_match_width(self):
        params = rand_params(4, 6, 0)
        with pytest.raises(ValueError, match="shape"):
            cross_attention(np.zeros((3, 5)), np.zeros((2, 4)), params)

    def test_gate_requires_aligned_positions(self):
        params = rand_params(4, 6, 0)
        with pytest.raises(ValueError, match="align"):
            extraction_gate(np.zeros((2, 4)), np.zeros((3, 4)), params)

    def test_copy_rejects_out_of_range_ids(self):
        attn = np.full((1, 2), 0.5)
        with pytest.raises(ValueError, match="range"):
            copy_distribution(attn, np.array([0, 7]), vocab_size=5)

    def test_copy_rejects_mismatched_ids(self):
        attn = np.full((1, 2), 0.5)
        with pytest.raises(ValueError, match="shape"):
            copy_distribution(attn, np.array([0, 1, 2]), vocab_size=5)

    def test_merge_rejects_bad_gate_shape(self):
        o = np.full((2, 3), 1 / 3)
        with pytest.raises(ValueError, match="p_ext"):
            merge(o, o, np.zeros((2,)))


class TestGateModel:
    CFG = GateConfig(vocab_size=11, d_model=8, max_src_len=6, max_tgt_len=5, seed=0)

    def test_construction_is_seed_deterministic(self):
        a = GateModel(self.CFG)
        b = GateModel(self.CFG)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
        c = GateModel(GateConfig(vocab_size=11, d_model=8, max_src_len=6, max_tgt_len=5, seed=1))
        assert any(not np.array_equal(a.params[n].data, c.params[n].data) for n in a.params)

    def test_forward_loss_matches_activations(self):
        model = GateModel(self.CFG)
        src = np.array([1, 2, 3, 4])
        tgt = np.array([5, 6, 7])
        fp = model.forward(src, tgt)
        expected = [-math.log(fp.activations.o_final[t, tgt[t]] + 1e-12) for t in range(3)]
        np.testing.assert_allclose(fp.per_position_loss, expected, atol=1e-12)
        assert fp.loss == pytest.approx(sum(expected) / 3)
        assert fp.loss > 0

    def test_id_bounds_enforced(self):
        model = GateModel(self.CFG)
        with pytest.raises(ValueError):
            model.forward(np.array([1, 99]), np.array([1]))
        with pytest.raises(ValueError):
            model.forward(np.array([1] * 7), np.array([1]))

    def test_sgd_reduces_loss_on_fixed_example(self):
        model = GateModel(self.CFG)
        src = np.array([1, 2, 3])
        tgt = np.array([4, 5])
        first, grads = model.loss_and_grads(src, tgt)
        for _ in range(20):
            _, grads = model.loss_and_grads(src, tgt)
            model.sgd_step(grads, lr=0.3)
        assert model.forward(src, tgt).loss < first * 0.5

    def test_greedy_decode_shapes(self):
        model = GateModel(self.CFG)
        out = model.decode_greedy(np.array([1, 2]), n_steps=4)
        assert len(out) == 4
        assert all(isinstance(t, int) and 0 <= t < 11 for t in out)
        with pytest.raises(ValueError):
            model.decode_greedy(np.array([1]), n_steps=6)

    def test_gate_param_names_prefixed_and_sorted(self):
        model = GateModel(self.CFG)
        names = model.gate_param_names()
        assert names == sorted(names)
        assert all(n.startswith("gate.") for n in names)
        assert len(names) == 12

    def test_ungated_model_ignores_copying(self):
        model = GateModel(self.CFG, gated=False)
        fp = model.forward(np.array([1, 2]), np.array([3]))
        np.testing.assert_array_equal(fp.activations.o_final, fp.activations.o_gen)


class TestGradCheck:
    def test_analytic_matches_numeric(self):
        for seed in (0, 1):
            model, src, tgt = random_check_instance(seed)
            result = grad_check(model, src, tgt)
            assert result.max_rel_error <= 1e-4, (seed, result.worst_param)
            assert result.worst_param in result.per_param

    def test_param_subset(self):
        model, src, tgt = random_check_instance(2)
        result = grad_check(model, src, tgt, param_names=["gate.gate_w", "gate.gate_b"])
        assert set(result.per_param) == {"gate.gate_w", "gate.gate_b"}

    def test_unknown_param_rejected(self):
        model, src, tgt = random_check_instance(0)
        with pytest.raises(ValueError, match="unknown"):
            grad_check(model, src, tgt, param_names=["nope"])

    def test_epsilon_must_be_positive(self):
        model, src, tgt = random_check_instance(0)
        with pytest.raises(ValueError):
            grad_check(model, src, tgt, epsilon=0.0)

    def test_sweep_preserves_order(self):
        model, src, tgt = random_check_instance(0)
        eps = [1e-4, 1e-5]
        out = epsilon_sweep(model, src, tgt, eps, param_names=["gate.gate_b"])
        assert [e for e, _ in out] == eps
        assert all(err >= 0 for _, err in out)


class TestPersistence:
    CFG = GateConfig(vocab_size=9, d_model=6, max_src_len=5, max_tgt_len=4, seed=3)

    def test_round_trip(self, tmp_path):
        model = GateModel(self.CFG)
        src = np.array([1, 2, 3])
        _, grads = model.loss_and_grads(src, np.array([4, 5]))
        model.sgd_step(grads, lr=0.1)
        blob = tmp_path / "model.bin"
        save_params(model, blob)
        loaded = load_params(blob)
        assert loaded.cfg == model.cfg
        assert loaded.gated == model.gated
        for name in model.params:
            np.testing.assert_array_equal(loaded.params[name].data, model.params[name].data)
        assert loaded.decode_greedy(src, 4) == model.decode_greedy(src, 4)

    def test_sidecar_records_layout(self, tmp_path):
        import json

        model = GateModel(self.CFG)
        blob = tmp_path / "model.bin"
        save_params(model, blob)
        meta = json.loads((blob.parent / (blob.name + ".json")).read_text())
        assert meta["version"] == 1
        assert meta["dtype"] == "float64"
        assert {p["name"] for p in meta["params"]} == set(model.params)

    def test_truncated_blob_rejected(self, tmp_path):
        model = GateModel(self.CFG)
        blob = tmp_path / "model.bin"
        save_params(model, blob)
        blob.write_bytes(blob.read_bytes()[:-8])
        with pytest.raises(ParamsFormatError):
            load_params(blob)

    def test_tampered_metadata_rejected(self, tmp_path):
        import json

        model = GateModel(self.CFG)
        blob = tmp_path / "model.bin"
        save_params(model, blob)
        sidecar = blob.parent / (blob.name + ".json")
        meta = json.loads(sidecar.read_text())
        meta["version"] = 99
        sidecar.write_text(json.dumps(meta))
        with pytest.raises(ParamsFormatError, match="version"):
            load_params(blob)

    def test_missing_sidecar_rejected(self, tmp_path):
        model = GateModel(self.CFG)
        blob = tmp_path / "model.bin"
        save_params(model, blob)
        (blob.parent / (blob.name + ".json")).unlink()
        with pytest.raises(ParamsFormatError):
            load_params(blob)
