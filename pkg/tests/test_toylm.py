import math

import numpy as np
import pytest

import oracles
from vtrim import toylm
from vtrim.errors import VtError
from vtrim.subvocab import build_mapping, full_vocabulary
from vtrim.toylm import (
    DecodeResult,
    ModelConfig,
    ModelWeights,
    count_params,
    forward_logits,
    greedy_decode,
    init_random,
    load_model,
    project_rows,
    remap_output,
    save_model,
    trim_model,
)


def _tensors(model):
    ts = [model.embedding]
    for blk in model.blocks:
        ts += [blk.ln1_w, blk.ln1_b, blk.wq, blk.wk, blk.wv, blk.wo,
               blk.ln2_w, blk.ln2_b, blk.w1, blk.w2]
    ts += [model.lnf_w, model.lnf_b]
    if model.output is not None:
        ts.append(model.output)
    return ts


def test_config_rejects_indivisible_heads():
    with pytest.raises(VtError, match="divisible"):
        ModelConfig(vocab_size=10, hidden=8, layers=1, heads=3, max_context=4)


def test_config_dimension_bounds():
    with pytest.raises(VtError):
        ModelConfig(vocab_size=0, hidden=8, layers=1, heads=2, max_context=4)
    with pytest.raises(VtError):
        ModelConfig(vocab_size=10, hidden=8, layers=-1, heads=2, max_context=4)
    cfg = ModelConfig(vocab_size=10, hidden=8, layers=0, heads=2, max_context=4)
    assert cfg.layers == 0


def test_init_random_is_deterministic():
    cfg = ModelConfig(vocab_size=32, hidden=8, layers=2, heads=2, max_context=16)
    a = init_random(cfg, seed=7)
    b = init_random(cfg, seed=7)
    for ta, tb in zip(_tensors(a), _tensors(b)):
        assert ta.tobytes() == tb.tobytes()


def test_init_random_seeds_differ():
    cfg = ModelConfig(vocab_size=32, hidden=8, layers=1, heads=2, max_context=16)
    a = init_random(cfg, seed=1)
    b = init_random(cfg, seed=2)
    assert not np.array_equal(a.embedding, b.embedding)


def test_init_weights_are_float32():
    cfg = ModelConfig(vocab_size=8, hidden=4, layers=1, heads=1, max_context=4)
    for t in _tensors(init_random(cfg, seed=0)):
        assert t.dtype == np.float32


def test_count_params_matches_reference():
    for tied in (True, False):
        cfg = ModelConfig(
            vocab_size=100, hidden=16, layers=3, heads=4, max_context=8,
            tied_embeddings=tied,
        )
        vocab_params, total = count_params(cfg)
        assert total == oracles.ref_param_count(100, 16, 3, tied)
        assert vocab_params == 100 * 16 * (1 if tied else 2)


def test_count_params_matches_actual_tensor_sizes():
    for tied in (True, False):
        cfg = ModelConfig(
            vocab_size=50, hidden=8, layers=2, heads=2, max_context=4,
            tied_embeddings=tied,
        )
        model = init_random(cfg, seed=0)
        _, total = count_params(cfg)
        assert total == sum(t.size for t in _tensors(model))


def test_save_load_round_trip(tmp_path):
    for tied in (True, False):
        cfg = ModelConfig(
            vocab_size=20, hidden=8, layers=2, heads=2, max_context=6,
            tied_embeddings=tied,
        )
        model = init_random(cfg, seed=3)
        path = str(tmp_path / f"m_{tied}.vtlm")
        save_model(path, model)
        loaded = load_model(path)
        assert loaded.config == cfg
        for ta, tb in zip(_tensors(model), _tensors(loaded)):
            assert ta.tobytes() == tb.tobytes()


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.vtlm"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(VtError, match="bad magic"):
        load_model(str(path))


def test_load_rejects_unknown_version(tmp_path):
    import struct

    path = tmp_path / "v9.vtlm"
    header = struct.pack("<IIIIIIB", 9, 4, 2, 0, 1, 4, 1)
    path.write_bytes(toylm.MAGIC + header)
    with pytest.raises(VtError, match="version"):
        load_model(str(path))


def test_load_rejects_truncated_file(tmp_path):
    cfg = ModelConfig(vocab_size=8, hidden=4, layers=1, heads=1, max_context=4)
    path = str(tmp_path / "t.vtlm")
    save_model(path, init_random(cfg, seed=0))
    blob = open(path, "rb").read()
    open(path, "wb").write(blob[: len(blob) // 2])
    with pytest.raises(VtError, match="truncated"):
        load_model(path)


def test_load_rejects_trailing_data(tmp_path):
    cfg = ModelConfig(vocab_size=8, hidden=4, layers=1, heads=1, max_context=4)
    path = str(tmp_path / "t.vtlm")
    save_model(path, init_random(cfg, seed=0))
    with open(path, "ab") as f:
        f.write(b"\x00")
    with pytest.raises(VtError, match="trailing"):
        load_model(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(VtError, match="not found"):
        load_model(str(tmp_path / "absent.vtlm"))


def test_positions_match_documented_formula():
    for hidden in (8, 7):
        cfg = ModelConfig(
            vocab_size=4, hidden=hidden, layers=0, heads=1, max_context=5
        )
        model = init_random(cfg, seed=0)
        got = model.positions()
        assert got.shape == (5, hidden)
        assert got.dtype == np.float32
        for t in range(5):
            for i in range(hidden):
                freq = math.exp(-2.0 * math.log(10000.0) * (i // 2) / hidden)
                angle = t * freq
                want = math.sin(angle) if i % 2 == 0 else math.cos(angle)
                assert got[t, i] == pytest.approx(want, abs=1e-6)


def test_forward_logits_shape_and_validation():
    cfg = ModelConfig(vocab_size=16, hidden=8, layers=1, heads=2, max_context=4)
    model = init_random(cfg, seed=0)
    assert forward_logits(model, [0, 1]).shape == (16,)
    with pytest.raises(VtError, match="non-empty"):
        forward_logits(model, [])
    with pytest.raises(VtError, match="max_context"):
        forward_logits(model, [0] * 5)
    with pytest.raises(VtError, match="ids must lie"):
        forward_logits(model, [16])


def test_forward_logits_deterministic():
    cfg = ModelConfig(vocab_size=16, hidden=8, layers=2, heads=2, max_context=8)
    model = init_random(cfg, seed=5)
    a = forward_logits(model, [1, 2, 3])
    b = forward_logits(model, [1, 2, 3])
    assert np.array_equal(a, b)


def test_layer_free_model_matches_reference_forward():
    # independent float64 recomputation of the L=0 path
    rng = np.random.default_rng(11)
    cfg = ModelConfig(vocab_size=13, hidden=6, layers=0, heads=1, max_context=9)
    model = ModelWeights(
        config=cfg,
        embedding=rng.normal(size=(13, 6)).astype(np.float32),
        blocks=[],
        lnf_w=rng.normal(size=6).astype(np.float32),
        lnf_b=rng.normal(size=6).astype(np.float32),
    )
    context = [3, 7, 0, 12]
    got = forward_logits(model, context)

    pos = np.zeros((len(context), 6))
    for t in range(len(context)):
        for i in range(6):
            freq = math.exp(-2.0 * math.log(10000.0) * (i // 2) / 6)
            pos[t, i] = math.sin(t * freq) if i % 2 == 0 else math.cos(t * freq)
    x = model.embedding.astype(np.float64)[context] + pos
    h = x[-1]
    mean = sum(h) / 6
    var = sum((v - mean) ** 2 for v in h) / 6
    normed = [(v - mean) / math.sqrt(var + 1e-5) for v in h]
    affine = [n * w + b for n, w, b in zip(normed, model.lnf_w, model.lnf_b)]
    want = [
        sum(float(model.embedding[r, c]) * affine[c] for c in range(6))
        for r in range(13)
    ]
    assert got == pytest.approx(want, rel=1e-4, abs=1e-5)


def test_project_rows_survives_row_deletion():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((257, 33)).astype(np.float32)
    v = rng.standard_normal(33).astype(np.float32)
    full = project_rows(w, v)
    for kept in ([0], [5, 250], list(range(0, 257, 3))):
        assert np.array_equal(project_rows(w[kept], v), full[kept])


def test_trim_model_gathers_rows():
    cfg = ModelConfig(vocab_size=6, hidden=2, layers=0, heads=1, max_context=4)
    model = init_random(cfg, seed=0)
    sub = build_mapping({0, 3}, 6)
    trimmed = trim_model(model, sub)
    assert trimmed.config.vocab_size == 2
    assert np.array_equal(trimmed.embedding, model.embedding[[0, 3]])
    assert trimmed.embedding.tobytes() == model.embedding[[0, 3]].tobytes()


def test_trim_model_identity_is_identity():
    cfg = ModelConfig(vocab_size=6, hidden=4, layers=1, heads=2, max_context=4)
    model = init_random(cfg, seed=2)
    trimmed = trim_model(model, full_vocabulary(6))
    assert trimmed.config == cfg
    assert trimmed.embedding.tobytes() == model.embedding.tobytes()
    # non-vocabulary tensors are shared, not copied
    assert trimmed.blocks[0].wq is model.blocks[0].wq
    assert trimmed.lnf_w is model.lnf_w


def test_trim_model_untied_slices_both_matrices():
    cfg = ModelConfig(
        vocab_size=6, hidden=2, layers=0, heads=1, max_context=4,
        tied_embeddings=False,
    )
    model = init_random(cfg, seed=0)
    sub = build_mapping({1, 4, 5}, 6)
    trimmed = trim_model(model, sub)
    assert np.array_equal(trimmed.embedding, model.embedding[[1, 4, 5]])
    assert np.array_equal(trimmed.output, model.output[[1, 4, 5]])


def test_trim_model_rejects_empty_and_mismatched():
    cfg = ModelConfig(vocab_size=6, hidden=2, layers=0, heads=1, max_context=4)
    model = init_random(cfg, seed=0)
    with pytest.raises(VtError, match="empty"):
        trim_model(model, build_mapping(set(), 6))
    with pytest.raises(VtError, match="built for"):
        trim_model(model, build_mapping({0}, 7))


def test_trimmed_logits_bitwise_equal_kept_rows():
    cfg = ModelConfig(vocab_size=48, hidden=8, layers=2, heads=2, max_context=8)
    model = init_random(cfg, seed=9)
    sub = build_mapping(set(range(10)) | {17, 33, 47}, 48)
    trimmed = trim_model(model, sub)
    context = [4, 9, 2]
    full = forward_logits(model, context)
    small = forward_logits(trimmed, [sub.to_new(i) for i in context])
    assert np.array_equal(small, full[list(sub.kept)])


def test_remap_output_examples():
    sub = build_mapping({0, 5, 9}, 10)
    assert remap_output([0, 1, 2], sub) == [0, 5, 9]
    assert remap_output([], sub) == []
    with pytest.raises(VtError, match="out of range"):
        remap_output([3], sub)


def test_greedy_decode_max_new_zero():
    cfg = ModelConfig(vocab_size=16, hidden=4, layers=0, heads=1, max_context=8)
    model = init_random(cfg, seed=0)
    result = greedy_decode(model, [3, 1], max_new=0, eos=2)
    assert result.ids == [3, 1]
    assert result.steps == 0
    assert result.step_seconds == []


def test_greedy_decode_length_budget_and_step_times():
    cfg = ModelConfig(vocab_size=16, hidden=4, layers=1, heads=1, max_context=32)
    model = init_random(cfg, seed=4)
    result = greedy_decode(model, [1], max_new=6, eos=2)
    assert len(result.ids) <= 1 + 6
    assert result.steps == len(result.ids) - 1
    assert len(result.step_seconds) == result.steps
    assert all(t >= 0 for t in result.step_seconds)


def test_greedy_decode_stops_after_appending_eos():
    cfg = ModelConfig(vocab_size=16, hidden=4, layers=1, heads=1, max_context=32)
    model = init_random(cfg, seed=4)
    free = greedy_decode(model, [1], max_new=3, eos=0)
    if len(free.ids) == 4:  # eos never came up; force it
        eos = free.ids[1]
        result = greedy_decode(model, [1], max_new=3, eos=eos)
        assert result.ids == [1, eos]
        assert result.steps == 1
    else:
        assert free.ids[-1] == 0


def test_greedy_decode_breaks_ties_toward_lowest_id():
    cfg = ModelConfig(vocab_size=4, hidden=2, layers=0, heads=1, max_context=4)
    emb = np.array([[-1.0, -1.0], [5.0, 5.0], [-1.0, -1.0], [5.0, 5.0]], dtype=np.float32)
    model = ModelWeights(
        config=cfg,
        embedding=emb,
        blocks=[],
        lnf_w=np.ones(2, dtype=np.float32),
        lnf_b=np.zeros(2, dtype=np.float32),
    )
    logits = forward_logits(model, [0])
    ties = np.flatnonzero(logits == logits.max())
    assert len(ties) >= 2  # duplicated rows guarantee an exact tie
    result = greedy_decode(model, [0], max_new=1, eos=3)
    assert result.ids[-1] == ties[0]


def test_greedy_decode_determinism():
    cfg = ModelConfig(vocab_size=32, hidden=8, layers=2, heads=2, max_context=16)
    model = init_random(cfg, seed=8)
    a = greedy_decode(model, [5, 2], max_new=8, eos=1)
    b = greedy_decode(model, [5, 2], max_new=8, eos=1)
    assert a.ids == b.ids


def test_decode_result_stays_in_original_id_space(small_model):
    full = greedy_decode(small_model, [3, 4], max_new=8, eos=2)
    kept = set(range(5)) | set(full.ids)
    sub = build_mapping(kept, 64)
    trimmed = trim_model(small_model, sub)
    again = greedy_decode(trimmed, [3, 4], max_new=8, eos=2, sub=sub)
    assert again.ids == full.ids


def test_trimmed_decode_requires_prompt_and_eos_in_sub(small_model):
    sub = build_mapping(set(range(10)), 64)
    trimmed = trim_model(small_model, sub)
    with pytest.raises(VtError, match="not in the sub-vocabulary"):
        greedy_decode(trimmed, [50], max_new=2, eos=2, sub=sub)
    with pytest.raises(VtError, match="eos"):
        greedy_decode(trimmed, [3], max_new=2, eos=63, sub=sub)


def test_trimmed_decode_rejects_size_mismatch(small_model):
    sub = build_mapping(set(range(10)), 64)
    with pytest.raises(VtError, match="does not match"):
        greedy_decode(small_model, [3], max_new=1, eos=2, sub=sub)


def test_excluding_a_generated_token_forces_divergence(small_model):
    full = greedy_decode(small_model, [3, 4], max_new=8, eos=2)
    generated = full.ids[2:]
    assert len(generated) >= 2, "seed must generate at least two tokens"
    victim = generated[1]
    assert victim not in (2, 3, 4)
    kept = (set(range(64)) - {victim}) | {2, 3, 4}
    sub = build_mapping(kept, 64)
    trimmed = trim_model(small_model, sub)
    diverged = greedy_decode(trimmed, [3, 4], max_new=8, eos=2, sub=sub)
    assert diverged.ids[:3] == full.ids[:3]  # first step still agrees
    assert diverged.ids != full.ids
    assert victim not in diverged.ids


def test_decode_result_dataclass():
    r = DecodeResult(ids=[1, 2], step_seconds=[0.1], steps=1)
    assert r.ids == [1, 2]
