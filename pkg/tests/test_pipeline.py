import json
import logging
from dataclasses import replace

import numpy as np
import pytest

from linecontrast.checkpoint import ConfigMismatch, load_checkpoint, save_checkpoint
from linecontrast.encoder import DualHelixParams, EncoderConfig, ViewMismatch, encode_batch
from linecontrast.graphs import InvariantViolation, LineGraphView, make_graph, permute_nodes, to_line_graph
from linecontrast.pipeline import (
    Batch,
    ParseError,
    TrainConfig,
    compute_step_losses,
    desk_train_config,
    embed_corpus,
    load_corpus,
    load_training_checkpoint,
    loss_config,
    full_train_config,
    pretrain,
    save_corpus,
    save_training_checkpoint,
    transform_call_count,
    transform_corpus,
)
from linecontrast.synth import make_hard_negative_pair, random_molecular_graph

from conftest import path3, single_edge, star, triangle

CFG = EncoderConfig(depth=2, hidden_dim=8, atomic_vocab=6, chirality_vocab=3,
                    bond_type_vocab=4, bond_direction_vocab=3)


def small_corpus(n, seed=0, cfg=CFG):
    return [random_molecular_graph(seed + i, (5, 10), 4, vocab=cfg.vocab) for i in range(n)]


def tiny_train_config(**kw):
    defaults = dict(epochs=2, batch_size=4, seed=0, encoder=CFG)
    defaults.update(kw)
    return TrainConfig(**defaults)


class TestBatch:
    def test_offsets_partition_rows(self):
        graphs = small_corpus(3)
        batch = Batch.build([(g, to_line_graph(g)) for g in graphs])
        assert batch.n_graphs == 3
        assert batch.num_nodes == sum(g.num_nodes for g in graphs)
        assert batch.num_edges == sum(g.num_edges for g in graphs)
        assert batch.node_offsets[0] == 0 and batch.node_offsets[-1] == batch.num_nodes

    def test_line_rows_align_with_edges(self):
        graphs = small_corpus(2)
        batch = Batch.build([(g, to_line_graph(g)) for g in graphs])
        assert np.array_equal(batch.edge_offsets, batch.edge_offsets)
        assert batch.line_edge_origin.max() < batch.num_nodes

    def test_view_mismatch_wrong_view(self):
        g1, g2 = small_corpus(2)
        with pytest.raises(ViewMismatch):
            Batch.build([(g1, to_line_graph(g2))])

    def test_view_mismatch_reordered_line_nodes(self):
        g = triangle()
        view = to_line_graph(g)
        shuffled = LineGraphView(graph=view.graph, node_origin=(1, 0, 2),
                                 edge_origin=view.edge_origin)
        with pytest.raises(ViewMismatch, match="source-edge order"):
            Batch.build([(g, shuffled)])

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            Batch.build([])


class TestCorpusIO:
    def test_round_trip_1000_random_graphs(self, tmp_path):
        corpus = [random_molecular_graph(i, (2, 20), 5) for i in range(1000)]
        path = tmp_path / "corpus.jsonl"
        save_corpus(corpus, path)
        assert load_corpus(path) == corpus

    def test_empty_file_is_empty_corpus(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_corpus(path) == []

    def test_invariant_violation_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps({"nodes": [[0, 0], [0, 0]], "edges": [[0, 1, 0, 0]]})
        bad = json.dumps({"nodes": [[0, 0], [0, 0]], "edges": [[0, 2, 0, 0]]})
        path.write_text(good + "\n" + bad + "\n")
        with pytest.raises(InvariantViolation, match="line 2"):
            load_corpus(path)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"nodes": [[0,0]], "edges": []}\nnot json\n')
        with pytest.raises(ParseError, match="line 2"):
            load_corpus(path)

    def test_zero_edge_graphs_rejected_with_count(self, tmp_path, caplog):
        path = tmp_path / "mixed.jsonl"
        rows = [
            {"nodes": [[0, 0], [1, 0]], "edges": [[0, 1, 0, 0]]},
            {"nodes": [[0, 0]], "edges": []},
            {"nodes": [[2, 1], [1, 0]], "edges": []},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        with caplog.at_level(logging.WARNING, logger="linecontrast"):
            corpus = load_corpus(path)
        assert len(corpus) == 1
        assert "2 zero-edge" in caplog.text


class TestTransformCorpus:
    def test_matches_per_graph_transformation(self):
        corpus = [triangle(), star(3), path3()]
        pairs = transform_corpus(corpus)
        assert [v for _, v in pairs] == [to_line_graph(g) for g in corpus]

    def test_repeated_transformation_identical(self):
        corpus = small_corpus(10)
        assert transform_corpus(corpus) == transform_corpus(corpus)

    def test_counter_increments_once_per_call(self):
        corpus = small_corpus(5)
        before = transform_call_count()
        transform_corpus(corpus)
        assert transform_call_count() == before + 1

    def test_parallel_equals_serial(self):
        corpus = [random_molecular_graph(i, (4, 16), 4) for i in range(200)]
        assert transform_corpus(corpus, workers=4) == transform_corpus(corpus)

    def test_line_edge_totals_match_counting_formula(self):
        from linecontrast.graphs import line_edge_count
        corpus = [random_molecular_graph(i, (4, 18), 4) for i in range(2000)]
        pairs = transform_corpus(corpus)
        total = sum(view.graph.num_edges for _, view in pairs)
        assert total == sum(line_edge_count(g) for g in corpus)


class TestPretrain:
    def test_identical_pair_graph_loss_starts_at_zero(self):
        g = random_molecular_graph(3, (6, 8), 3, vocab=CFG.vocab)
        cfg = tiny_train_config(epochs=1, batch_size=2,
                                encoder=replace(CFG, alpha=0.0, beta=0.0))
        result = pretrain([g, g], cfg)
        assert result.reports[0].l_graph == pytest.approx(0.0, abs=1e-12)
        assert result.reports[0].l_intra == 0.0
        assert result.reports[0].l_inter == 0.0

    def test_corpus_smaller_than_batch_rejected(self):
        with pytest.raises(ValueError, match="corpus"):
            pretrain(small_corpus(3), tiny_train_config(batch_size=8))

    def test_transformation_happens_once(self):
        corpus = small_corpus(8)
        before = transform_call_count()
        pretrain(corpus, tiny_train_config(epochs=3))
        assert transform_call_count() == before + 1

    def test_incomplete_tail_batch_dropped(self):
        corpus = small_corpus(10)
        result = pretrain(corpus, tiny_train_config(epochs=1, batch_size=4))
        assert result.step == 2  # 10 // 4

    def test_same_seed_bit_identical_checkpoints(self, tmp_path):
        corpus = small_corpus(12)
        paths = []
        for run in range(2):
            result = pretrain(corpus, tiny_train_config(epochs=2))
            path = tmp_path / f"run{run}.bin"
            save_training_checkpoint(path, result)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_metrics_log_appends_one_row_per_step(self, tmp_path):
        corpus = small_corpus(8)
        metrics = tmp_path / "metrics.jsonl"
        result = pretrain(corpus, tiny_train_config(epochs=2), metrics_path=metrics)
        rows = [json.loads(line) for line in metrics.read_text().splitlines()]
        assert len(rows) == result.step
        assert rows[0]["step"] == 0 and rows[-1]["step"] == result.step - 1
        for row in rows:
            assert abs(row["l_total"] - (row["l_graph"] + row["l_inter"] + row["l_intra"])) < 1e-12

    def test_batch_order_invariance_at_step_zero(self, rng):
        graphs = small_corpus(6, seed=50)
        params = DualHelixParams.initialize(CFG, 0)
        lcfg = loss_config(tiny_train_config())
        values = []
        for order in (list(range(6)), [3, 1, 5, 0, 4, 2]):
            batch = Batch.build([(graphs[i], to_line_graph(graphs[i])) for i in order])
            enc = encode_batch(batch, params.as_constants(), CFG)
            _, report = compute_step_losses(batch, enc, lcfg)
            values.append(report)
        assert values[0].l_graph == pytest.approx(values[1].l_graph, abs=1e-10)
        assert values[0].l_intra == pytest.approx(values[1].l_intra, abs=1e-10)
        assert values[0].l_inter == pytest.approx(values[1].l_inter, abs=1e-10)

    def test_resume_continues_step_numbering(self, tmp_path):
        corpus = small_corpus(16)
        ckpt = tmp_path / "ckpt.bin"
        first = pretrain(corpus, tiny_train_config(epochs=2, batch_size=8))
        save_training_checkpoint(ckpt, first)
        resumed = pretrain(corpus, tiny_train_config(epochs=4, batch_size=8),
                           init=load_training_checkpoint(ckpt))
        assert first.step == 4
        assert resumed.step == 8
        assert len(resumed.reports) == 4  # only the two new epochs ran
        straight = pretrain(corpus, tiny_train_config(epochs=4, batch_size=8))
        for name in straight.params.arrays:
            assert np.array_equal(straight.params.arrays[name],
                                  resumed.params.arrays[name])

    def test_resume_with_wrong_config_rejected(self, tmp_path):
        corpus = small_corpus(8)
        ckpt = tmp_path / "ckpt.bin"
        save_training_checkpoint(ckpt, pretrain(corpus, tiny_train_config(epochs=1)))
        other = replace(CFG, hidden_dim=16)
        with pytest.raises(ConfigMismatch):
            pretrain(corpus, tiny_train_config(encoder=other),
                     init=load_training_checkpoint(ckpt))


class TestCheckpoint:
    def test_save_load_save_byte_identical(self, tmp_path):
        result = pretrain(small_corpus(8), tiny_train_config(epochs=1))
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        save_training_checkpoint(a, result)
        save_training_checkpoint(b, load_training_checkpoint(a))
        assert a.read_bytes() == b.read_bytes()

    def test_round_trip_preserves_arrays_exactly(self, tmp_path):
        params = DualHelixParams.initialize(CFG, 3)
        path = tmp_path / "raw.bin"
        save_checkpoint(path, CFG, params.arrays, {"seed": 3})
        loaded = load_checkpoint(path)
        assert loaded.config == CFG
        assert loaded.meta == {"seed": 3}
        for k, v in params.arrays.items():
            assert np.array_equal(loaded.arrays[k], v)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(ConfigMismatch, match="version tag"):
            load_checkpoint(path)

    def test_truncated_data_rejected(self, tmp_path):
        params = DualHelixParams.initialize(CFG, 0)
        path = tmp_path / "full.bin"
        save_checkpoint(path, CFG, params.arrays, {})
        clipped = path.read_bytes()[:-16]
        path.write_bytes(clipped)
        with pytest.raises(ConfigMismatch, match="truncated"):
            load_checkpoint(path)

    def test_missing_parameter_detected_on_training_load(self, tmp_path):
        result = pretrain(small_corpus(8), tiny_train_config(epochs=1))
        arrays = {f"model.{k}": v for k, v in result.params.arrays.items()}
        arrays.pop("model.proj.w1")
        path = tmp_path / "partial.bin"
        save_checkpoint(path, CFG, arrays, {})
        with pytest.raises(ConfigMismatch, match="proj.w1"):
            load_training_checkpoint(path)


class TestEmbedCorpus:
    def test_single_graph_matches_direct_encoding(self):
        g = small_corpus(1)[0]
        params = DualHelixParams.initialize(CFG, 0)
        matrix = embed_corpus([g], params)
        enc = encode_batch(Batch.build([(g, to_line_graph(g))]), params.as_constants(), CFG)
        assert np.allclose(matrix, enc.graph_repr.data, atol=1e-12)

    def test_isomorphic_duplicates_embed_identically(self, rng):
        g = small_corpus(1, seed=9)[0]
        perm = rng.permutation(g.num_nodes).tolist()
        params = DualHelixParams.initialize(CFG, 1)
        matrix = embed_corpus([g, permute_nodes(g, perm)], params)
        assert np.allclose(matrix[0], matrix[1], atol=1e-10)

    def test_batching_does_not_change_rows(self):
        corpus = small_corpus(7, seed=70)
        params = DualHelixParams.initialize(CFG, 2)
        a = embed_corpus(corpus, params, batch_size=2)
        b = embed_corpus(corpus, params, batch_size=7)
        assert np.allclose(a, b, atol=1e-12)

    def test_empty_corpus(self):
        params = DualHelixParams.initialize(CFG, 0)
        assert embed_corpus([], params).shape == (0, CFG.hidden_dim)

    def test_local_losses_change_what_embeddings_learn(self):
        # same seed, same corpus: training with and without the local
        # losses must drive the encoder to different embeddings of a
        # pooled-feature-identical pair
        corpus = small_corpus(12, seed=100)
        pair = make_hard_negative_pair(0, "same-structure", vocab=CFG.vocab)
        with_locals = replace(CFG, alpha=1.0, beta=1.0)
        without = replace(CFG, alpha=0.0, beta=0.0)
        rows = {}
        for tag, enc_cfg in (("with", with_locals), ("without", without)):
            result = pretrain(corpus, tiny_train_config(epochs=2, encoder=enc_cfg))
            rows[tag] = embed_corpus(list(pair), result.params)
        assert not np.allclose(rows["with"], rows["without"], atol=1e-6)


class TestPresets:
    def test_desk_preset(self):
        cfg = desk_train_config()
        assert cfg.batch_size == 16 and cfg.epochs == 20
        assert cfg.encoder.hidden_dim == 32 and cfg.encoder.depth == 5

    def test_full_scale_preset(self):
        cfg = full_train_config()
        assert cfg.batch_size == 256 and cfg.epochs == 100
        assert cfg.encoder.hidden_dim == 300 and cfg.encoder.depth == 5
        assert cfg.encoder.tau == pytest.approx(0.1)

    def test_train_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=1)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
