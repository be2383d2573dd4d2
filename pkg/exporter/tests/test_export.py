import numpy as np
import pytest

from liret import TokenKind, Vocabulary, read_store

from livexport.checkpoint import load_checkpoint
from livexport.cli import main
from livexport.export import ExportSpec, export_collection, export_queries

from conftest import PROJECTED_DIM, TINY_VOCAB


def spec_for(checkpoint, out, **kw):
    return ExportSpec(checkpoint=str(checkpoint), output=out, **kw)


class TestCheckpointLoading:
    def test_projection_discovered(self, tiny_checkpoint):
        loaded = load_checkpoint(str(tiny_checkpoint))
        assert loaded.dim == PROJECTED_DIM
        assert loaded.projection.shape == (PROJECTED_DIM, 32)
        assert loaded.query_marker_id == 1
        assert loaded.doc_marker_id == 2

    def test_identity_projection_fallback(self, bare_checkpoint):
        loaded = load_checkpoint(str(bare_checkpoint))
        assert loaded.projection is None
        assert loaded.dim == 32

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(str(tmp_path / "nope"))


class TestQueryExport:
    def test_store_layout(self, tiny_checkpoint, query_file, tmp_path):
        out = tmp_path / "q.liv"
        written = export_queries(
            spec_for(tiny_checkpoint, out, queries=query_file, total_length=32)
        )
        assert written == 3
        store = read_store(out)
        assert store.dim == PROJECTED_DIM
        assert [p.doc_id for p in store.passages] == [1, 2, 3]
        for p in store.passages:
            assert len(p.rows) == 32
            kinds = p.rows.kinds.tolist()
            assert kinds[0] == int(TokenKind.CLS)
            assert kinds[1] == int(TokenKind.Q)
            assert kinds[-1] == int(TokenKind.MASK)
            sep = kinds.index(int(TokenKind.SEP))
            assert all(k == int(TokenKind.TEXT) for k in kinds[2:sep])
            assert all(k == int(TokenKind.MASK) for k in kinds[sep + 1 :])

    def test_rows_unit_norm(self, tiny_checkpoint, query_file, tmp_path):
        out = tmp_path / "q.liv"
        export_queries(spec_for(tiny_checkpoint, out, queries=query_file, total_length=32))
        for p in read_store(out).passages:
            norms = np.linalg.norm(p.rows.rows, axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-3)

    def test_deterministic_re_export(self, tiny_checkpoint, query_file, tmp_path):
        a, b = tmp_path / "a.liv", tmp_path / "b.liv"
        export_queries(spec_for(tiny_checkpoint, a, queries=query_file, total_length=32))
        export_queries(spec_for(tiny_checkpoint, b, queries=query_file, total_length=32))
        assert a.read_bytes() == b.read_bytes()

    def test_attention_contract_across_mask_counts(self, tiny_checkpoint, query_file, tmp_path):
        stores = {}
        for count in (0, 8):
            out = tmp_path / f"m{count}.liv"
            export_queries(
                spec_for(tiny_checkpoint, out, queries=query_file, mask_count=count)
            )
            stores[count] = read_store(out)
        for p0, p8 in zip(stores[0].passages, stores[8].passages):
            base = len(p0.rows)
            assert len(p8.rows) == base + 8
            np.testing.assert_allclose(
                p8.rows.rows[:base], p0.rows.rows, atol=1e-4
            )

    def test_batch_size_does_not_change_rows(self, tiny_checkpoint, query_file, tmp_path):
        outs = {}
        for bs in (1, 3):
            out = tmp_path / f"b{bs}.liv"
            export_queries(
                spec_for(
                    tiny_checkpoint, out, queries=query_file, total_length=32, batch_size=bs
                )
            )
            outs[bs] = read_store(out)
        for p1, p3 in zip(outs[1].passages, outs[3].passages):
            np.testing.assert_allclose(p1.rows.rows, p3.rows.rows, atol=1e-4)

    def test_token_overflow_rejected(self, tiny_checkpoint, tmp_path):
        long_query = tmp_path / "long.tsv"
        long_query.write_text("1\t" + " ".join(["love"] * 200) + "\n", encoding="utf-8")
        with pytest.raises(ValueError, match="token overflow"):
            export_queries(
                spec_for(tiny_checkpoint, tmp_path / "x.liv", queries=long_query, mask_count=0)
            )

    def test_total_length_beyond_position_limit(self, tiny_checkpoint, query_file, tmp_path):
        with pytest.raises(ValueError, match="position limit"):
            export_queries(
                spec_for(
                    tiny_checkpoint, tmp_path / "x.liv", queries=query_file, total_length=512
                )
            )

    def test_vocab_side_file(self, tiny_checkpoint, query_file, tmp_path):
        out = tmp_path / "q.liv"
        vocab_path = tmp_path / "vocab.txt"
        export_queries(
            spec_for(
                tiny_checkpoint,
                out,
                queries=query_file,
                total_length=32,
                vocab_out=vocab_path,
            )
        )
        vocab = Vocabulary.load(vocab_path)
        assert len(vocab) == len(TINY_VOCAB)
        sp = vocab.special_tokens()
        assert sp.q_id == 1  # [unused0] fallback
        assert vocab.surface(7) == "what"

    def test_policy_validation(self, tiny_checkpoint, query_file, tmp_path):
        with pytest.raises(ValueError, match="not both"):
            spec_for(
                tiny_checkpoint,
                tmp_path / "x.liv",
                queries=query_file,
                mask_count=4,
                total_length=32,
            )


class TestCollectionExport:
    def test_two_documents(self, tiny_checkpoint, collection_file, tmp_path):
        out = tmp_path / "d.liv"
        written = export_collection(
            spec_for(tiny_checkpoint, out, collection=collection_file)
        )
        assert written == 2
        store = read_store(out)
        assert len(store.passages) == 2
        assert store.dim == PROJECTED_DIM
        kinds = store.passages[0].rows.kinds.tolist()
        assert kinds[0] == int(TokenKind.CLS)
        assert kinds[1] == int(TokenKind.DOC_TEXT)  # the [D] marker slot
        assert kinds[-1] == int(TokenKind.SEP)

    def test_empty_collection_is_16_byte_store(self, tiny_checkpoint, tmp_path):
        empty = tmp_path / "empty.tsv"
        empty.write_text("", encoding="utf-8")
        out = tmp_path / "d.liv"
        written = export_collection(spec_for(tiny_checkpoint, out, collection=empty))
        assert written == 0
        assert out.stat().st_size == 16
        assert read_store(out).passages == []

    def test_punctuation_filter(self, tiny_checkpoint, collection_file, tmp_path):
        plain = tmp_path / "plain.liv"
        filtered = tmp_path / "filtered.liv"
        export_collection(spec_for(tiny_checkpoint, plain, collection=collection_file))
        export_collection(
            spec_for(
                tiny_checkpoint, filtered, collection=collection_file, filter_punctuation=True
            )
        )
        plain_store = read_store(plain)
        filtered_store = read_store(filtered)
        period = TINY_VOCAB.index(".")
        comma = TINY_VOCAB.index(",")
        for p, f in zip(plain_store.passages, filtered_store.passages):
            assert period in p.token_ids or comma in p.token_ids
            assert period not in f.token_ids and comma not in f.token_ids
            assert len(f.rows) < len(p.rows)

    def test_doc_truncation(self, tiny_checkpoint, tmp_path):
        long_doc = tmp_path / "long.tsv"
        long_doc.write_text("5\t" + " ".join(["water"] * 400) + "\n", encoding="utf-8")
        out = tmp_path / "d.liv"
        export_collection(
            spec_for(tiny_checkpoint, out, collection=long_doc, doc_maxlen=50)
        )
        assert len(read_store(out).passages[0].rows) == 50

    def test_roundtrip_through_engine_unchanged(self, tiny_checkpoint, collection_file, tmp_path):
        from liret import CorpusStore, write_store

        out = tmp_path / "d.liv"
        export_collection(spec_for(tiny_checkpoint, out, collection=collection_file))
        loaded = read_store(out)
        rewritten = tmp_path / "copy.liv"
        write_store(CorpusStore(loaded.dim, loaded.passages), rewritten)
        assert rewritten.read_bytes() == out.read_bytes()


class TestCli:
    def test_queries_command(self, tiny_checkpoint, query_file, tmp_path):
        out = tmp_path / "q.liv"
        rc = main(
            [
                "queries",
                "--checkpoint",
                str(tiny_checkpoint),
                "--queries",
                str(query_file),
                "--out",
                str(out),
                "--total-length",
                "32",
                "--vocab-out",
                str(tmp_path / "vocab.txt"),
            ]
        )
        assert rc == 0
        assert len(read_store(out).passages) == 3
        assert (tmp_path / "vocab.txt").exists()

    def test_collection_command(self, tiny_checkpoint, collection_file, tmp_path):
        out = tmp_path / "d.liv"
        rc = main(
            [
                "collection",
                "--checkpoint",
                str(tiny_checkpoint),
                "--collection",
                str(collection_file),
                "--out",
                str(out),
                "--filter-punctuation",
            ]
        )
        assert rc == 0
        assert len(read_store(out).passages) == 2

    def test_error_exit_code(self, tmp_path, query_file):
        rc = main(
            [
                "queries",
                "--checkpoint",
                str(tmp_path / "missing"),
                "--queries",
                str(query_file),
                "--out",
                str(tmp_path / "q.liv"),
            ]
        )
        assert rc == 1
