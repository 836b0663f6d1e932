from pathlib import Path

import numpy as np
import pytest

from mweexport import ExportSpec, ModelLoadFailure, export
from mweexport.cli import main

from mwetag import embedio
from mwetag.corpus import Label, read_dimsum_file
from mwetag.metrics import evaluate_tokens
from mwetag.taggers import TrainConfig, predict, train_linear_head


def write_words_file(path, sentences):
    lines = []
    for words in sentences:
        for k, word in enumerate(words):
            lines.append(f"{k + 1}\t{word}\t{word}\tX\tO\t0")
        lines.append("")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestAlignment:
    def test_one_row_per_word_regardless_of_subwords(self, tiny_checkpoint, tmp_path):
        corpus_path = tmp_path / "three.tsv"
        write_words_file(corpus_path, [["playing", "it", "safe"]])
        out = tmp_path / "three.mwee"
        rows = export(ExportSpec(tiny_checkpoint, str(corpus_path), str(out)))
        assert rows == 3
        with open(out, "rb") as fh:
            efile = embedio.read_embeddings(fh)
        assert efile.sentence_embeddings[0][1].shape[0] == 3

    def test_dim_comes_from_checkpoint_config(self, tiny_checkpoint, corpus_files, tmp_path):
        from transformers import AutoConfig

        out = tmp_path / "dim.mwee"
        export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(out)))
        with open(out, "rb") as fh:
            efile = embedio.read_embeddings(fh)
        assert efile.dim == AutoConfig.from_pretrained(tiny_checkpoint).hidden_size

    def test_joins_source_corpus_with_zero_mismatches(self, tiny_checkpoint, corpus_files, tmp_path):
        out = tmp_path / "join.mwee"
        total = export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(out)))
        corpus = read_dimsum_file(corpus_files["test"])
        with open(out, "rb") as fh:
            efile = embedio.read_embeddings(fh)
        joined = embedio.join(corpus, efile)
        assert joined.missing == 0
        assert len(joined.pairs) == len(corpus)
        assert total == corpus.n_tokens
        assert sum(v.shape[0] for _, v in efile.sentence_embeddings) == corpus.n_tokens
        print("ACCEPTANCE PASS: exported embeddings join the corpus with zero mismatches")

    def test_export_is_byte_deterministic(self, tiny_checkpoint, corpus_files, tmp_path):
        out_a, out_b = tmp_path / "a.mwee", tmp_path / "b.mwee"
        export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(out_a), batch_size=8))
        export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(out_b), batch_size=8))
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_pooling_modes_differ_on_multi_subword_words(self, tiny_checkpoint, tmp_path):
        corpus_path = tmp_path / "w.tsv"
        write_words_file(corpus_path, [["compound", "words", "here"]])
        first, mean = tmp_path / "f.mwee", tmp_path / "m.mwee"
        export(ExportSpec(tiny_checkpoint, str(corpus_path), str(first), pooling="first_subword"))
        export(ExportSpec(tiny_checkpoint, str(corpus_path), str(mean), pooling="mean_subwords"))
        with open(first, "rb") as fh:
            rows_first = embedio.read_embeddings(fh).sentence_embeddings[0][1]
        with open(mean, "rb") as fh:
            rows_mean = embedio.read_embeddings(fh).sentence_embeddings[0][1]
        assert rows_first.shape == rows_mean.shape
        assert not np.allclose(rows_first, rows_mean)

    def test_layer_selection_changes_output(self, tiny_checkpoint, tmp_path):
        corpus_path = tmp_path / "w.tsv"
        write_words_file(corpus_path, [["pick", "a", "layer"]])
        last, first = tmp_path / "last.mwee", tmp_path / "embed.mwee"
        export(ExportSpec(tiny_checkpoint, str(corpus_path), str(last), layer=-1))
        export(ExportSpec(tiny_checkpoint, str(corpus_path), str(first), layer=0))
        assert last.read_bytes() != first.read_bytes()

    def test_batch_size_does_not_change_values(self, tiny_checkpoint, corpus_files, tmp_path):
        small, large = tmp_path / "s.mwee", tmp_path / "l.mwee"
        export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(small), batch_size=2))
        export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(large), batch_size=32))
        with open(small, "rb") as fh:
            rows_s = embedio.read_embeddings(fh).sentence_embeddings
        with open(large, "rb") as fh:
            rows_l = embedio.read_embeddings(fh).sentence_embeddings
        for (i_s, v_s), (i_l, v_l) in zip(rows_s, rows_l):
            assert i_s == i_l
            np.testing.assert_allclose(v_s, v_l, atol=2e-5)


class TestErrors:
    def test_missing_checkpoint(self, corpus_files, tmp_path):
        with pytest.raises(ModelLoadFailure):
            export(ExportSpec("/nonexistent/model", corpus_files["test"], str(tmp_path / "x.mwee")))

    def test_bad_pooling_rejected(self):
        with pytest.raises(ValueError):
            ExportSpec("m", "c", "o", pooling="max")

    def test_layer_out_of_range(self, tiny_checkpoint, corpus_files, tmp_path):
        with pytest.raises(ValueError):
            export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(tmp_path / "x.mwee"), layer=7))


class TestCli:
    def test_end_to_end(self, tiny_checkpoint, corpus_files, tmp_path, capsys):
        out = tmp_path / "cli.mwee"
        code = main(
            [
                "--model",
                tiny_checkpoint,
                "--corpus",
                corpus_files["test"],
                "--out",
                str(out),
                "--batch-size",
                "8",
            ]
        )
        assert code == 0
        assert "word vectors" in capsys.readouterr().out
        with open(out, "rb") as fh:
            embedio.read_embeddings(fh)

    def test_error_exit_code(self, corpus_files, tmp_path, capsys):
        code = main(
            ["--model", "/nope", "--corpus", corpus_files["test"], "--out", str(tmp_path / "x.mwee")]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestFrozenFeatureBaseline:
    def test_linear_head_beats_all_outside_macro_f1(self, tiny_checkpoint, corpus_files, tmp_path):
        train_out = tmp_path / "train.mwee"
        test_out = tmp_path / "test.mwee"
        export(ExportSpec(tiny_checkpoint, corpus_files["train"], str(train_out)))
        export(ExportSpec(tiny_checkpoint, corpus_files["test"], str(test_out)))

        train_corpus = read_dimsum_file(corpus_files["train"])
        test_corpus = read_dimsum_file(corpus_files["test"])
        with open(train_out, "rb") as fh:
            train_joined = embedio.join(train_corpus, embedio.read_embeddings(fh))
        with open(test_out, "rb") as fh:
            test_joined = embedio.join(test_corpus, embedio.read_embeddings(fh))
        assert train_joined.missing == 0 and test_joined.missing == 0

        # frozen-embedding recipe: batches of 32, Adam at 4e-5, 3 epochs,
        # warmup over the first 10% of steps
        cfg = TrainConfig.linear_head(seed=3)
        model, trace = train_linear_head(train_joined.pairs, cfg)
        assert all(np.isfinite(v) for v in trace)

        gold = [s.labels for s, _ in test_joined.pairs]
        pred = [predict(model, s, v) for s, v in test_joined.pairs]
        trained = evaluate_tokens(gold, pred)

        all_outside = [[Label.O] * len(seq) for seq in gold]
        baseline = evaluate_tokens(gold, all_outside)

        print(
            f"trained macro_f1={trained.macro_f1:.4f} vs all-O baseline={baseline.macro_f1:.4f}"
        )
        assert trained.macro_f1 > baseline.macro_f1
        print("ACCEPTANCE PASS: frozen-feature linear head beats the all-O baseline")
