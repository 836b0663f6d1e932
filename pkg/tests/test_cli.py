import io
import json

import numpy as np
import pytest

from mwetag import embedio
from mwetag.cli import EXIT_INPUT, EXIT_OK, EXIT_TRAINING, main, parse_config_file, ConfigError
from mwetag.corpus import parse_dimsum, read_dimsum_file, write_dimsum
from mwetag.synth import synthetic_corpus

from conftest import TWO_TOKEN_FIXTURE


@pytest.fixture
def corpus_file(tmp_path):
    corpus = synthetic_corpus(10, 90, seed=14, id_prefix="cli")
    path = tmp_path / "train.tsv"
    with open(path, "w", encoding="utf-8") as fh:
        write_dimsum(corpus, fh)
    return path


def write_config(tmp_path, name="run.cfg", **keys):
    lines = ["# generated by the test suite"]
    lines += [f"{key} = {value}" for key, value in keys.items()]
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def bilstm_config(tmp_path, corpus_file, **extra):
    model_file = tmp_path / "model.mwep"
    keys = dict(
        model_kind="bilstm_crf",
        train_file=str(corpus_file),
        model_file=str(model_file),
        hidden_size=8,
        embed_dim=6,
        epochs=4,
        learning_rate=0.1,
        seed=3,
    )
    keys.update(extra)
    return write_config(tmp_path, **keys), model_file


class TestConfigFile:
    def test_parses_key_value_lines(self, tmp_path):
        path = write_config(tmp_path, seed=5, train_file="x.tsv")
        assert parse_config_file(path) == {"seed": "5", "train_file": "x.tsv"}

    def test_unknown_key_is_hard_error(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("learning_rte = 0.1\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# top\n\nseed = 7\n  # indented comment\n")
        assert parse_config_file(path) == {"seed": "7"}


class TestStats:
    def test_counts_printed(self, corpus_file, capsys):
        assert main(["stats", str(corpus_file)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "10 sentences, 90 tokens" in out
        assert "labels:" in out

    def test_empty_file(self, tmp_path, capsys):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        assert main(["stats", str(path)]) == EXIT_OK
        assert "0 sentences, 0 tokens" in capsys.readouterr().out

    def test_malformed_line_exits_2_with_line_number(self, tmp_path, capsys):
        path = tmp_path / "bad.tsv"
        path.write_text("1\tword\n")
        assert main(["stats", str(path)]) == EXIT_INPUT
        assert "line 1" in capsys.readouterr().err

    def test_exclude_ids_changes_counts(self, corpus_file, capsys):
        assert main(["stats", str(corpus_file), "--exclude-ids", "cli.00001"]) == EXIT_OK
        assert "9 sentences," in capsys.readouterr().out

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["stats", str(tmp_path / "nope.tsv")]) == EXIT_INPUT


class TestTrain:
    def test_bilstm_train_writes_model_trace_and_figure(self, tmp_path, corpus_file):
        config, model_file = bilstm_config(tmp_path, corpus_file, epochs=50)
        assert main(["train", "--config", str(config)]) == EXIT_OK
        assert model_file.exists()
        trace = (tmp_path / "model.trace.tsv").read_text().splitlines()
        assert len(trace) == 50
        assert (tmp_path / "model.loss.png").stat().st_size > 0

    def test_same_seed_twice_is_byte_identical(self, tmp_path, corpus_file):
        config_a, model_a = bilstm_config(tmp_path, corpus_file)
        assert main(["train", "--config", str(config_a)]) == EXIT_OK
        first = model_a.read_bytes()
        assert main(["train", "--config", str(config_a)]) == EXIT_OK
        assert model_a.read_bytes() == first

    def test_seed_flag_overrides_config(self, tmp_path, corpus_file):
        config, model_file = bilstm_config(tmp_path, corpus_file)
        assert main(["train", "--config", str(config)]) == EXIT_OK
        baseline = model_file.read_bytes()
        assert main(["train", "--config", str(config), "--seed", "99"]) == EXIT_OK
        assert model_file.read_bytes() != baseline

    def test_linear_head_without_embeddings_exits_2(self, tmp_path, corpus_file, capsys):
        config = write_config(
            tmp_path,
            model_kind="linear_head",
            train_file=str(corpus_file),
            model_file=str(tmp_path / "m.mwep"),
            epochs=1,
        )
        assert main(["train", "--config", str(config)]) == EXIT_INPUT
        assert "embeddings_file" in capsys.readouterr().err

    def test_unknown_config_key_exits_2(self, tmp_path, corpus_file):
        config = tmp_path / "bad.cfg"
        config.write_text("model_kind = bilstm_crf\nbogus_key = 1\n")
        assert main(["train", "--config", str(config)]) == EXIT_INPUT

    def test_missing_config_exits_2(self):
        assert main(["train"]) == EXIT_INPUT

    def test_linear_head_training_through_cli(self, tmp_path, corpus_file):
        corpus = read_dimsum_file(corpus_file)
        rng = np.random.default_rng(0)
        entries = [
            (i, rng.normal(size=(len(s), 5)).astype(np.float32))
            for i, s in enumerate(corpus.sentences)
        ]
        emb_path = tmp_path / "feat.mwee"
        with open(emb_path, "wb") as fh:
            embedio.write_embeddings(embedio.EmbeddingFile(5, entries), fh)
        config = write_config(
            tmp_path,
            model_kind="linear_head",
            train_file=str(corpus_file),
            model_file=str(tmp_path / "head.mwep"),
            embeddings_file=str(emb_path),
            epochs=2,
            seed=1,
        )
        assert main(["train", "--config", str(config)]) == EXIT_OK
        assert (tmp_path / "head.mwep").exists()
        assert len((tmp_path / "head.trace.tsv").read_text().splitlines()) == 2

    def test_non_finite_loss_exits_3(self, tmp_path, corpus_file, monkeypatch):
        from mwetag import taggers

        def explode(corpus, cfg):
            raise taggers.NonFiniteLoss(0, 0, float("nan"))

        monkeypatch.setattr("mwetag.cli.taggers.train_bilstm_crf", explode)
        config, _ = bilstm_config(tmp_path, corpus_file)
        assert main(["train", "--config", str(config)]) == EXIT_TRAINING


@pytest.fixture
def memorized_model(tmp_path):
    """A model overfit on a 1-sentence corpus; predicts its gold labels."""
    corpus = synthetic_corpus(1, 6, seed=33, id_prefix="mem")
    path = tmp_path / "mem.tsv"
    with open(path, "w", encoding="utf-8") as fh:
        write_dimsum(corpus, fh)
    config = write_config(
        tmp_path,
        name="mem.cfg",
        model_kind="bilstm_crf",
        train_file=str(path),
        model_file=str(tmp_path / "mem.mwep"),
        hidden_size=48,
        embed_dim=24,
        epochs=250,
        learning_rate=0.1,
        seed=2,
    )
    assert main(["train", "--config", str(config)]) == EXIT_OK
    return tmp_path / "mem.mwep", path


class TestEvaluate:
    def test_memorized_model_scores_perfectly(self, tmp_path, memorized_model, capsys):
        model_file, corpus_path = memorized_model
        report_path = tmp_path / "report.json"
        code = main(
            ["evaluate", "--model", str(model_file), "--test", str(corpus_path), "--report", str(report_path)]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "weighted_recall=1.0000" in out
        assert "macro_f1=1.0000" in out
        data = json.loads(report_path.read_text())
        assert data["weighted"]["f1"] == 1.0
        assert (tmp_path / "report.confusion.png").stat().st_size > 0

    def test_summary_column_order(self, tmp_path, memorized_model, capsys):
        model_file, corpus_path = memorized_model
        main(["evaluate", "--model", str(model_file), "--test", str(corpus_path), "--report", str(tmp_path / "r.json")])
        summary = capsys.readouterr().out.splitlines()[0]
        fields = [f.split("=")[0] for f in summary.split()]
        assert fields == ["weighted_recall", "weighted_precision", "weighted_f1", "macro_f1"]

    def test_missing_embeddings_for_linear_head_exits_2(self, tmp_path, corpus_file):
        from mwetag.neuralnet import LinearParams
        from mwetag.taggers import TaggerModel, TrainConfig, save_model

        model = TaggerModel(
            model_kind="linear_head", config=TrainConfig.linear_head(), head=LinearParams.zeros(4, 3)
        )
        model_path = tmp_path / "head.mwep"
        with open(model_path, "wb") as fh:
            save_model(model, fh)
        code = main(
            ["evaluate", "--model", str(model_path), "--test", str(corpus_file), "--report", str(tmp_path / "r.json")]
        )
        assert code == EXIT_INPUT

    def test_corrupt_model_exits_2(self, tmp_path, corpus_file):
        bad = tmp_path / "bad.mwep"
        bad.write_bytes(b"NOTAMODEL")
        code = main(
            ["evaluate", "--model", str(bad), "--test", str(corpus_file), "--report", str(tmp_path / "r.json")]
        )
        assert code == EXIT_INPUT


class TestPredict:
    def test_rewrites_tag_column_and_preserves_the_rest(self, tmp_path, memorized_model):
        model_file, corpus_path = memorized_model
        out_path = tmp_path / "pred.tsv"
        code = main(["predict", "--model", str(model_file), "--input", str(corpus_path), "--out", str(out_path)])
        assert code == EXIT_OK

        original_lines = corpus_path.read_text().splitlines()
        new_lines = out_path.read_text().splitlines()
        assert len(original_lines) == len(new_lines)
        for old, new in zip(original_lines, new_lines):
            if not old:
                assert not new
                continue
            old_fields, new_fields = old.split("\t"), new.split("\t")
            assert old_fields[:4] == new_fields[:4]
            assert old_fields[5:] == new_fields[5:]

        reparsed = read_dimsum_file(out_path)
        assert reparsed.n_tokens == read_dimsum_file(corpus_path).n_tokens

    def test_memorized_model_reproduces_gold_tags(self, tmp_path, memorized_model):
        model_file, corpus_path = memorized_model
        out_path = tmp_path / "pred.tsv"
        main(["predict", "--model", str(model_file), "--input", str(corpus_path), "--out", str(out_path)])
        gold = read_dimsum_file(corpus_path)
        predicted = read_dimsum_file(out_path)
        for g_sent, p_sent in zip(gold.sentences, predicted.sentences):
            assert g_sent.labels == p_sent.labels

    def test_inputs_never_mutated(self, tmp_path, memorized_model):
        model_file, corpus_path = memorized_model
        corpus_before = corpus_path.read_bytes()
        model_before = model_file.read_bytes()
        main(["predict", "--model", str(model_file), "--input", str(corpus_path), "--out", str(tmp_path / "p.tsv")])
        main(["evaluate", "--model", str(model_file), "--test", str(corpus_path), "--report", str(tmp_path / "r.json")])
        main(["stats", str(corpus_path)])
        assert corpus_path.read_bytes() == corpus_before
        assert model_file.read_bytes() == model_before

    def test_linear_head_predict_needs_and_uses_embeddings(self, tmp_path, corpus_file):
        corpus = read_dimsum_file(corpus_file)
        rng = np.random.default_rng(8)
        entries = [
            (i, rng.normal(size=(len(s), 5)).astype(np.float32))
            for i, s in enumerate(corpus.sentences)
        ]
        emb_path = tmp_path / "feat.mwee"
        with open(emb_path, "wb") as fh:
            embedio.write_embeddings(embedio.EmbeddingFile(5, entries), fh)
        config = write_config(
            tmp_path,
            model_kind="linear_head",
            train_file=str(corpus_file),
            model_file=str(tmp_path / "head.mwep"),
            embeddings_file=str(emb_path),
            epochs=1,
            seed=1,
        )
        assert main(["train", "--config", str(config)]) == EXIT_OK
        out_path = tmp_path / "pred.tsv"
        assert (
            main(
                [
                    "predict",
                    "--model",
                    str(tmp_path / "head.mwep"),
                    "--input",
                    str(corpus_file),
                    "--out",
                    str(out_path),
                    "--embeddings",
                    str(emb_path),
                ]
            )
            == EXIT_OK
        )
        assert read_dimsum_file(out_path).n_tokens == corpus.n_tokens
        # without the embeddings the same command is an input error
        assert (
            main(
                [
                    "predict",
                    "--model",
                    str(tmp_path / "head.mwep"),
                    "--input",
                    str(corpus_file),
                    "--out",
                    str(out_path),
                ]
            )
            == EXIT_INPUT
        )

    def test_excluded_sentences_pass_through_untouched(self, tmp_path, corpus_file):
        config, model_file = bilstm_config(tmp_path, corpus_file, epochs=1)
        main(["train", "--config", str(config)])
        out_path = tmp_path / "pred.tsv"
        code = main(
            [
                "predict",
                "--model",
                str(model_file),
                "--input",
                str(corpus_file),
                "--out",
                str(out_path),
                "--exclude-ids",
                "cli.00001",
            ]
        )
        assert code == EXIT_OK
        original = read_dimsum_file(corpus_file)
        rewritten = read_dimsum_file(out_path)
        kept = [t.mwe_tag_raw for t in rewritten.sentences[0].tokens]
        assert kept == [t.mwe_tag_raw for t in original.sentences[0].tokens]


class TestStrictIob:
    def test_strict_flag_rejects_violations(self, tmp_path, capsys):
        # I at sentence start violates the default scheme
        path = tmp_path / "bad_scheme.tsv"
        path.write_text("1\tword\tword\tX\tI\t0\n\n")
        assert main(["stats", str(path), "--strict-iob"]) == EXIT_INPUT
        assert "I at sequence start" in capsys.readouterr().err

    def test_iob1_mode_accepts_leading_i(self, tmp_path):
        path = tmp_path / "iob1.tsv"
        path.write_text("1\tword\tword\tX\tI\t0\n\n")
        assert main(["stats", str(path), "--strict-iob", "--scheme", "iob1"]) == EXIT_OK
