import math
import pathlib

import pytest

import qapairgen as qa

ROOT = pathlib.Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "tests" / "fixtures"


def tiny_config(data_dir):
    cfg = qa.Config.load(str(ROOT / "configs" / "desk.ini"))
    for split in ("train", "valid", "test"):
        cfg.set(f"data.{split}", str(data_dir / f"{split}.tsv"))
    for key, value in [("model.word_dim", "8"), ("model.hidden_size", "8"), ("answer.pointer_hidden", "8"),
                       ("answer.pointer_attention", "8"), ("train.epochs", "3")]:
        cfg.set(key, value)
    return cfg


def test_tagged_line_round_trip():
    line = "who|WP|O|nsubj|O wrote|VBD|O|ROOT|B it|PRP|O|dobj|I"
    tokens = qa.parse_tagged_line(line)
    assert tokens[1] == ("wrote", "VBD", "O", "ROOT", "B")
    assert qa.format_tagged_line(tokens) == line
    with pytest.raises(qa.ParseError):
        qa.parse_tagged_line("word|NN|O|nsubj")


def test_bio():
    assert qa.encode_bio(5, (2, 4)) == "OBIIO"
    assert qa.encode_bio(3) == "OOO"
    assert qa.decode_bio("OBIIO") == (2, 4)
    assert qa.decode_bio("OOO") is None
    with pytest.raises(qa.DataError):
        qa.decode_bio("BOB")
    assert qa.locate_answer(["a", "b", "c"], ["b", "c"]) == (2, 3)


def test_variants_and_config():
    names = [v["name"] for v in qa.variants()]
    assert names[0] == "QG" and "QG+F+GAE" in names and len(names) == 7
    cfg = qa.Config.load(str(ROOT / "configs" / "full.ini"))
    again = qa.Config.parse(cfg.canonical_text())
    assert again == cfg and again.fingerprint == cfg.fingerprint
    with pytest.raises(qa.ConfigError):
        cfg.set("train.epochs", "0")
    with pytest.raises(qa.ConfigError):
        qa.Config.parse("[model]\nno_such_key = 1\n")


def test_metrics():
    s = "the cat sat on the mat".split()
    assert qa.bleu([s], [[s]])["scores"] == pytest.approx([100.0] * 4)
    assert qa.bleu([["the"] * 4], [[["the", "cat"]]], max_n=1)["scores"][0] == pytest.approx(25.0)
    assert qa.rouge_l(s, s) == pytest.approx(100.0)
    assert qa.meteor(s, s) == pytest.approx(100.0 * (1 - 0.5 / 6 ** 3))
    rows = [(f"r{r}", f"q{q}", "fluency", q < total) for r, total in enumerate([80, 79, 73]) for q in range(100)]
    assert qa.human_eval(rows)["fluency"] == pytest.approx(77.33, abs=0.005)
    assert qa.human_eval_file(str(FIXTURES / "judgements.csv"))["relevance"] == pytest.approx(100.0)


def test_forced_pointer_decoding():
    words = qa.tokenize("other past residents include composer journalist and newspaper editor william henry "
                        "wills , ron goodwin , and journalist angela rippon and comedian dawn french")
    assert qa.indices_to_tokens(words, qa.decode_forced(len(words), [10, 12], "boundary")) == \
        ["william", "henry", "wills"]
    assert qa.indices_to_tokens(words, qa.decode_forced(len(words), [6, 11, 20], "sequence")) == \
        ["journalist", "henry", "rippon"]


def test_pipeline_end_to_end(tmp_path):
    report = qa.prepare(str(FIXTURES / "squad12.json"), str(FIXTURES / "squad12.tagged"), str(tmp_path))
    assert report["split"] == {"train": 8, "valid": 2, "test": 2}
    cfg = tiny_config(tmp_path)

    summary = qa.train(cfg, "boundary", str(tmp_path / "b.ckpt"))
    assert summary["epochs_run"] == 3
    sel = qa.select_answer(str(tmp_path / "b.ckpt"), str(tmp_path / "test.tsv"), str(tmp_path / "sel.tsv"))
    assert sel["sentences"] == 2

    summary = qa.train(cfg, "qg", str(tmp_path / "qg.ckpt"), str(tmp_path / "run"))
    assert math.isfinite(summary["metrics"]["train_perplexity"])
    assert (tmp_path / "run" / "epochs.jsonl").read_text().count("\n") == 3
    info = qa.checkpoint_info(str(tmp_path / "qg.ckpt"))
    assert info["kind"] == "qg" and info["fingerprint"] == cfg.fingerprint

    qs = qa.generate(str(tmp_path / "qg.ckpt"), str(tmp_path / "sel.tsv"), str(tmp_path / "q.txt"), beam=1)
    assert len(qs) == 2 and all(q["log_prob"] <= 0 for q in qs)
    scores = qa.evaluate_files(str(tmp_path / "q.txt"), str(tmp_path / "test.tsv"))
    assert scores["counts"]["sentences"] == 2 and 0 <= scores["bleu_4"] <= 100

    with pytest.raises(qa.DataError, match="no_such"):
        qa.generate(str(tmp_path / "no_such.ckpt"), str(tmp_path / "sel.tsv"), str(tmp_path / "x.txt"))


def test_gradcheck_single_seed():
    rows = qa.gradcheck(seeds=1)
    assert rows and all(r["passed"] for r in rows)
