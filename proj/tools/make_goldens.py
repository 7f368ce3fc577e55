#!/usr/bin/env python3
"""Regenerates the reference-tool goldens under tests/fixtures.

Needs sacrebleu and sentencepiece. The outputs are committed; the C++ tests
only read them.
"""
import json
import random
import tempfile
from pathlib import Path

import sacrebleu
import sentencepiece as spm

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "tests" / "fixtures"

WORDS = ("the a of to in and for on with at by from new old city river report team market school "
         "people water train bridge museum author prices budget rain road children weekend friday "
         "quarter meters metres wide long open close travel free policy company revenue billion "
         "committee approved published findings results scientists apples pears oranges mountain "
         "trail repairs flood districts quick brown fox jumps lazy dog cartoon classic e-mail").split()


def bleu_json(result):
    return {
        "score": result.score,
        "precisions": result.precisions,
        "bp": result.bp,
        "sys_len": result.sys_len,
        "ref_len": result.ref_len,
        "counts": result.counts,
        "totals": result.totals,
    }


def main():
    hyps = (FIX / "bleu" / "hyp.txt").read_text(encoding="utf-8").splitlines()
    refs = (FIX / "bleu" / "ref.txt").read_text(encoding="utf-8").splitlines()

    golden = {
        "tool": f"sacrebleu {sacrebleu.__version__}",
        "exp": bleu_json(sacrebleu.corpus_bleu(hyps, [refs])),
        "none": bleu_json(sacrebleu.corpus_bleu(hyps, [refs], smooth_method="none")),
    }
    (FIX / "bleu" / "golden_13a.json").write_text(json.dumps(golden, indent=2) + "\n")

    rng = random.Random(7)
    lines = hyps + refs
    for _ in range(2000):
        n = rng.randint(4, 14)
        lines.append(" ".join(rng.choice(WORDS) for _ in range(n)).capitalize() + ".")
    with tempfile.TemporaryDirectory() as tmp:
        corpus = Path(tmp) / "corpus.txt"
        corpus.write_text("\n".join(lines) + "\n", encoding="utf-8")
        prefix = str(Path(tmp) / "m")
        spm.SentencePieceTrainer.train(
            input=str(corpus), model_prefix=prefix, vocab_size=300, model_type="unigram",
            character_coverage=1.0, normalization_rule_name="identity", byte_fallback=False,
            num_threads=1, minloglevel=2)
        sp = spm.SentencePieceProcessor(model_file=prefix + ".model")

    rows = []
    for i in range(sp.get_piece_size()):
        if sp.is_control(i) or sp.is_unknown(i):
            continue
        rows.append(f"{sp.id_to_piece(i)}\t{sp.get_score(i)!r}")
    (FIX / "spm" / "pieces.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    seg_h = [" ".join(sp.encode(h, out_type=str)) for h in hyps]
    seg_r = [" ".join(sp.encode(r, out_type=str)) for r in refs]
    segs = [{"text": t, "pieces": sp.encode(t, out_type=str)} for t in hyps + refs]
    (FIX / "spm" / "segmentations.jsonl").write_text(
        "".join(json.dumps(s, ensure_ascii=False) + "\n" for s in segs), encoding="utf-8")
    spbleu = {
        "tool": f"sacrebleu {sacrebleu.__version__} tokenize=none over sentencepiece {spm.__version__} pieces",
        "exp": bleu_json(sacrebleu.corpus_bleu(seg_h, [seg_r], tokenize="none")),
    }
    (FIX / "spm" / "golden_spbleu.json").write_text(json.dumps(spbleu, indent=2) + "\n")


if __name__ == "__main__":
    main()
