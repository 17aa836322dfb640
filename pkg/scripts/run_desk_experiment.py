"""Run the whole pipeline on synthetic logs over several seeds and summarize accuracy.

    python3 scripts/run_desk_experiment.py --seeds 1 2 3 --language csharp java

Each (language, seed) pair gets its own synthetic log and work directory under
--out. The summary lists held-out accuracy for majority vote, the generative
label model and the trained classifier, plus the classifier's margin over
majority vote.
"""

import argparse
import json
import logging
import time
from pathlib import Path

import numpy as np

from codeintent.pipeline import PipelineConfig, run_all, synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    ap.add_argument("--language", nargs="+", default=["csharp"], choices=["csharp", "java"])
    ap.add_argument("--model", default="cnn", choices=["cnn", "logistic"])
    ap.add_argument("--size", type=int, default=5000)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--out", default="runs/experiment")
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    out = Path(args.out)
    margins = []
    print(f"{'lang':<8}{'seed':>5}{'n':>6}{'MV':>8}{'Gen':>8}{args.model:>10}{'margin':>9}{'secs':>7}")
    for lang in args.language:
        for seed in args.seeds:
            root = out / f"{lang}_seed{seed}"
            cfg = PipelineConfig(workdir=str(root / "work"), logs=str(root / "logs.jsonl"),
                                 truth=str(root / "logs.truth.tsv"), language=lang, k=args.k,
                                 seed=seed, model=args.model, synth_size=args.size)
            t0 = time.perf_counter()
            synthesize(cfg)
            run_all(cfg)
            result = json.loads(cfg.artifact("evaluate").read_text())
            reports = result["reports"]
            clf_name = "CNN" if args.model == "cnn" else "Logistic Regression"
            mv, gen, clf = (reports[k]["accuracy"] for k in ("Majority Vote", "Generative", clf_name))
            margins.append(clf - mv)
            print(f"{lang:<8}{seed:>5}{result['n']:>6}{mv:>8.3f}{gen:>8.3f}{clf:>10.3f}"
                  f"{100 * (clf - mv):>+7.1f}pp{time.perf_counter() - t0:>7.1f}")
    m = np.array(margins)
    print(f"\nclassifier >= majority vote in {(m >= 0).sum()}/{len(m)} runs; "
          f"mean margin {100 * m.mean():+.2f}pp, min {100 * m.min():+.2f}pp")


if __name__ == "__main__":
    main()
