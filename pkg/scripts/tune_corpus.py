"""Quick pilot runs for simulator tuning: prints per-model per_error on a
couple of CV rounds so corpus changes can be judged without a full run."""

import argparse
import time

from readmeter.estimators import EstimatorKind
from readmeter.evaluate import mean_metric
from readmeter.nnet import TrainConfig
from readmeter.pipeline import run_experiment
from readmeter.simulate import default_sim_config, generate_corpus, mixed_mouse_sim_config


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--rounds", type=int, default=3)
    parser.add_argument("--preset", choices=["default", "mixed-mouse"], default="default")
    parser.add_argument("--kinds", default="baseline1,baseline2,baseline3,logistic,nn,pattern-nn,pattern-sessional-nn")
    args = parser.parse_args()

    config = (default_sim_config if args.preset == "default" else mixed_mouse_sim_config)(seed=args.seed)
    corpus = generate_corpus(config)
    kinds = [EstimatorKind(k) for k in args.kinds.split(",")]
    t0 = time.time()
    result = run_experiment(corpus, kinds, n_rounds=args.rounds, seed=11, base_config=TrainConfig())
    print(f"{args.rounds} rounds in {time.time() - t0:.0f}s")
    for kind in result.kinds:
        reports = result.per_round[kind]
        pe = mean_metric(reports, "per_error")
        ab = mean_metric(reports, "abs_error")
        acc = mean_metric(reports, "accuracy")
        pe_s = f"{100 * pe:6.1f}%" if pe is not None else "     \\"
        ab_s = f"{ab:5.2f}s" if ab is not None else "    \\"
        print(f"{kind:22s} per_error={pe_s} abs={ab_s} acc={100 * acc:5.1f}%")


if __name__ == "__main__":
    main()
