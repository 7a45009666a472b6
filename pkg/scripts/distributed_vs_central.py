"""Compare distributed play over a graph with the centralized run on the same game."""

import argparse

import numpy as np

from fplab.algorithms import make_algorithm
from fplab.distributed import CommGraph, distributed_run, error_series
from fplab.engine import run
from fplab.game import load_game


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--game", default="congestion_4p")
    ap.add_argument("--algorithm", default="fp")
    ap.add_argument("--edges", default="ring")
    ap.add_argument("--model", default="static", choices=["static", "iid_drop", "gossip"])
    ap.add_argument("--rho", type=float, default=0.0)
    ap.add_argument("--protocol", default="running_consensus", choices=["running_consensus", "gossip"])
    ap.add_argument("--horizon", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    game = load_game(args.game)
    algo = make_algorithm(args.algorithm, game)
    graph = CommGraph(game.num_players, args.edges, model=args.model, rho=args.rho)
    central = run(algo, game, args.horizon, seed=args.seed, stride=1000)
    dist = distributed_run(algo, game, graph, args.horizon, protocol=args.protocol, seed=args.seed, stride=1000)
    err = error_series(dist)
    for n in np.unique(np.geomspace(1, args.horizon, 9).astype(int)):
        print(f"n={n:>7d} max_est_error={err[n - 1]:.3e}")
    print(f"central gap={central.final_metric('nash_gap'):.4g} distributed gap={dist.final_metric('nash_gap'):.4g}")
    print(f"connectivity violations: {len(dist.info['connectivity_violations'])}")


if __name__ == "__main__":
    main()
