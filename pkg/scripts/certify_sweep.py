"""eps -> delta certification table for a game on a profile grid or random states."""

import argparse

from fplab.algorithms import make_algorithm
from fplab.diagnostics import CERTIFY_COLUMNS, certificate_rows, certify_sweep, profile_grid, random_states
from fplab.game import load_game


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--game", default="matching_pennies")
    ap.add_argument("--algorithm", default="fp")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.1, 0.02, 0.0])
    ap.add_argument("--grid", type=int, nargs="+", help="points per player (two-action games)")
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    game = load_game(args.game)
    algo = make_algorithm(args.algorithm, game)
    if args.grid:
        z = profile_grid(game.action_counts, args.grid)
    else:
        z = random_states(algo, args.samples, seed=args.seed)
    certs = certify_sweep(game, algo, args.eps, z, seed=args.seed)
    print("\t".join(CERTIFY_COLUMNS))
    for row in certificate_rows(certs):
        print("\t".join(row))


if __name__ == "__main__":
    main()
