"""Monte Carlo spread of the device matrix, compared with the published sigma_P."""
import argparse
import time

import numpy as np

from psnspd import build_p_matrix, forward_map, matrix_uncertainty, poisson_statistics
from psnspd.uncertainty import PAPER_BUDGET

ETAS = [0.0248, 0.3565, 0.4862, 0.0566]
PUBLISHED_SIGMA = np.array([
    [0, 0.0224, 0.0035, 0.0004, 0, 0, 0, 0, 0, 0],
    [0, 0.0224, 0.0202, 0.0178, 0.0122, 0.0078, 0.0049, 0.003, 0.0018, 0.0011],
    [0, 0, 0.0236, 0.0117, 0.0026, 0.003, 0.0061, 0.0079, 0.0088, 0.0093],
    [0, 0, 0, 0.0067, 0.0091, 0.0095, 0.0092, 0.0085, 0.0077, 0.007],
    [0, 0, 0, 0, 0.0006, 0.0012, 0.0018, 0.0024, 0.0029, 0.0035],
])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mu", type=float, default=0.5)
    parser.add_argument("--sets", type=int, default=200)
    parser.add_argument("--trials", type=int, default=10_000_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    q = forward_map(build_p_matrix(ETAS, 9), poisson_statistics(args.mu, 9))
    t0 = time.perf_counter()
    u = matrix_uncertainty(q, args.mu, n_mc_sets=args.sets, n_trials_per_set=args.trials,
                           budget=PAPER_BUDGET, seed=args.seed, workers=args.workers)
    np.set_printoptions(precision=4, suppress=True, linewidth=160)
    print(f"{u.n_trials} sets ({u.n_discarded} discarded) in {time.perf_counter() - t0:.0f} s")
    print("sigma_P:")
    print(u.sigma_matrix)
    with np.errstate(divide="ignore", invalid="ignore"):
        print("sigma_P / published:")
        print(np.where(PUBLISHED_SIGMA > 0, u.sigma_matrix / PUBLISHED_SIGMA, np.nan))
    print("sorted etas mean :", u.etas_mean)
    print("sorted etas sigma:", u.etas_sigma)


if __name__ == "__main__":
    main()
