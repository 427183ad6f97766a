"""Print the click-probability matrix of the 4-pixel device next to the published one."""
import argparse

import numpy as np

from psnspd import build_p_matrix

ETAS = [0.0248, 0.3565, 0.4862, 0.0566]
PUBLISHED = np.array([
    [1, 0.076, 0.0063, 0.0005, 0, 0, 0, 0, 0, 0],
    [0, 0.924, 0.5067, 0.2602, 0.1354, 0.0716, 0.0383, 0.0207, 0.0113, 0.0062],
    [0, 0, 0.487, 0.6472, 0.6728, 0.6482, 0.6067, 0.5596, 0.514, 0.4712],
    [0, 0, 0, 0.092, 0.1858, 0.2645, 0.3275, 0.3777, 0.4177, 0.4498],
    [0, 0, 0, 0, 0.0058, 0.0157, 0.0281, 0.042, 0.057, 0.0767],
])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--etas", type=float, nargs="+", default=ETAS)
    parser.add_argument("--max-photons", type=int, default=9)
    args = parser.parse_args()

    p = build_p_matrix(args.etas, args.max_photons)
    np.set_printoptions(precision=4, suppress=True, linewidth=160)
    print("model P:")
    print(p.entries)
    if p.shape == PUBLISHED.shape and np.allclose(args.etas, ETAS):
        print("model - published:")
        print(p.entries - PUBLISHED)
        print(f"max abs difference {np.abs(p.entries - PUBLISHED).max():.4f}")


if __name__ == "__main__":
    main()
