"""Empirical coverage of 1SWL Wald intervals on clean LG(0, 1, 0.5) data."""

import numpy as np

from _common import parser, save, seeds
from genloggamma.experiments import coverage_study


def main():
    p = parser(__doc__, reps=200)
    p.add_argument("--level", type=float, default=0.95)
    args = p.parse_args()
    res = coverage_study(seeds(args), n=args.n, conf_level=args.level)
    cov = np.nanmean(res.array("oneWL"), axis=0)
    save(args, res, coverage_mu=float(cov[0]), coverage_sigma=float(cov[1]), coverage_lambda=float(cov[2]))


if __name__ == "__main__":
    main()
