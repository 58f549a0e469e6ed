"""Sampling variance of mu-hat for 1SWL and FIWL relative to ML on clean normal data."""

import numpy as np

from _common import parser, save, seeds
from genloggamma.experiments import efficiency_study


def main():
    args = parser(__doc__, reps=100).parse_args()
    res = efficiency_study(seeds(args), n=args.n)
    v = {m: float(np.var(res.array(m)[:, 0], ddof=1)) for m in ("oneWL", "WL", "ML")}
    save(
        args,
        res,
        var_ratio_oneWL=v["oneWL"] / v["ML"],
        var_ratio_WL=v["WL"] / v["ML"],
        mean_WL_weight=float(np.mean(res.extra["wl_mean_weight"])),
    )


if __name__ == "__main__":
    main()
