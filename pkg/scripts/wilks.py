"""Type-I error of the weighted Wilks test of sigma = lambda on loggamma data."""

import numpy as np

from _common import parser, save, seeds
from genloggamma.experiments import wilks_study


def main():
    p = parser(__doc__, reps=200)
    p.add_argument("--s", type=float, default=0.5, help="common value of sigma and lambda")
    p.add_argument("--methods", default="ML,WL", help="comma separated: ML, WL, oneWL")
    p.add_argument("--alpha", type=float, default=0.05)
    args = p.parse_args()
    methods = tuple(args.methods.split(","))
    res = wilks_study(seeds(args), n=args.n, s=args.s, methods=methods)
    rates = {f"rejection_{m}": float(np.nanmean(res.array(m) < args.alpha)) for m in methods}
    save(args, res, **rates)


if __name__ == "__main__":
    main()
