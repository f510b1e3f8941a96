"""Exact norms of the uniform-categorical PMD against the Richmond-Shallit asymptotic."""
import argparse

from disttest.pmd import hard_instance, norms_for_lb, richmond_shallit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--n", type=int, nargs="+", default=[10, 25, 50, 100, 200])
    args = ap.parse_args()
    print("k,n,l2_sq,two_thirds_norm,richmond_shallit,ratio")
    for k in args.k:
        for n in args.n:
            l2, tt = norms_for_lb(hard_instance(n, k))
            rs = richmond_shallit(n, k)
            print(f"{k},{n},{l2!r},{tt!r},{rs!r},{l2 / rs:.6f}")


if __name__ == "__main__":
    main()
