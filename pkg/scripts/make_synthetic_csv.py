"""Write a CDC-shaped synthetic CSV with a 0/1/2 Diabetes_012 target.

Useful for smoke-testing the CLI when the real survey file is not at hand.

    python3 scripts/make_synthetic_csv.py --rows 253680 --out /tmp/cdc_like.csv
"""

import argparse

from tailsel.synthetic import cdc_like_frame


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    cdc_like_frame(args.rows, seed=args.seed).to_csv(args.out, index=False)
    print(f"wrote {args.rows} rows to {args.out}")


if __name__ == "__main__":
    main()
