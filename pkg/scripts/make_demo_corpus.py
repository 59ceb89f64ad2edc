#!/usr/bin/env python3
"""Write a self-contained demo workspace: catalog JSON plus example LDraw
structures, ready for the brickir CLI.

    python scripts/make_demo_corpus.py --out demo
    brickir --catalog demo/catalog.json graph demo/structures/stack4.ldr
"""

import argparse
from pathlib import Path

from brickir.demo import DEMO_STRUCTURES, build_demo_catalog


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo", help="output directory")
    args = ap.parse_args()

    out = Path(args.out)
    (out / "structures").mkdir(parents=True, exist_ok=True)
    catalog = build_demo_catalog()
    (out / "catalog.json").write_text(catalog.dumps())
    for name, text in DEMO_STRUCTURES.items():
        suffix = "mpd" if name.startswith("mpd") else "ldr"
        (out / "structures" / f"{name}.{suffix}").write_text(text)

    print(f"wrote {out / 'catalog.json'} ({len(catalog)} parts)")
    for f in sorted((out / "structures").iterdir()):
        print(f"wrote {f}")
    print("\ntry:")
    print(f"  brickir --catalog {out}/catalog.json graph {out}/structures/stack4.ldr")
    print(f"  brickir --catalog {out}/catalog.json --seed 7 serialize {out}/structures/mixed.ldr")


if __name__ == "__main__":
    main()
