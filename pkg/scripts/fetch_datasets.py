"""Convert downloaded benchmark files into dataset directories.

The test suite never touches the network. Fetch the raw files yourself and
point this script at them; it writes ``<out>/<name>/{graph.edges,
features.csv,labels.csv}`` and prints the statistics next to the published
ones. Point ``DGNN_DATA`` at ``<out>`` afterwards.

Raw layouts understood:

cora
    ``cora.content`` and ``cora.cites`` from the LINQS release (``cora.tgz``).
citeseer
    the Planetoid split files ``ind.citeseer.{x,y,tx,ty,allx,ally,graph,test.index}``.
chameleon, squirrel
    ``out1_node_feature_label.txt`` and ``out1_graph_edges.txt`` from the
    web-page benchmark release.

Usage::

    python scripts/fetch_datasets.py cora --raw ~/Downloads/cora --out data
    python scripts/fetch_datasets.py chameleon --raw ~/Downloads/chameleon --out data
"""

import argparse
import sys
from pathlib import Path

from dgnn import datasets


def convert(name, raw, out):
    raw = Path(raw)
    if name == "cora":
        datasets.convert_linqs(raw / "cora.content", raw / "cora.cites", out)
    elif name == "citeseer":
        datasets.convert_planetoid(raw, "citeseer", out)
    elif name in ("chameleon", "squirrel"):
        datasets.convert_geom_gcn(raw / "out1_node_feature_label.txt", raw / "out1_graph_edges.txt", out)
    else:
        raise SystemExit(f"no converter for {name!r}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("name", choices=["cora", "citeseer", "chameleon", "squirrel"])
    ap.add_argument("--raw", required=True, help="directory holding the downloaded files")
    ap.add_argument("--out", default="data")
    args = ap.parse_args(argv)

    target = Path(args.out) / args.name
    convert(args.name, args.raw, target)
    stats = datasets.dataset_stats(datasets.load_dataset(target))
    mismatches = datasets.compare_to_profile(stats, datasets.PROFILES[args.name])
    print(f"{target}: {stats}")
    for field, expected, found in mismatches:
        print(f"  {field}: expected {expected}, found {found}")
    return 2 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
