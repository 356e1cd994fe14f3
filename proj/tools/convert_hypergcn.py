#!/usr/bin/env python3
"""Convert a HyperGCN-release dataset directory to the hgx dataset JSON format.

The release stores, per dataset directory:
    features.pickle    scipy sparse (n x d)
    labels.pickle      list of class ids (or one-hot rows)
    hypergraph.pickle  dict: key -> list of node ids
    splits/<k>.pickle  dict with "train" and "test" node-id lists

Example:
    python3 tools/convert_hypergcn.py data/coauthorship/cora --split 1 -o cora_split1.json
    hgx train --dataset cora_split1.json --layers 64 --alpha 0.1 --lambda-id 0.5
"""

import argparse
import json
import os
import pickle
import sys


def load(path):
    with open(path, "rb") as f:
        return pickle.load(f)


def to_label_list(raw):
    out = []
    for row in raw:
        if hasattr(row, "__len__") and not isinstance(row, (str, bytes)):
            row = list(row)
            out.append(max(range(len(row)), key=lambda j: row[j]))
        else:
            out.append(int(row))
    return out


def sparse_rows(features):
    csr = features.tocsr()
    rows = []
    for i in range(csr.shape[0]):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        idx = [int(j) for j in csr.indices[lo:hi]]
        val = [float(v) for v in csr.data[lo:hi]]
        order = sorted(range(len(idx)), key=idx.__getitem__)
        rows.append({"idx": [idx[k] for k in order], "val": [val[k] for k in order]})
    return {"dim": int(csr.shape[1]), "rows": rows}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="dataset directory, e.g. data/coauthorship/cora")
    ap.add_argument("--split", type=int, default=1, help="split file number (default 1)")
    ap.add_argument(
        "--self-loops",
        choices=["all", "uncovered", "none"],
        default="all",
        help="singleton hyperedges to add: for every node (default), only for nodes in no hyperedge, or none",
    )
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args(argv)

    features = load(os.path.join(args.source, "features.pickle"))
    labels = to_label_list(load(os.path.join(args.source, "labels.pickle")))
    hypergraph = load(os.path.join(args.source, "hypergraph.pickle"))
    split = load(os.path.join(args.source, "splits", f"{args.split}.pickle"))

    n = features.shape[0]
    if len(labels) != n:
        sys.exit(f"labels: {len(labels)} entries for {n} feature rows")

    edges = []
    for key in sorted(hypergraph, key=str):
        members = sorted({int(v) for v in hypergraph[key]})
        if members:
            edges.append(members)
    covered = {v for e in edges for v in e}
    if args.self_loops == "all":
        edges.extend([v] for v in range(n))
    elif args.self_loops == "uncovered":
        edges.extend([v] for v in range(n) if v not in covered)

    train = sorted({int(v) for v in split["train"]})
    test = sorted({int(v) for v in split["test"]} - set(train))
    doc = {
        "num_nodes": n,
        "num_classes": max(labels) + 1,
        "hyperedges": edges,
        "features": {"sparse": sparse_rows(features)},
        "labels": labels,
        "train_mask": train,
        "test_mask": test,
        "meta": {
            "source": os.path.abspath(args.source),
            "split": str(args.split),
            "self_loops": args.self_loops,
        },
    }
    with open(args.output, "w") as f:
        json.dump(doc, f, separators=(",", ":"), sort_keys=True)
        f.write("\n")
    print(f"wrote {args.output}: {n} nodes, {len(edges)} hyperedges, {len(train)} train, {len(test)} test")


if __name__ == "__main__":
    main()
