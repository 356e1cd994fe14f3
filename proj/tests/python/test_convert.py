import os
import pickle
import subprocess
import sys

import numpy as np
import scipy.sparse as sp

import hgx

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def write(path, obj):
    with open(path, "wb") as f:
        pickle.dump(obj, f)


def test_hypergcn_conversion(tmp_path):
    src = tmp_path / "cora"
    (src / "splits").mkdir(parents=True)
    feats = sp.csr_matrix(np.array([[1, 0, 0], [0, 2, 0], [0, 0, 3], [1, 1, 0], [0, 0, 0]], dtype=float))
    write(src / "features.pickle", feats)
    write(src / "labels.pickle", [0, 1, 1, 0, 2])
    write(src / "hypergraph.pickle", {"a": [0, 1, 3], "b": [2, 1]})
    write(src / "splits" / "1.pickle", {"train": [0, 2], "test": [1, 3, 4]})
    out = tmp_path / "cora.json"
    subprocess.run([sys.executable, os.path.join(ROOT, "tools", "convert_hypergcn.py"), str(src), "-o", str(out)],
                   check=True, capture_output=True)
    ds = hgx.load_dataset(str(out))
    assert ds.num_nodes == 5
    assert ds.num_classes == 3
    assert ds.graph.num_edges == 2 + 5
    assert np.array_equal(ds.features, feats.toarray())
    assert ds.train_mask == [0, 2]
    assert ds.test_mask == [1, 3, 4]
    assert ds.graph.is_connected() is False
