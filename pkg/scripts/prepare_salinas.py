#!/usr/bin/env python3
"""Offline conversion of the Salinas A benchmark to the native flat-binary
format.

The scene is commonly distributed as MATLAB files (``SalinasA_corrected.mat``
with the 83x86x204 reflectance cube and ``SalinasA_gt.mat`` with the
ground-truth map).  This script writes ``salinasA.raw``/``salinasA_gt.raw``
plus their ``.hdr`` sidecars into an output directory, remapping the six
ground-truth classes to 1..6 in ascending original-id order:

    original id  ->  class   crop
    1            ->  1       brocoli green weeds 1
    10           ->  2       corn senesced green weeds
    11           ->  3       lettuce romaine, 4 weeks
    12           ->  4       lettuce romaine, 5 weeks
    13           ->  5       lettuce romaine, 6 weeks
    14           ->  6       lettuce romaine, 7 weeks

The benchmark's romaine region with high intra-class variability is the
oldest lettuce class, i.e. class 6 after remapping (override the acceptance
suite's ADVIS_SALINAS_ROMAINE if you renumber differently).

Usage:
    python3 scripts/prepare_salinas.py SalinasA_corrected.mat SalinasA_gt.mat \
        --out data/salinasA
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from advis.hsi import HsiCube, LabelMap, save_cube, save_labels  # noqa: E402


def load_mat_array(path: Path) -> np.ndarray:
    from scipy.io import loadmat

    payload = loadmat(path)
    arrays = [v for k, v in payload.items() if not k.startswith("__")]
    if len(arrays) != 1:
        raise SystemExit(f"{path} holds {len(arrays)} arrays; expected 1")
    return np.asarray(arrays[0])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("cube_mat", type=Path)
    parser.add_argument("gt_mat", type=Path)
    parser.add_argument("--out", type=Path, default=Path("data/salinasA"))
    args = parser.parse_args()

    cube_data = load_mat_array(args.cube_mat).astype(np.float64)
    gt = load_mat_array(args.gt_mat).astype(np.int64)
    if cube_data.ndim != 3:
        raise SystemExit(f"cube array is {cube_data.ndim}-D, expected 3-D")
    if gt.shape != cube_data.shape[:2]:
        raise SystemExit(f"ground truth {gt.shape} does not match cube "
                         f"{cube_data.shape[:2]}")

    original_ids = sorted(int(v) for v in np.unique(gt) if v != 0)
    print(f"cube: {cube_data.shape}, classes: {original_ids}")
    remapped = np.zeros_like(gt, dtype=np.int32)
    for new_id, old_id in enumerate(original_ids, start=1):
        remapped[gt == old_id] = new_id

    args.out.mkdir(parents=True, exist_ok=True)
    rows, cols, bands = cube_data.shape
    save_cube(args.out / "salinasA.raw",
              HsiCube(rows=rows, cols=cols, bands=bands, data=cube_data))
    save_labels(args.out / "salinasA_gt.raw",
                LabelMap(labels=remapped, n_classes=len(original_ids)))
    labeled = int((remapped > 0).sum())
    print(f"wrote {args.out}/salinasA.raw and salinasA_gt.raw "
          f"({labeled} labeled pixels)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
