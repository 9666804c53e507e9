"""Dense feature exporter interface.

Writes DFA1 archives, PGM label maps and a JSON manifest in the layout read by
the C++ core (see include/corrdistill/tensorio.hpp). Only the interface lives
here; backbone inference is not implemented.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

ModelName = Literal["dino-vit-s", "dino-vit-b", "mocov2", "resnet50"]


@dataclass(frozen=True)
class ExportSpec:
    model: ModelName
    out_dir: Path
    # Minor-axis resize: 224 for training features, 320 for evaluation.
    minor_axis: int = 224
    center_crop: bool = True
    # Final-layer spatial tokens by default; attention q/k/v are weaker.
    layer: str = "final"
    five_crop: bool = False
    # Order of five-crop and resize when both apply.
    crop_then_resize: bool = True


@dataclass
class ExportError:
    path: Path
    message: str


def export_features(image_dir: Path, spec: ExportSpec, label_dir: Path | None = None) -> list[ExportError]:
    """Export one feature archive per image (or per crop) plus manifest.json.

    Inference runs in deterministic mode so repeated exports are bitwise equal.
    Labels are downsampled to the feature grid by nearest neighbour. Per-file
    failures are collected and returned; the run continues past them.
    """
    raise NotImplementedError("feature export requires a pretrained backbone")


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="featx")
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--labels", type=Path)
    p.add_argument("--model", choices=["dino-vit-s", "dino-vit-b", "mocov2", "resnet50"], default="dino-vit-s")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--minor-axis", type=int, default=224)
    p.add_argument("--no-center-crop", action="store_true")
    p.add_argument("--layer", default="final")
    p.add_argument("--five-crop", action="store_true")
    p.add_argument("--resize-then-crop", action="store_true")
    a = p.parse_args(argv)
    spec = ExportSpec(a.model, a.out, a.minor_axis, not a.no_center_crop, a.layer, a.five_crop, not a.resize_then_crop)
    errors = export_features(a.images, spec, a.labels)
    for e in errors:
        print(f"{e.path}: {e.message}")
    return 1 if errors else 0


if __name__ == "__main__":
    raise SystemExit(main())
