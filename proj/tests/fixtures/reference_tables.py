#!/usr/bin/env python3
# Writes the reference result tables as MetricTable JSON fixtures.
import json
import pathlib

DATASETS = ["ChestXray-14", "SLIVER07", "MSD", "ACDC"]
AUGS = ["None", "ADA", "APA", "DiffAug"]
IMAGENET = ["imagenet-inceptionv3", "imagenet-resnet50", "imagenet-irv2",
            "imagenet-densenet121", "imagenet-swav", "imagenet-dino", "imagenet-swin"]
RADIMAGENET = ["radimagenet-inceptionv3", "radimagenet-resnet50",
               "radimagenet-irv2", "radimagenet-densenet121"]

RFD_IMAGENET = {
    "ChestXray-14": [[12.53, 279.00, 701.00, 20.80, 53.50, 60.43, 34.00],
                     [8.90, 237.00, 576.00, 15.55, 33.00, 37.81, 26.36],
                     [17.58, 334.00, 1004.50, 39.85, 66.00, 82.23, 54.21],
                     [7.68, 146.00, 441.00, 13.25, 25.00, 34.51, 22.79]],
    "SLIVER07": [[1.48, 7.90, 12.98, 2.59, 8.28, 6.12, 6.07],
                 [1.24, 7.35, 11.71, 1.95, 6.86, 4.57, 6.22],
                 [1.37, 7.33, 11.96, 2.36, 7.79, 5.59, 5.43],
                 [0.78, 3.25, 5.99, 1.24, 5.26, 3.07, 4.77]],
    "MSD": [[37.32, 63.13, 61.18, 170.38, 142.50, 108.39, 504.47],
            [36.84, 62.50, 58.88, 141.63, 305.00, 121.90, 308.59],
            [43.63, 70.00, 81.76, 145.13, 122.50, 126.47, 196.65],
            [46.32, 125.50, 79.88, 170.38, 825.00, 138.11, 175.12]],
    "ACDC": [[49.67, 86.48, 121.14, 87.46, 118.00, 140.15, 111.07],
             [20.99, 31.66, 49.94, 35.95, 76.40, 65.52, 61.49],
             [31.15, 54.35, 76.47, 56.68, 90.60, 87.69, 72.10],
             [15.87, 23.58, 40.60, 27.20, 71.00, 50.47, 47.23]],
}
RFD_RADIMAGENET = {
    "ChestXray-14": [[140.00, 75.00, 80.00, 40.00],
                     [660.00, 135.00, 190.00, 80.00],
                     [280.00, 65.00, 80.00, 80.00],
                     [280.00, 50.00, 90.00, 30.00]],
    "SLIVER07": [[3.67, 3.14, 6.00, 4.33],
                 [1.89, 1.86, 3.75, 2.33],
                 [2.22, 1.86, 3.00, 2.67],
                 [4.67, 3.29, 5.50, 4.67]],
    "MSD": [[53.00, 32.50, 32.50, 40.00],
            [36.00, 27.5, 37.50, 60.00],
            [54.00, 32.50, 40.00, 40.00],
            [1551.00, 1105.00, 350.00, 615.00]],
    "ACDC": [[26.64, 19.00, 20.33, 32.50],
             [10.18, 9.25, 9.67, 13.00],
             [14.09, 8.75, 11.67, 17.50],
             [12.09, 15.25, 9.67, 10.50]],
}
FD_IMAGENET = {
    "ChestXray-14": [[5.01, 4.16, 2.79, 14.02, 1.07, 299.13, 4.76],
                     [3.56, 3.11, 2.37, 11.52, 0.66, 187.16, 3.69],
                     [7.03, 7.97, 3.34, 20.09, 1.32, 407.05, 7.49],
                     [3.07, 2.65, 1.46, 8.82, 0.50, 170.84, 3.19]],
    "SLIVER07": [[8.72, 9.04, 4.74, 14.02, 2.40, 640.32, 30.37],
                 [7.34, 6.79, 4.41, 12.65, 1.99, 478.61, 31.09],
                 [8.07, 8.22, 4.40, 12.92, 2.26, 585.60, 27.17],
                 [4.62, 4.33, 1.95, 6.47, 1.53, 321.32, 23.83]],
    "MSD": [[7.09, 5.05, 10.40, 9.43, 0.57, 422.74, 85.76],
            [7.00, 5.00, 10.01, 11.33, 1.22, 475.41, 52.46],
            [8.29, 5.60, 13.90, 11.61, 0.49, 493.23, 33.43],
            [8.80, 10.04, 13.58, 13.63, 3.30, 538.61, 29.77]],
    "ACDC": [[67.05, 51.60, 73.51, 87.22, 5.90, 2888.53, 127.74],
             [28.34, 21.21, 26.91, 35.96, 3.82, 1350.34, 70.71],
             [42.05, 33.44, 46.20, 55.06, 4.53, 1807.38, 82.91],
             [21.42, 16.05, 20.04, 29.23, 3.55, 1040.24, 54.31]],
}
FD_RADIMAGENET = {
    "ChestXray-14": [[0.03, 0.15, 0.08, 0.04],
                     [0.13, 0.27, 0.19, 0.08],
                     [0.06, 0.13, 0.08, 0.08],
                     [0.06, 0.10, 0.09, 0.03]],
    "SLIVER07": [[0.07, 0.22, 0.24, 0.13],
                 [0.03, 0.13, 0.15, 0.07],
                 [0.04, 0.13, 0.12, 0.08],
                 [0.08, 0.23, 0.22, 0.14]],
    "MSD": [[0.05, 0.13, 0.13, 0.08],
            [0.04, 0.11, 0.15, 0.13],
            [0.05, 0.13, 0.16, 0.08],
            [1.55, 4.42, 1.40, 1.23]],
    "ACDC": [[0.29, 0.76, 0.61, 0.65],
             [0.11, 0.37, 0.29, 0.26],
             [0.15, 0.35, 0.35, 0.35],
             [0.13, 0.61, 0.29, 0.21]],
}
# Human-judgment table: FPR, FNR, group t-test p, Likert diff, KS p.
# "p<.001" is stored as 0.001 and "p>.999" as 0.999 (printed bounds).
HUMAN = {
    "ChestXray-14": [[48, 58, .497, 0.12, .869], [32, 47, .340, 0.28, .549],
                     [34, 56, .082, 0.24, .717], [48, 58, .616, -0.16, .967]],
    "SLIVER07": [[20, 34, .424, 0.68, .001], [24, 30, .748, 0.52, .001],
                 [10, 28, .232, 0.82, .001], [34, 30, .825, 0.22, .717]],
    "MSD": [[58, 48, .543, 0.08, .999], [66, 48, .217, -0.04, .999],
            [46, 38, .587, 0.04, .999], [50, 54, .812, -0.08, .999]],
    "ACDC": [[34, 22, .470, 0.52, .022], [38, 30, .653, 0.38, .112],
             [28, 22, .707, 0.46, .003], [44, 16, .015, 0.28, .112]],
}
HUMAN_STATS = ["fpr", "fnr", "t_test_p", "likert_diff", "ks_p"]


def table(prefix, extractors, data):
    cells = []
    for ds in DATASETS:
        for ai, aug in enumerate(AUGS):
            for ei, ex in enumerate(extractors):
                cells.append({"dataset": ds, "augmentation": aug,
                              "metric": f"{prefix}:{ex}", "value": data[ds][ai][ei]})
    return {"schema_version": 1,
            "directions": {f"{prefix}:{ex}": "lower-better" for ex in extractors},
            "cells": cells}


def main():
    here = pathlib.Path(__file__).resolve().parent
    out = {
        "rfd_imagenet.json": table("rfd", IMAGENET, RFD_IMAGENET),
        "rfd_radimagenet.json": table("rfd", RADIMAGENET, RFD_RADIMAGENET),
        "fd_imagenet.json": table("fd", IMAGENET, FD_IMAGENET),
        "fd_radimagenet.json": table("fd", RADIMAGENET, FD_RADIMAGENET),
    }
    for name, doc in out.items():
        (here / name).write_text(json.dumps(doc, indent=1) + "\n")
    with open(here / "human_vtt.csv", "w") as f:
        f.write("dataset,augmentation,statistic_name,value\n")
        for ds in DATASETS:
            for ai, aug in enumerate(AUGS):
                for si, s in enumerate(HUMAN_STATS):
                    f.write(f"{ds},{aug},{s},{HUMAN[ds][ai][si]}\n")


if __name__ == "__main__":
    main()
