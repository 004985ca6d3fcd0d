#!/usr/bin/env python3
"""Generate the synthetic ResNet-50 timing profile.

Candidate split points are the stem convolution and each of the 16 bottleneck
blocks (17 points); the final point also carries the FC classifier. Per-point
times are FLOPs divided by a constant device / ES throughput, which keeps the
profile internally consistent with the FLOPs-based energy model.
"""

import argparse
import json


def conv(cin, cout, k, h, w=None):
    return {"kind": "conv", "in_channels": cin, "out_channels": cout,
            "kernel": k, "out_height": h, "out_width": w if w else h}


def fc(din, dout):
    return {"kind": "fc", "in_dim": din, "out_dim": dout}


def flops(layer):
    if layer["kind"] == "conv":
        return (layer["in_channels"] * layer["out_channels"] * layer["kernel"] ** 2
                * layer["out_height"] * layer["out_width"])
    return layer["in_dim"] * layer["out_dim"]


def resnet50_points(num_classes):
    points = [{"name": "conv1", "output": [64, 56, 56],
               "layers": [conv(3, 64, 7, 112)]}]
    stages = [(64, 256, 3, 56), (128, 512, 4, 28), (256, 1024, 6, 14),
              (512, 2048, 3, 7)]
    in_ch, in_hw = 64, 56
    for si, (width, out_ch, blocks, hw) in enumerate(stages):
        for b in range(blocks):
            layers = [conv(in_ch, width, 1, in_hw), conv(width, width, 3, hw),
                      conv(width, out_ch, 1, hw)]
            if b == 0:
                layers.append(conv(in_ch, out_ch, 1, hw))
            points.append({"name": f"layer{si + 1}.{b}",
                           "output": [out_ch, hw, hw], "layers": layers})
            in_ch, in_hw = out_ch, hw
    points[-1]["layers"].append(fc(2048, num_classes))
    return points


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--device-macs-per-s", type=float, default=4.5e9)
    ap.add_argument("--es-total-s", type=float, default=2.0e-3)
    ap.add_argument("--flops-per-joule", type=float, default=2.0e9)
    ap.add_argument("--classes", type=int, default=101)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    points = resnet50_points(args.classes)
    total = sum(flops(l) for p in points for l in p["layers"])
    es_rate = total / args.es_total_s
    for i, p in enumerate(points, start=1):
        f = sum(flops(l) for l in p["layers"])
        p["index"] = i
        p["flops"] = f
        p["device_s"] = round(f / args.device_macs_per_s, 9)
        p["es_s"] = round(f / es_rate, 9)

    doc = {
        "schema_version": 1,
        "provenance": "synthetic",
        "model": "resnet50",
        "notes": [
            "Per-point times are FLOPs divided by a constant throughput; not measured.",
            f"device throughput {args.device_macs_per_s:g} FLOP/s, ES full-model time {args.es_total_s:g} s",
            "FLOPs follow C_in*C_out*k^2*H*W for conv and D_in*D_out for fc.",
        ],
        "flops_per_watt_second": args.flops_per_joule,
        "points": [{k: p[k] for k in ("index", "name", "output", "flops",
                                      "device_s", "es_s", "layers")}
                   for p in points],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
