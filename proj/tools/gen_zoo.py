#!/usr/bin/env python3
# Copyright 2026 The priomap Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates data/zoo.json.

Each network is a hand-written layer list whose channel widths are scaled by a
multiplier. For the four networks with a published isolated GPU throughput the
multiplier is swept until the throughput on data/platform.json matches.
"""

import argparse
import json
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]

CALIBRATION_TARGETS = {
    "inception-resnet-like": 4.0,
    "alexnet-like": 43.0,
    "squeezenet-like": 67.0,
    "resnet50-like": 20.0,
}


class Net:
    def __init__(self, name, mult, in_shape=(1, 3, 224, 224)):
        self.name = name
        self.mult = mult
        self.layers = []
        self.unit_starts = []
        self.cur = list(in_shape)
        self._unit_pending = True

    def ch(self, c):
        return max(1, int(round(c * self.mult)))

    def unit(self):
        self._unit_pending = True
        return self

    def _push(self, ltype, ifm, ofm, w=(0, 0, 0, 0), b=0, a="none", ps=(0, 0, 0, 0, 1, 1)):
        if self._unit_pending:
            self.unit_starts.append(len(self.layers))
            self._unit_pending = False
        self.layers.append({
            "index": len(self.layers), "type": ltype, "ifm": list(ifm), "ofm": list(ofm),
            "w": list(w), "b": b, "a": a, "ps": list(ps),
        })
        return ofm

    def conv(self, out, k, stride=1, pad=None, groups=1, act="relu", src=None, raw_out=False,
             depthwise=False):
        ifm = list(src if src is not None else self.cur)
        pad = k // 2 if pad is None else pad
        out_c = ifm[1] if depthwise else (out if raw_out else self.ch(out))
        h = (ifm[2] + 2 * pad - k) // stride + 1
        w = (ifm[3] + 2 * pad - k) // stride + 1
        ofm = [ifm[0], out_c, h, w]
        in_per_group = 1 if depthwise else max(1, ifm[1] // groups)
        ltype = "depthwise_conv" if depthwise else "conv"
        self.cur = self._push(ltype, ifm, ofm, (out_c, in_per_group, k, k), out_c, act,
                              (pad, pad, pad, pad, stride, stride))
        return self.cur

    def pool(self, k, stride, pad=0, src=None):
        ifm = list(src if src is not None else self.cur)
        h = (ifm[2] + 2 * pad - k) // stride + 1
        w = (ifm[3] + 2 * pad - k) // stride + 1
        self.cur = self._push("pool", ifm, [ifm[0], ifm[1], h, w], ps=(pad, pad, pad, pad, stride, stride))
        return self.cur

    def global_pool(self):
        ifm = list(self.cur)
        self.cur = self._push("pool", ifm, [ifm[0], ifm[1], 1, 1], ps=(0, 0, 0, 0, ifm[2], ifm[3]))
        return self.cur

    def fc(self, out, act="relu", raw_out=False):
        ifm = list(self.cur)
        in_vol = ifm[1] * ifm[2] * ifm[3]
        out_c = out if raw_out else self.ch(out)
        self.cur = self._push("fully_connected", ifm, [ifm[0], out_c, 1, 1], (out_c, in_vol, 1, 1),
                              out_c, act)
        return self.cur

    def concat(self, parts):
        ifm = list(parts[0])
        out_c = sum(p[1] for p in parts)
        self.cur = self._push("concat", ifm, [ifm[0], out_c, ifm[2], ifm[3]])
        return self.cur

    def add(self, other):
        ifm = list(self.cur)
        self.cur = self._push("add", ifm, list(other), a="relu")
        return self.cur

    def to_json(self):
        return {"name": self.name, "partition_units": len(self.unit_starts),
                "unit_starts": self.unit_starts, "layers": self.layers}


def alexnet(m):
    n = Net("alexnet-like", m)
    n.unit().conv(96, 11, stride=4, pad=2); n.pool(3, 2)
    n.unit().conv(256, 5, pad=2); n.pool(3, 2)
    n.unit().conv(384, 3)
    n.unit().conv(384, 3)
    n.unit().conv(256, 3); n.pool(3, 2)
    n.unit().fc(4096)
    n.unit().fc(4096)
    n.unit().fc(1000, act="none", raw_out=True)
    return n


def vgg16(m):
    n = Net("vgg16-like", m)
    for i, (c, reps) in enumerate([(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)]):
        for r in range(reps):
            n.unit().conv(c, 3)
        n.pool(2, 2)
    n.unit().fc(4096)
    n.unit().fc(4096)
    n.unit().fc(1000, act="none", raw_out=True)
    return n


def inception_module(n, b1, b2r, b2, b3r, b3, stride=1):
    x = list(n.cur)
    o1 = n.conv(b1, 1, stride=stride, src=x)
    n.conv(b2r, 1, src=x)
    o2 = n.conv(b2, 3, stride=stride)
    n.conv(b3r, 1, src=x)
    o3 = n.conv(b3, 3, stride=stride)
    return n.concat([o1, o2, o3])


def inception(m):
    n = Net("inception-like", m, (1, 3, 299, 299))
    n.unit().conv(32, 3, stride=2, pad=0); n.conv(32, 3, pad=0)
    n.unit().conv(64, 3); n.pool(3, 2)
    n.unit().conv(80, 1); n.conv(192, 3, pad=0); n.pool(3, 2)
    for _ in range(3):
        n.unit(); inception_module(n, 96, 64, 96, 64, 96)
    n.unit(); inception_module(n, 192, 192, 224, 192, 256, stride=2)
    for _ in range(2):
        n.unit(); inception_module(n, 256, 192, 256, 192, 256)
    n.unit(); inception_module(n, 256, 256, 320, 256, 320, stride=2)
    n.unit(); inception_module(n, 256, 384, 256, 384, 256)
    n.unit().global_pool(); n.fc(1000, act="none", raw_out=True)
    return n


def inception_resnet(m):
    n = Net("inception-resnet-like", m, (1, 3, 299, 299))
    n.unit().conv(32, 3, stride=2, pad=0); n.conv(32, 3, pad=0); n.conv(64, 3); n.pool(3, 2)
    n.unit().conv(80, 1); n.conv(192, 3, pad=0); n.pool(3, 2); n.conv(320, 1)
    for stage, (c, reps) in enumerate([(320, 3), (1088, 3), (2080, 3)]):
        for r in range(reps):
            n.unit()
            x = list(n.cur)
            o1 = n.conv(c // 8, 1, src=x)
            n.conv(c // 8, 1, src=x)
            o2 = n.conv(c // 6, 3)
            n.concat([o1, o2])
            if r == 0 and stage > 0:
                n.conv(c, 3, stride=2, act="none", raw_out=True, src=n.cur)
                shortcut = list(n.cur)
            else:
                n.conv(x[1], 1, act="none", raw_out=True)
                shortcut = x
            n.add(shortcut)
    n.unit().global_pool(); n.fc(1000, act="none", raw_out=True)
    return n


def squeezenet(m):
    n = Net("squeezenet-like", m)
    n.unit().conv(96, 7, stride=2, pad=0); n.pool(3, 2)
    fires = [(16, 64), (16, 64), (32, 128), (32, 128), (48, 192), (48, 192), (64, 256), (64, 256)]
    for i, (s, e) in enumerate(fires):
        n.unit()
        n.conv(s, 1)
        x = list(n.cur)
        o1 = n.conv(e, 1, src=x)
        o2 = n.conv(e, 3, src=x)
        n.concat([o1, o2])
        if i in (2, 6):
            n.pool(3, 2)
    n.unit().conv(1000, 1, raw_out=True); n.global_pool()
    return n


def resnet50(m):
    n = Net("resnet50-like", m)
    n.unit().conv(64, 7, stride=2, pad=3); n.pool(3, 2, pad=1)
    for stage, (c, reps) in enumerate([(64, 3), (128, 4), (256, 6), (512, 3)]):
        for r in range(reps):
            stride = 2 if (r == 0 and stage > 0) else 1
            n.unit()
            n.conv(c, 1)
            n.conv(c, 3, stride=stride)
            n.conv(4 * c, 1, act="relu")
    n.unit().global_pool(); n.fc(1000, act="none", raw_out=True)
    return n


def mobilenet(m):
    n = Net("mobilenet-like", m)
    n.unit().conv(32, 3, stride=2)
    cfg = [(64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2), (512, 1), (512, 1),
           (512, 1), (512, 1), (512, 1), (1024, 2), (1024, 1)]
    for i, (c, s) in enumerate(cfg):
        n.unit().conv(0, 3, stride=s, depthwise=True)
        if i < 5:
            n.unit()
        n.conv(c, 1)
    n.unit().global_pool(); n.fc(1000, act="none", raw_out=True)
    return n


def shufflenet(m):
    n = Net("shufflenet-like", m)
    n.unit().conv(24, 3, stride=2); n.pool(3, 2, pad=1)
    for stage, (c, reps) in enumerate([(240, 4), (480, 8), (960, 4)]):
        for r in range(reps):
            stride = 2 if r == 0 else 1
            n.unit()
            n.conv(c // 4, 1, groups=3)
            n.conv(0, 3, stride=stride, depthwise=True, act="none")
            n.conv(c, 1, groups=3)
    n.unit().global_pool(); n.fc(1000, act="none", raw_out=True)
    return n


def mobilenet_v2(m):
    n = Net("mobilenet-v2-like", m)
    n.unit().conv(32, 3, stride=2)
    cfg = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1),
           (6, 160, 3, 2), (6, 320, 1, 1)]
    for t, c, reps, s in cfg:
        for r in range(reps):
            n.unit()
            n.conv(n.cur[1] * t, 1, raw_out=True)
            n.conv(0, 3, stride=s if r == 0 else 1, depthwise=True)
            n.conv(c, 1, act="none")
    n.unit().conv(1280, 1); n.global_pool(); n.fc(1000, act="none", raw_out=True)
    return n


BUILDERS = [alexnet, vgg16, inception, inception_resnet, squeezenet, resnet50, mobilenet,
            shufflenet, mobilenet_v2]


def macs(l):
    ifm, ofm, w = l["ifm"], l["ofm"], l["w"]
    if l["type"] in ("conv", "depthwise_conv"):
        return ofm[1] * ofm[2] * ofm[3] * w[1] * w[2] * w[3] * ofm[0]
    if l["type"] == "fully_connected":
        return ifm[0] * (ifm[1] * ifm[2] * ifm[3]) * (ofm[1] * ofm[2] * ofm[3])
    return ofm[0] * ofm[1] * ofm[2] * ofm[3]


def ideal(net, platform):
    ref = next(c for c in platform["components"] if c["name"] == platform["reference"])
    t = 0.0
    for l in net.layers:
        t += macs(l) / ref["rates"][l["type"]] + ref["per_layer_overhead"]
    return 1.0 / t


def calibrate(builder, target, platform):
    best = None
    m = 0.2
    while m <= 3.0:
        net = builder(m)
        err = abs(ideal(net, platform) - target) / target
        if best is None or err < best[0]:
            best = (err, m, net)
        m = round(m + 0.0005, 4)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--platform", type=pathlib.Path, default=ROOT / "data" / "platform.json")
    parser.add_argument("--out", type=pathlib.Path, default=ROOT / "data" / "zoo.json")
    args = parser.parse_args()
    platform = json.loads(args.platform.read_text())
    dnns = []
    for builder in BUILDERS:
        name = builder(1.0).name
        if name in CALIBRATION_TARGETS:
            err, m, net = calibrate(builder, CALIBRATION_TARGETS[name], platform)
        else:
            err, m, net = 0.0, 1.0, builder(1.0)
        assert len(net.layers) <= 64, (name, len(net.layers))
        total = sum(macs(l) for l in net.layers)
        print(f"{name:24s} mult={m:.4f} layers={len(net.layers):3d} units={len(net.unit_starts):3d} "
              f"gmacs={total / 1e9:7.3f} t_ideal={ideal(net, platform):8.3f} err={err:.2e}",
              file=sys.stderr)
        dnns.append(net.to_json())
    args.out.write_text(json.dumps({"dnns": dnns}, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
