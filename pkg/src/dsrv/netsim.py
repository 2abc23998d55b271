"""Deterministic lockstep network with per-pair delay models.

Delays are a function of (source, destination, send tick).  The arrival
time on a link is the running maximum of ``t + delay(t)`` over send ticks,
which keeps every link FIFO and makes the arrival function monotone, so it
is well defined for analysis even at ticks where nothing was sent.
"""

from __future__ import annotations

import csv
import json
import random
from collections import defaultdict
from dataclasses import dataclass, field

RESP, REQ, CONFIRM = "resp", "req", "confirm"
KINDS = ("constant", "constantPeak", "normal", "normalPeak")


@dataclass(frozen=True, slots=True)
class Message:
    type: str
    stream: object  # InstantVariable
    src: str
    dst: str
    value: object = None
    upTo: int | None = None
    sentAt: int = -1
    arrivesAt: int = -1
    seq: int = -1


@dataclass(frozen=True)
class DelayKind:
    kind: str
    d: int = 1
    base: int = 1
    peakStart: int = 0
    peakHeight: int = 0
    recoverySlope: int = 1
    mean: float = 1.0
    stddev: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if self.kind == "constant" and self.d < 1:
            raise ValueError("constant delay must be at least 1")
        if self.kind == "constantPeak" and self.base < 1:
            raise ValueError("base delay must be at least 1")
        if self.recoverySlope < 1 and self.kind in ("constantPeak", "normalPeak"):
            raise ValueError("recovery slope must be at least 1")

    def peak_extra(self, t: int) -> int:
        if t < self.peakStart:
            return 0
        return max(0, self.peakHeight - self.recoverySlope * (t - self.peakStart))


@dataclass
class DelayModel:
    default: DelayKind
    perPair: dict = field(default_factory=dict)  # (src, dst) -> DelayKind

    def kind_for(self, src, dst) -> DelayKind:
        return self.perPair.get((src, dst), self.default)

    def is_constant(self) -> bool:
        kinds = [self.default, *self.perPair.values()]
        ds = {k.d for k in kinds}
        return all(k.kind == "constant" for k in kinds) and len(ds) == 1


def constant(d: int) -> DelayModel:
    return DelayModel(DelayKind("constant", d=d))


def constant_peak(base, peakStart, peakHeight, recoverySlope=1) -> DelayModel:
    return DelayModel(DelayKind("constantPeak", base=base, peakStart=peakStart,
                                peakHeight=peakHeight, recoverySlope=recoverySlope))


def normal(mean, stddev, seed=0) -> DelayModel:
    return DelayModel(DelayKind("normal", mean=mean, stddev=stddev, seed=seed))


def normal_peak(mean, stddev, seed, peakStart, peakHeight, recoverySlope=1) -> DelayModel:
    return DelayModel(DelayKind("normalPeak", mean=mean, stddev=stddev, seed=seed, peakStart=peakStart,
                                peakHeight=peakHeight, recoverySlope=recoverySlope))


_FIELDS = ("d", "base", "peakStart", "peakHeight", "recoverySlope", "mean", "stddev", "seed")
_INT_FIELDS = {"d", "base", "peakStart", "peakHeight", "recoverySlope", "seed"}


def kind_from_dict(cfg: dict) -> DelayKind:
    unknown = set(cfg) - set(_FIELDS) - {"kind", "perPair"}
    if unknown:
        raise ValueError(f"unknown delay parameters {sorted(unknown)}")
    params = {k: (int(v) if k in _INT_FIELDS else float(v)) for k, v in cfg.items() if k in _FIELDS}
    if cfg.get("kind") == "normalPeak" and "base" in params:
        del params["base"]
    return DelayKind(cfg["kind"], **params)


def model_from_dict(cfg: dict) -> DelayModel:
    """Build a model from ``{"kind": ..., params..., "perPair": {"a->b": {...}}}``."""
    per_pair = {}
    for key, sub in (cfg.get("perPair") or {}).items():
        src, dst = (part.strip() for part in key.split("->"))
        per_pair[(src, dst)] = kind_from_dict(sub)
    return DelayModel(kind_from_dict(cfg), per_pair)


def model_to_dict(model: DelayModel) -> dict:
    def one(k: DelayKind):
        keep = {
            "constant": ("d",),
            "constantPeak": ("base", "peakStart", "peakHeight", "recoverySlope"),
            "normal": ("mean", "stddev", "seed"),
            "normalPeak": ("mean", "stddev", "seed", "peakStart", "peakHeight", "recoverySlope"),
        }[k.kind]
        return {"kind": k.kind, **{f: getattr(k, f) for f in keep}}

    out = one(model.default)
    if model.perPair:
        out["perPair"] = {f"{a}->{b}": one(k) for (a, b), k in sorted(model.perPair.items())}
    return out


def parse_delay_arg(text: str) -> DelayModel:
    """``kind:key=value,...`` inline form, or a path to a JSON file."""
    if ":" in text and text.split(":", 1)[0] in KINDS:
        kind, _, rest = text.partition(":")
        cfg = {"kind": kind}
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            cfg[key.strip()] = value.strip()
        return model_from_dict(cfg)
    if text in KINDS:
        return model_from_dict({"kind": text})
    with open(text, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


class _LinkSampler:
    """Raw per-tick delays of one directed link."""

    def __init__(self, kind: DelayKind, src, dst):
        self.kind = kind
        self.rng = random.Random(f"{kind.seed}:{src}->{dst}")
        self.samples = []

    def delay(self, t: int) -> int:
        k = self.kind
        if k.kind == "constant":
            return k.d
        if k.kind == "constantPeak":
            return k.base + k.peak_extra(t)
        while len(self.samples) <= t:
            self.samples.append(max(1, round(self.rng.gauss(k.mean, k.stddev))))
        base = self.samples[t]
        return base + k.peak_extra(t) if k.kind == "normalPeak" else base


class DelayTrace:
    """Effective per-link delays as a function of send tick.

    ``arrival(src, dst, t)`` is defined for every tick and is monotone in t.
    """

    def __init__(self, model: DelayModel):
        self.model = model
        self._samplers = {}
        self._arrivals = {}

    def raw_delay(self, src, dst, t: int) -> int:
        if src == dst:
            return 1
        key = (src, dst)
        s = self._samplers.get(key)
        if s is None:
            s = self._samplers[key] = _LinkSampler(self.model.kind_for(src, dst), src, dst)
        return s.delay(t)

    def arrival(self, src, dst, t: int) -> int:
        if src == dst:
            return t + 1
        arr = self._arrivals.get((src, dst))
        if arr is None:
            arr = self._arrivals[(src, dst)] = []
        while len(arr) <= t:
            k = len(arr)
            a = k + self.raw_delay(src, dst, k)
            arr.append(max(a, arr[-1]) if arr else a)
        return arr[t]

    def delay(self, src, dst, t: int) -> int:
        return self.arrival(src, dst, t) - t

    def max_delay(self, pairs, start: int, stop: int) -> int:
        """Largest effective delay on ``pairs`` for send ticks in [start, stop]."""
        best = 0
        for a, b in pairs:
            for t in range(max(0, start), stop + 1):
                d = self.arrival(a, b, t) - t
                if d > best:
                    best = d
        return best


class Network:
    """In-flight messages between monitors, delivered at the start of a tick."""

    def __init__(self, model: DelayModel):
        self.model = model
        self.trace = DelayTrace(model)
        self._inflight = defaultdict(list)  # arrival tick -> messages
        self._seq = 0
        self.in_flight = 0
        self.sent = []  # every message, in send order
        self._max_delay = 0

    def send(self, m: Message, now: int) -> Message:
        arrives = self.trace.arrival(m.src, m.dst, now)
        out = Message(m.type, m.stream, m.src, m.dst, m.value, m.upTo, now, arrives, self._seq)
        self._seq += 1
        self._inflight[arrives].append(out)
        self.in_flight += 1
        self.sent.append(out)
        self._max_delay = max(self._max_delay, arrives - now)
        return out

    def deliver(self, now: int) -> dict:
        batch = self._inflight.pop(now, None)
        if not batch:
            return {}
        self.in_flight -= len(batch)
        out = defaultdict(list)
        for m in sorted(batch, key=lambda m: (m.src, m.sentAt, m.seq)):
            out[m.dst].append(m)
        return dict(out)

    def recorded_delays(self) -> list[tuple]:
        """(tick, src, dst, delay) for every sent message."""
        return [(m.sentAt, m.src, m.dst, m.arrivesAt - m.sentAt) for m in self.sent]

    def max_recorded_delay(self) -> int:
        return self._max_delay

    def write_delays_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["tick", "src", "dst", "delay"])
            w.writerows(self.recorded_delays())
