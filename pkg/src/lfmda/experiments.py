"""The five-arm source-only ablation grid (baseline, high-pass, low-pass, IE, RSL)."""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass, field, replace

from .arch import toy_spec
from .lfm import LfmConfig
from .nn import TrainConfig, build_model, evaluate, train_source

log = logging.getLogger(__name__)

# (label, architecture variant, input pre-filter), in table row order
ARMS = (
    ("baseline", "baseline", "none"),
    ("high-pass", "baseline", "highpass"),
    ("low-pass", "baseline", "lowpass"),
    ("IE", "ie", "none"),
    ("RSL", "rsl", "none"),
)


@dataclass(frozen=True)
class RunRecord:
    arm: str
    variant: str
    preproc: str
    seed: int
    source_acc: float
    target_acc: float
    final_loss: float

    def to_line(self) -> str:
        return (f"arm={self.arm} variant={self.variant} preproc={self.preproc} seed={self.seed} "
                f"source_acc={self.source_acc!r} target_acc={self.target_acc!r} final_loss={self.final_loss!r}")


@dataclass
class AblationResult:
    seeds: list
    runs: list = field(default_factory=list)
    seconds: float = 0.0

    def target_accs(self, arm: str) -> list:
        return [r.target_acc for r in self.runs if r.arm == arm]

    def median(self, arm: str) -> float:
        return float(statistics.median(self.target_accs(arm)))

    def medians(self) -> dict:
        return {label: self.median(label) for label, _, _ in ARMS}

    def ordering_holds(self, max_baseline: float = 0.9) -> bool:
        """high-pass < baseline < low-pass <= max(IE, RSL), with baseline <= ``max_baseline``."""
        m = self.medians()
        return (m["high-pass"] < m["baseline"] < m["low-pass"] <= max(m["IE"], m["RSL"])
                and m["baseline"] <= max_baseline)

    def table(self) -> str:
        rows = [f"{'arm':<10} {'median':>7} {'min':>7} {'max':>7}  per-seed target accuracy"]
        for label, _, _ in ARMS:
            accs = self.target_accs(label)
            per = " ".join(f"{a:.4f}" for a in accs)
            rows.append(f"{label:<10} {self.median(label):7.4f} {min(accs):7.4f} {max(accs):7.4f}  {per}")
        return "\n".join(rows) + "\n"

    def records(self) -> str:
        lines = [r.to_line() for r in self.runs]
        for label, _, _ in ARMS:
            accs = self.target_accs(label)
            lines.append(f"summary arm={label} median={self.median(label)!r} min={min(accs)!r} max={max(accs)!r}")
        return "\n".join(lines) + "\n"


def run_arm(arm, source, target, seed: int, cfg: TrainConfig, lfm_config: LfmConfig | None = None,
            n_classes: int = 3) -> RunRecord:
    """Train one (arm, seed) cell on ``source`` and report accuracy on ``target``."""
    label, variant, preproc = arm
    xs, ys = source
    xt, yt = target
    spec = toy_spec(variant, n_classes, (1,) + tuple(xs.shape[1:]), lfm_config)
    cfg = replace(cfg, seed=seed, preproc=preproc)
    res = train_source(build_model(spec, seed, cfg.dtype), xs, ys, cfg)
    tgt = evaluate(res.model, xt, yt, preproc, cfg.m).accuracy
    last = res.log[-1] if res.log else None
    return RunRecord(label, variant, preproc, seed, last.source_acc if last else float("nan"), tgt,
                     last.loss if last else float("nan"))


def run_ablation(source, target, seeds, cfg: TrainConfig | None = None, lfm_config: LfmConfig | None = None,
                 n_classes: int = 3, arms=ARMS) -> AblationResult:
    cfg = cfg or TrainConfig()
    out = AblationResult(seeds=list(seeds))
    t0 = time.perf_counter()
    for arm in arms:
        for seed in seeds:
            rec = run_arm(arm, source, target, seed, cfg, lfm_config, n_classes)
            log.info(rec.to_line())
            out.runs.append(rec)
    out.seconds = time.perf_counter() - t0
    return out
