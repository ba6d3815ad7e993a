"""Architecture descriptions for the toy CNN (baseline, IE, RSL)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import StructureError
from .lfm import LfmConfig, ie_attach, rsl_replace

KINDS = ("conv3x3", "relu", "rsl_block", "lfm", "gap", "linear")
PARAM_KINDS = ("conv3x3", "rsl_block", "linear")
VARIANTS = ("baseline", "ie", "rsl")


@dataclass(frozen=True)
class Layer:
    kind: str
    c_in: int = 0
    c_out: int = 0
    stride: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructureError(f"unknown layer kind {self.kind!r}")

    def param_shapes(self) -> dict:
        if self.kind == "conv3x3":
            return {"weight": (self.c_out, self.c_in, 3, 3), "bias": (self.c_out,)}
        if self.kind == "rsl_block":
            return {"weight": (self.c_out, self.c_in), "bias": (self.c_out,)}
        if self.kind == "linear":
            return {"weight": (self.c_out, self.c_in), "bias": (self.c_out,)}
        return {}

    def fan_in(self) -> int:
        return {"conv3x3": 9 * self.c_in, "rsl_block": self.c_in, "linear": self.c_in}.get(self.kind, 0)


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    stages: tuple
    input_shape: tuple = (1, 32, 32)
    n_classes: int = 3
    lfm_config: LfmConfig = field(default_factory=LfmConfig)
    # fixed input standardization (mean, std), set from source training data
    input_norm: tuple = (0.0, 1.0)

    def validate(self) -> None:
        kinds = [s.kind for s in self.stages]
        if self.variant not in VARIANTS:
            raise StructureError(f"unknown variant {self.variant!r}")
        if not self.input_norm[1] > 0:
            raise StructureError("input_norm std must be positive")
        if kinds.count("gap") != 1:
            raise StructureError("a spec needs exactly one global_avg_pool")
        if kinds[-2:] != ["gap", "linear"]:
            raise StructureError("global_avg_pool must be followed only by the linear classifier")
        if self.stages[-1].c_out != self.n_classes:
            raise StructureError("linear output width must equal n_classes")
        if self.variant == "ie" and (len(kinds) < 3 or kinds[-3] != "lfm"):
            raise StructureError("variant 'ie' needs an lfm layer immediately before global_avg_pool")
        if self.variant == "rsl" and any(s.kind == "conv3x3" and s.stride == 2 for s in self.stages):
            raise StructureError("variant 'rsl' may not keep stride-2 convolutions")
        if self.variant == "baseline" and ("lfm" in kinds or "rsl_block" in kinds):
            raise StructureError("variant 'baseline' may not contain lfm or rsl_block layers")
        c = self.input_shape[0]
        for s in self.stages:
            if s.kind in ("conv3x3", "rsl_block", "linear"):
                if s.c_in != c:
                    raise StructureError(f"{s.kind} expects {s.c_in} channels but receives {c}")
                c = s.c_out

    def param_layers(self):
        """(name, layer) for every layer that owns parameters, in order."""
        out = []
        for s in self.stages:
            if s.kind in PARAM_KINDS:
                out.append((f"{s.kind}_{len(out)}", s))
        return out

    def to_json(self) -> str:
        return json.dumps({
            "variant": self.variant,
            "stages": [[s.kind, s.c_in, s.c_out, s.stride] for s in self.stages],
            "input_shape": list(self.input_shape),
            "n_classes": self.n_classes,
            "lfm_config": self.lfm_config.to_dict(),
            "input_norm": [float(v) for v in self.input_norm],
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        d = json.loads(text)
        spec = cls(
            variant=d["variant"],
            stages=tuple(Layer(k, ci, co, st) for k, ci, co, st in d["stages"]),
            input_shape=tuple(d["input_shape"]),
            n_classes=int(d["n_classes"]),
            lfm_config=LfmConfig(**d["lfm_config"]),
            input_norm=tuple(d.get("input_norm", (0.0, 1.0))),
        )
        spec.validate()
        return spec


def toy_spec(variant: str = "baseline", n_classes: int = 3, input_shape=(1, 32, 32),
             lfm_config: LfmConfig | None = None, widths=(8, 16, 32)) -> ModelSpec:
    """conv(1->8) relu conv(8->16,s2) relu conv(16->32,s2) relu [lfm] gap linear(32->K)."""
    c0, c1, c2 = widths
    stages = (
        Layer("conv3x3", input_shape[0], c0, 1), Layer("relu"),
        Layer("conv3x3", c0, c1, 2), Layer("relu"),
        Layer("conv3x3", c1, c2, 2), Layer("relu"),
        Layer("gap"), Layer("linear", c2, n_classes),
    )
    spec = ModelSpec("baseline", stages, tuple(input_shape), n_classes, lfm_config or LfmConfig())
    spec.validate()
    if variant == "ie":
        return ie_attach(spec)
    if variant == "rsl":
        return rsl_replace(spec)
    if variant != "baseline":
        raise StructureError(f"unknown variant {variant!r}")
    return spec
