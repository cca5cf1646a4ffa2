"""Campaign configuration shared by the simulator, service, and CLI."""

from __future__ import annotations

from dataclasses import dataclass

from .gating import GateConfig, GateMetric
from .labels import ConfusionMatrix
from .postprocessing import BiasModel, PostprocessConfig


@dataclass(frozen=True)
class CampaignConfig:
    campaign_id: str
    k: int
    class_names: tuple[str, ...]
    a_cons: int
    a_full: int
    use_proposals: bool
    postprocess: PostprocessConfig
    gate: GateConfig | None = None
    cooldown_hours: float = 12.0
    batch_size: int = 24
    # Majority share among the first a_cons annotations needed to stop
    # early; 1.0 demands unanimity.
    agreement_threshold: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if not self.campaign_id:
            raise ValueError("campaign_id must be nonempty")
        if self.k < 2:
            raise ValueError("K must be >= 2")
        if len(self.class_names) != self.k:
            raise ValueError(
                f"K={self.k} but {len(self.class_names)} class names given"
            )
        if not 1 <= self.a_cons <= self.a_full:
            raise ValueError("need 1 <= a_cons <= a_full")
        if self.cooldown_hours < 0:
            raise ValueError("cooldown_hours must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.agreement_threshold <= 1.0:
            raise ValueError("agreement_threshold must lie in (0, 1]")
        if self.postprocess.k != self.k:
            raise ValueError(
                f"postprocess confusion is {self.postprocess.k}x{self.postprocess.k}, "
                f"campaign K is {self.k}"
            )

    @property
    def cooldown_ms(self) -> int:
        return int(round(self.cooldown_hours * 3_600_000))

    def to_dict(self) -> dict:
        gate = None
        if self.gate is not None:
            gate = {
                "mu": self.gate.mu,
                "required_passing_iterations": self.gate.required_passing_iterations,
                "metrics": sorted(m.value for m in self.gate.metrics),
                "require_both_modes": self.gate.require_both_modes,
            }
        return {
            "campaign_id": self.campaign_id,
            "k": self.k,
            "class_names": list(self.class_names),
            "a_cons": self.a_cons,
            "a_full": self.a_full,
            "use_proposals": self.use_proposals,
            "cooldown_hours": self.cooldown_hours,
            "batch_size": self.batch_size,
            "agreement_threshold": self.agreement_threshold,
            "gate": gate,
            "postprocess": {
                "delta": self.postprocess.bias.delta,
                "confusion": [list(row) for row in self.postprocess.confusion.rows],
                "blend_weight_beta": self.postprocess.blend_weight_beta,
                "skip_blend_threshold": self.postprocess.skip_blend_threshold,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CampaignConfig":
        try:
            post = doc["postprocess"]
            gate_doc = doc.get("gate")
            gate = None
            if gate_doc is not None:
                gate = GateConfig(
                    mu=float(gate_doc.get("mu", 0.6)),
                    required_passing_iterations=int(
                        gate_doc.get("required_passing_iterations", 2)
                    ),
                    metrics=frozenset(
                        GateMetric(m)
                        for m in gate_doc.get(
                            "metrics", ["MACRO_F1", "MACRO_ACCURACY"]
                        )
                    ),
                    require_both_modes=bool(gate_doc.get("require_both_modes", True)),
                )
            return cls(
                campaign_id=str(doc["campaign_id"]),
                k=int(doc["k"]),
                class_names=tuple(str(n) for n in doc["class_names"]),
                a_cons=int(doc["a_cons"]),
                a_full=int(doc["a_full"]),
                use_proposals=bool(doc["use_proposals"]),
                cooldown_hours=float(doc.get("cooldown_hours", 12.0)),
                batch_size=int(doc.get("batch_size", 24)),
                agreement_threshold=float(doc.get("agreement_threshold", 1.0)),
                gate=gate,
                postprocess=PostprocessConfig(
                    bias=BiasModel(float(post.get("delta", 0.0))),
                    confusion=ConfusionMatrix(
                        tuple(tuple(float(v) for v in row) for row in post["confusion"])
                    ),
                    blend_weight_beta=float(post.get("blend_weight_beta", 2.0)),
                    skip_blend_threshold=int(post.get("skip_blend_threshold", 50)),
                ),
            )
        except KeyError as exc:
            raise ValueError(f"campaign config missing field {exc.args[0]!r}") from None
