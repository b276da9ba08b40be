"""Experiment design: stages, batch sizes, policies, noise and run settings."""

from dataclasses import dataclass, field

from .errors import ConfigError, InfeasibleDesignError, ParameterDomainError
from .noise import NoiseModel
from .policy import Policy

DEFAULT_ALPHAS = (0.025, 0.05, 0.95, 0.975)


@dataclass(frozen=True)
class DesignConfig:
    """A complete, validated run description.

    ``policies[0]`` is the fixed stage-1 assignment; ``policies[s]`` maps the
    stage-``s`` decision statistic to the stage-``s+1`` strategy.
    """

    n: tuple
    policies: tuple
    noise: tuple
    min_arm_count: int = 5
    order: int = 1
    reduced: bool = False
    is_draws: int = 200_000
    scale_p: float = 2.0
    mc_reps: int = 500_000
    alphas: tuple = DEFAULT_ALPHAS
    seed: int = 20240101
    name: str = ""
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        S = len(self.n)
        if S < 1:
            raise InfeasibleDesignError("at least one stage is required")
        if len(self.policies) != S or len(self.noise) != S:
            raise InfeasibleDesignError("need one policy and one noise model per stage")
        if self.policies[0].kind != "fixed":
            raise InfeasibleDesignError("stage-1 policy must be fixed")
        for ns in self.n:
            if ns < 2 * self.min_arm_count or ns < 3:
                raise InfeasibleDesignError(
                    f"batch size {ns} infeasible with min_arm_count {self.min_arm_count}"
                )
        if self.min_arm_count < 1:
            raise ParameterDomainError("min_arm_count must be >= 1")
        if self.order not in (0, 1):
            raise ParameterDomainError("expansion order must be 0 or 1")
        if not self.scale_p > 1:
            raise ParameterDomainError("importance-sampling scale_p must exceed 1")
        for a in self.alphas:
            if not 0 < a < 1:
                raise ParameterDomainError(f"alpha {a} outside (0, 1)")

    @property
    def stages(self):
        return len(self.n)

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)

    @classmethod
    def from_dict(cls, d):
        """Build from the JSON config schema (see README)."""
        missing = [k for k in ("stages", "n", "noise", "stage1_probs") if k not in d]
        if int(d.get("stages", 1)) > 1 and "stage2_policy" not in d:
            missing.append("stage2_policy")
        if missing:
            raise ConfigError(f"missing required config keys: {', '.join(missing)}", missing)
        known = {
            "stages", "n", "noise", "stage1_probs", "stage2_policy", "min_arm_count",
            "expansion", "is", "mc", "alphas", "seed", "name", "notes",
        }
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
        try:
            S = int(d["stages"])
            n = d["n"]
            n = tuple(int(v) for v in (n if isinstance(n, list) else [n] * S))
            if len(n) != S:
                raise ConfigError("length of 'n' must equal 'stages'", ["n"])
            noise = d["noise"]
            noise = noise if isinstance(noise, list) else [noise] * S
            if len(noise) != S:
                raise ConfigError("length of 'noise' must equal 'stages'", ["noise"])
            noise = tuple(NoiseModel.from_dict(nd) for nd in noise)
            pols = [Policy.fixed(d["stage1_probs"])]
            later = d.get("stage2_policy")
            later = later if isinstance(later, list) else [later] * (S - 1)
            pols += [Policy.from_dict(p) for p in later]
            exp = d.get("expansion", {})
            is_ = d.get("is", {})
            mc = d.get("mc", {})
            return cls(
                n=n,
                policies=tuple(pols),
                noise=noise,
                min_arm_count=int(d.get("min_arm_count", 5)),
                order=int(exp.get("order", 1)),
                reduced=bool(exp.get("reduced", False)),
                is_draws=int(is_.get("draws", 200_000)),
                scale_p=float(is_.get("scale_p", 2.0)),
                mc_reps=int(mc.get("reps", 500_000)),
                alphas=tuple(float(a) for a in d.get("alphas", DEFAULT_ALPHAS)),
                seed=int(d.get("seed", 20240101)),
                name=str(d.get("name", "")),
                notes=tuple(d.get("notes", ())),
            )
        except (ConfigError, InfeasibleDesignError):
            raise
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParameterDomainError):
                raise ConfigError(str(exc)) from exc
            raise ConfigError(f"invalid config: {exc!r}") from exc

    def to_dict(self):
        shared = all(nm == self.noise[0] for nm in self.noise)
        later = [p.to_dict() for p in self.policies[1:]]
        d = {
            "name": self.name,
            "stages": self.stages,
            "n": list(self.n),
            "noise": self.noise[0].to_dict() if shared else [nm.to_dict() for nm in self.noise],
            "stage1_probs": list(self.policies[0].probs),
            "min_arm_count": self.min_arm_count,
            "expansion": {"order": self.order, "reduced": self.reduced},
            "is": {"draws": self.is_draws, "scale_p": self.scale_p},
            "mc": {"reps": self.mc_reps},
            "alphas": list(self.alphas),
            "seed": self.seed,
        }
        if later:
            d["stage2_policy"] = later[0] if all(p == later[0] for p in later) else later
        return d
