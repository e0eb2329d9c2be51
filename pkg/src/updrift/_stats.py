import math
from dataclasses import dataclass
from statistics import NormalDist

Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class ProportionEstimate:
    successes: int
    trials: int

    @property
    def phat(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        p = self.phat
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {"successes": self.successes, "trials": self.trials, "phat": self.phat,
                "stderr": self.stderr, "ci95": [lo, hi]}
