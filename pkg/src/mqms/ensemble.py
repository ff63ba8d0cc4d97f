"""Edge-perspective degree distributions and derived ensemble quantities."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAX_DEGREE = 256
# Published tables round coefficients to ~4 decimals, so sums can miss 1 by ~1e-4.
_NORM_TOL = 1e-3


def _normalize(coeffs: dict[int, float], side: str) -> dict[int, float]:
    if not coeffs:
        raise ValueError(f"{side} distribution is empty")
    clean = {}
    for deg, c in coeffs.items():
        deg = int(deg)
        if deg < 2 or deg > MAX_DEGREE:
            raise ValueError(f"{side} degree {deg} out of range [2, {MAX_DEGREE}]")
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"{side} coefficient for degree {deg} not in [0, 1]")
        if c > 0:
            clean[deg] = float(c)
    total = sum(clean.values())
    if abs(total - 1.0) > _NORM_TOL:
        raise ValueError(f"{side} coefficients sum to {total}, expected 1")
    # Table-style inputs are rounded to a few decimals; renormalize proportionally.
    return {deg: c / total for deg, c in sorted(clean.items())}


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distribution pair lambda(x), rho(x).

    ``lam[i]`` is the fraction of edges incident to degree-i variable nodes,
    ``rho[j]`` the fraction incident to degree-j check nodes.  Coefficients are
    validated and proportionally renormalized on construction.
    """

    lam: dict[int, float]
    rho: dict[int, float]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lam", _normalize(self.lam, "lambda"))
        object.__setattr__(self, "rho", _normalize(self.rho, "rho"))

    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeDistribution":
        return cls({dv: 1.0}, {dc: 1.0}, name=f"({dv},{dc})")

    @classmethod
    def from_json_dict(cls, obj: dict, name: str = "") -> "DegreeDistribution":
        lam = {int(k): float(v) for k, v in obj["lambda"].items()}
        rho = {int(k): float(v) for k, v in obj["rho"].items()}
        return cls(lam, rho, name=name)

    def to_json_dict(self) -> dict:
        return {
            "lambda": {str(k): v for k, v in self.lam.items()},
            "rho": {str(k): v for k, v in self.rho.items()},
        }

    @property
    def max_vn_degree(self) -> int:
        return max(self.lam)

    @property
    def max_cn_degree(self) -> int:
        return max(self.rho)

    def eval_lambda(self, x):
        return sum(c * np.asarray(x, dtype=float) ** (d - 1) for d, c in self.lam.items())

    def eval_rho(self, x):
        return sum(c * np.asarray(x, dtype=float) ** (d - 1) for d, c in self.rho.items())

    def rho_derivative_at_1(self) -> float:
        return sum(c * (d - 1) for d, c in self.rho.items())

    def design_rate(self) -> float:
        vn_mass = sum(c / d for d, c in self.lam.items())
        cn_mass = sum(c / d for d, c in self.rho.items())
        return 1.0 - cn_mass / vn_mass

    def node_perspective(self) -> tuple[dict[int, float], dict[int, float]]:
        """Node-perspective degree fractions (VN, CN)."""
        vn_raw = {d: c / d for d, c in self.lam.items()}
        cn_raw = {d: c / d for d, c in self.rho.items()}
        vn_tot = sum(vn_raw.values())
        cn_tot = sum(cn_raw.values())
        return ({d: v / vn_tot for d, v in vn_raw.items()},
                {d: v / cn_tot for d, v in cn_raw.items()})


def _table_ensembles() -> dict[str, DegreeDistribution]:
    rows = {
        "2/3": ({2: 0.0317, 3: 0.489, 10: 0.0374, 20: 0.4419},
                {14: 0.328, 15: 0.672}),
        "3/4": ({2: 0.0313, 3: 0.463, 10: 0.0058, 20: 0.4999},
                {20: 0.5336, 21: 0.4664}),
        "4/5": ({3: 0.4961, 10: 0.0051, 20: 0.4988},
                {26: 0.7907, 27: 0.2093}),
        "5/6": ({2: 0.0205, 3: 0.4646, 10: 0.0534, 20: 0.4616},
                {31: 0.9926, 32: 0.0074}),
        "7/8": ({3: 0.4789, 5: 0.0021, 10: 0.032, 20: 0.487},
                {42: 0.3752, 43: 0.6248}),
        "9/10": ({3: 0.4442, 4: 0.0403, 10: 0.0025, 20: 0.513},
                 {54: 0.6604, 55: 0.3396}),
    }
    return {name: DegreeDistribution(lam, rho, name=name) for name, (lam, rho) in rows.items()}


REGISTRY: dict[str, DegreeDistribution] = {
    "3,6": DegreeDistribution.regular(3, 6),
    "4,8": DegreeDistribution.regular(4, 8),
    **_table_ensembles(),
}


def get_ensemble(spec: str) -> DegreeDistribution:
    """Look up an ensemble by registry name, 'dv,dc' shorthand, or JSON file path."""
    if spec in REGISTRY:
        return REGISTRY[spec]
    if "," in spec:
        try:
            dv, dc = (int(t) for t in spec.split(","))
        except ValueError:
            pass
        else:
            return DegreeDistribution.regular(dv, dc)
    try:
        with open(spec) as fh:
            return DegreeDistribution.from_json_dict(json.load(fh), name=spec)
    except OSError as exc:
        raise KeyError(f"unknown ensemble {spec!r} (not a registry name, 'dv,dc' pair "
                       f"or readable JSON file)") from exc
