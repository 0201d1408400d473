"""Command-line experiment runner.

    dqa <mode> --config <path> [--out <path>] [--format json|csv] [--seed N]

Configs are JSON objects. Noise is given either at the top level or under a
``"noise"`` key, as ``kind`` plus exactly one of ``p`` or ``half_p``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy import stats

from . import analytic, dqa, ntpa
from .dqa import CapacityError, DqaConfig, Histogram, OutcomeDistribution
from .noise import NoiseModel

SCHEMA_VERSION = 1
MODES = ("exact", "sample", "analytic", "compare", "ntpa", "lemmas")

EXIT_OK = 0
EXIT_FAILED = 1  # lemma check failed or output could not be written
EXIT_INVALID = 2
EXIT_CAPACITY = 3


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Optional[Literal["exact", "sample", "analytic", "compare", "ntpa", "lemmas"]] = None
    inputs: Optional[list[int]] = None
    n: Optional[int] = Field(default=None, ge=1)
    kind: str = "none"
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    half_p: Optional[float] = Field(default=None, ge=0.0, le=0.5)
    engine: Literal["factorized", "full", "sample"] = "factorized"
    shots: int = Field(default=9000, ge=1)
    seed: int = Field(default=0, ge=0)
    noisy_rounds: Literal[1, 2] = 2
    trajectory: bool = False
    a: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    # ntpa
    t: Optional[int] = Field(default=None, ge=1)
    q: Optional[int] = None
    subset: Optional[list[int]] = None
    # lemmas sweep
    n_max: Optional[int] = Field(default=None, ge=1, le=16)
    a_grid: Optional[list[float]] = None

    @model_validator(mode="before")
    @classmethod
    def _lift_noise(cls, data):
        if isinstance(data, dict) and isinstance(data.get("noise"), dict):
            data = dict(data)
            noise = data.pop("noise")
            for key, value in noise.items():
                if key in data:
                    raise ValueError(f"noise key {key!r} given twice")
                data[key] = value
        return data

    @model_validator(mode="after")
    def _check(self):
        if self.p is not None and self.half_p is not None:
            raise ValueError("give exactly one of 'p' or 'half_p', not both")
        noisy = self.kind not in ("none", "noiseless")
        if noisy and self.p is None and self.half_p is None:
            raise ValueError(f"noise kind {self.kind!r} needs 'p' or 'half_p'")
        NoiseModel(self.kind, 0.0)  # validates the kind
        if self.inputs is not None and any(x < 0 for x in self.inputs):
            raise ValueError("inputs must be non-negative")
        if self.a_grid is not None and any(not 0.0 <= a <= 1.0 for a in self.a_grid):
            raise ValueError("a_grid values must lie in [0, 1]")
        return self

    @property
    def noise(self) -> NoiseModel:
        if self.half_p is not None:
            return NoiseModel.from_half_p(self.kind, self.half_p)
        return NoiseModel(self.kind, self.p or 0.0)

    def require(self, *names: str):
        missing = [k for k in names if getattr(self, k) is None]
        if missing:
            raise ValueError(f"mode {self.mode!r} requires field(s): {', '.join(missing)}")

    def dqa_config(self) -> DqaConfig:
        self.require("inputs")
        n = self.n if self.n is not None else dqa.auto_bits(self.inputs)
        return DqaConfig(
            inputs=tuple(self.inputs),
            n=n,
            noise=self.noise,
            engine=self.engine,
            shots=self.shots,
            seed=self.seed,
            noisy_rounds=self.noisy_rounds,
            trajectory=self.trajectory,
        )

    def ntpa_config(self) -> ntpa.NtpaConfig:
        self.require("inputs", "t", "q")
        return ntpa.NtpaConfig(
            inputs=tuple(self.inputs),
            t=self.t,
            q=self.q,
            noise=self.noise,
            engine=self.engine,
            shots=self.shots,
            seed=self.seed,
            subset=None if self.subset is None else tuple(self.subset),
        )


@dataclass(frozen=True)
class ComparisonReport:
    n: int
    shots: int
    tv_distance: float
    chi_square: float
    dof: int
    p_value: float
    table: list  # (outcome, binary_string, empirical, analytic)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "shots": self.shots,
            "tv_distance": self.tv_distance,
            "chi_square": self.chi_square,
            "dof": self.dof,
            "p_value": self.p_value,
            "table": [
                {"outcome": x, "binary_string": b, "empirical": e, "analytic": a}
                for x, b, e, a in self.table
            ],
        }


def binary_string(x: int, n: int) -> str:
    return format(x, f"0{n}b")


def compare_distributions(empirical: Histogram, reference: OutcomeDistribution) -> ComparisonReport:
    """Total variation distance and Pearson chi-square of a histogram against a distribution."""
    if empirical.n != reference.n:
        raise ValueError(f"histogram has n={empirical.n}, distribution has n={reference.n}")
    freq = empirical.frequencies
    probs = reference.array
    tv = min(1.0, 0.5 * float(np.abs(freq - probs).sum()))
    expected = empirical.shots * probs
    live = expected > 1e-12
    if np.any(empirical.counts[~live] > 0):
        chi, dof, pval = math.inf, int(live.sum()) - 1, 0.0
    else:
        obs = empirical.counts[live]
        chi = float(((obs - expected[live]) ** 2 / expected[live]).sum())
        dof = int(live.sum()) - 1
        pval = float(stats.chi2.sf(chi, dof)) if dof > 0 else 1.0
    table = [
        (x, binary_string(x, empirical.n), float(freq[x]), float(probs[x]))
        for x in range(2**empirical.n)
    ]
    return ComparisonReport(empirical.n, empirical.shots, tv, chi, dof, pval, table)


def polar_rows(probs: np.ndarray, n: int) -> list[dict]:
    return [
        {
            "outcome": x,
            "binary_string": binary_string(x, n),
            "angle_radians": 2 * math.pi * x / 2**n,
            "probability": float(probs[x]),
        }
        for x in range(2**n)
    ]


def export_polar(dist: OutcomeDistribution, path: str | Path | None = None) -> str:
    """Polar-plot CSV of a distribution; written to ``path`` when given."""
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, ["outcome", "binary_string", "angle_radians", "probability"], lineterminator="\n"
    )
    writer.writeheader()
    writer.writerows(polar_rows(dist.array, dist.n))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _config_dict(cfg: DqaConfig) -> dict:
    return {
        "inputs": list(cfg.inputs),
        "n": cfg.n,
        "noise": {"kind": cfg.noise.kind, "p": cfg.noise.p},
        "engine": cfg.engine,
        "shots": cfg.shots,
        "seed": cfg.seed,
        "noisy_rounds": cfg.noisy_rounds,
        "trajectory": cfg.trajectory,
    }


def _distribution_payload(cfg: DqaConfig, dist: OutcomeDistribution) -> dict:
    correct = dqa.correct_sum(cfg.inputs, cfg.n)
    return {
        "correct_outcome": correct,
        "correct_binary_string": binary_string(correct, cfg.n),
        "probabilities": [float(v) for v in dist.array],
        "distribution": polar_rows(dist.array, cfg.n),
    }


def _analytic_for(spec: ExperimentSpec, cfg: DqaConfig) -> tuple[float, OutcomeDistribution]:
    if spec.a is not None:
        a = spec.a
    else:
        a = analytic.predicted_a(cfg.noise, cfg.m + 1, cfg.noisy_rounds)
    return a, analytic.analytic_distribution(analytic.AnalyticParams(cfg.inputs, cfg.n, a))


def _exact_engine(cfg: DqaConfig) -> str:
    return "full" if cfg.engine == "full" else "factorized"


def run_exact_mode(spec: ExperimentSpec):
    cfg = spec.dqa_config()
    dist = dqa.run_exact(replace(cfg, engine=_exact_engine(cfg)))
    payload = {"config": _config_dict(cfg), **_distribution_payload(cfg, dist)}
    return payload, polar_rows(dist.array, cfg.n)


def run_sample_mode(spec: ExperimentSpec):
    cfg = spec.dqa_config()
    hist = dqa.sample(cfg)
    correct = dqa.correct_sum(cfg.inputs, cfg.n)
    payload = {
        "config": _config_dict(cfg),
        "shots": hist.shots,
        "correct_outcome": correct,
        "correct_binary_string": binary_string(correct, cfg.n),
        "counts": [int(c) for c in hist.counts],
        "frequencies": [float(f) for f in hist.frequencies],
    }
    rows = [
        {**row, "count": int(c)}
        for row, c in zip(polar_rows(hist.frequencies, cfg.n), hist.counts)
    ]
    return payload, rows


def run_analytic_mode(spec: ExperimentSpec):
    cfg = spec.dqa_config()
    a, dist = _analytic_for(spec, cfg)
    payload = {
        "config": _config_dict(cfg),
        "a": a,
        "p_correct": analytic.p_correct(cfg.n, a),
        "error_distribution": [float(v) for v in analytic.error_distribution(cfg.n, a)],
        **_distribution_payload(cfg, dist),
    }
    return payload, polar_rows(dist.array, cfg.n)


def run_compare_mode(spec: ExperimentSpec):
    cfg = spec.dqa_config()
    exact = dqa.run_exact(replace(cfg, engine=_exact_engine(cfg)))
    a = dqa.fit_fidelity_param(cfg) if spec.a is None else spec.a
    reference = analytic.analytic_distribution(analytic.AnalyticParams(cfg.inputs, cfg.n, a))
    hist = dqa.sample(cfg, None if cfg.trajectory else exact)
    report = compare_distributions(hist, reference)
    payload = {
        "config": _config_dict(cfg),
        "a": a,
        "max_abs_exact_vs_analytic": float(np.abs(exact.array - reference.array).max()),
        "comparison": report.to_dict(),
    }
    rows = [
        {"outcome": x, "binary_string": b, "empirical": e, "analytic": p}
        for x, b, e, p in report.table
    ]
    return payload, rows


def run_ntpa_mode(spec: ExperimentSpec):
    cfg = spec.ntpa_config()
    result = ntpa.run_ntpa(cfg)
    payload = {
        "config": {
            "inputs": list(cfg.inputs),
            "t": cfg.t,
            "q": cfg.q,
            "noise": {"kind": cfg.noise.kind, "p": cfg.noise.p},
            "engine": cfg.engine,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "subset": list(cfg.rounds_used),
        },
        "n_round": cfg.n_round,
        "expected": cfg.expected,
        "value": result.value,
        "success_probability": result.success_probability,
        "success_bound": ntpa.success_bound(cfg),
        "distribution": [float(v) for v in result.distribution],
        "rounds": [
            {
                "round": r.round,
                "server": r.server,
                "inputs": list(r.inputs),
                "n_round": r.n_round,
                "probabilities": [float(v) for v in r.distribution.array],
            }
            for r in result.rounds
        ],
    }
    if result.samples is not None:
        counts = np.bincount(result.samples, minlength=cfg.q)
        payload["samples"] = [int(v) for v in result.samples]
        payload["empirical_distribution"] = [float(c) / cfg.shots for c in counts]
    rows = [
        {"value": v, "probability": float(p)} for v, p in enumerate(result.distribution)
    ]
    return payload, rows


def run_lemmas_mode(spec: ExperimentSpec):
    reports = []
    if spec.inputs is not None:
        cfg = spec.dqa_config()
        dist = dqa.run_exact(replace(cfg, engine=_exact_engine(cfg)))
        errors = analytic.error_profile(dist, cfg.inputs)
        for check in analytic.LEMMA_CHECKS:
            reports.append(check(cfg.n, None, error_probs=errors, strict=False))
    if spec.n_max is not None or spec.inputs is None:
        n_max = spec.n_max if spec.n_max is not None else 8
        grid = spec.a_grid if spec.a_grid is not None else [k / 10 for k in range(11)]
        for n in range(1, n_max + 1):
            for a in grid:
                for check in analytic.LEMMA_CHECKS:
                    reports.append(check(n, a, strict=False))
    payload = {
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    rows = [
        {k: r.to_dict()[k] for k in ("lemma", "n", "a", "checks", "worst_violation", "passed")}
        for r in reports
    ]
    return payload, rows


RUNNERS = {
    "exact": run_exact_mode,
    "sample": run_sample_mode,
    "analytic": run_analytic_mode,
    "compare": run_compare_mode,
    "ntpa": run_ntpa_mode,
    "lemmas": run_lemmas_mode,
}


def load_spec(path: str | Path, mode: str, seed: int | None = None) -> ExperimentSpec:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    if raw.get("mode") not in (None, mode):
        raise ValueError(f"config is for mode {raw['mode']!r}, not {mode!r}")
    raw["mode"] = mode
    if seed is not None:
        raw["seed"] = seed
    return ExperimentSpec.model_validate(raw)


def render(mode: str, payload: dict, rows: list[dict], fmt: str) -> str:
    if fmt == "csv":
        return _table_csv(rows)
    doc = {"schema_version": SCHEMA_VERSION, "mode": mode, **payload}
    return json.dumps(doc, indent=2) + "\n"


def run_experiment(spec: ExperimentSpec, fmt: str = "json") -> tuple[str, dict]:
    """Run one experiment; returns the rendered output and the raw payload."""
    payload, rows = RUNNERS[spec.mode](spec)
    return render(spec.mode, payload, rows, fmt), payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqa", description="Noisy distributed QFT adder experiments")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--seed", type=int, help="override the config seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config, args.mode, args.seed)
        text, payload = run_experiment(spec, args.format)
    except CapacityError as exc:
        print(f"dqa: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ValidationError as exc:
        print(f"dqa: invalid config:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError) as exc:
        print(f"dqa: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"dqa: cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAILED
    if args.mode == "lemmas" and not payload["passed"]:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
