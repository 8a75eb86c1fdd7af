"""Monte-Carlo measurement of false rejection and false acceptance rates.

Genuine trials enroll a fresh identity and authenticate with a new noisy
capture; impostor trials authenticate unrelated captures against one
enrolled record. Every trial derives its own sub-seed from the harness
seed plus the trial index, so reports are pure functions of their inputs
and trial order cannot change the counts.

Rates carry Wilson 95% intervals, which stay meaningful at the zero
boundary where these measurements usually sit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import IO, Mapping, Sequence

from .binding import AuthFailure, FailureReason
from .credential import generate_issuer_keys
from .fextract import ExtractFailure
from .kdf import expand_seed
from .parties import (
    AgePolicy,
    AlwaysApproveEvidence,
    InProcessAsp,
    LivenessFailed,
    ProtocolConfig,
    device_authenticate,
    device_enroll,
)
from .store import DeviceRecord
from .synthbio import NoiseModel, new_identity, sample_genuine, sample_impostor

__all__ = [
    "Stage",
    "TrialKind",
    "TrialOutcome",
    "EvalReport",
    "wilson_interval",
    "estimate_frr",
    "estimate_far",
    "frr_trial",
    "far_trial",
    "sweep",
    "CSV_HEADER",
]

_MASK64 = (1 << 64) - 1
_Z95 = 1.959963984540054

# Fixed issuance clock: evaluation measures the biometric pipeline, so
# credential validity must never interfere.
_EVAL_CLOCK = 1_750_000_000

CSV_HEADER = "sigma,trials,frr,frr_lo,frr_hi,far,far_lo,far_hi,seed"


class Stage(enum.Enum):
    LIVENESS = "Liveness"
    EXTRACT = "Extract"
    HASH_CHECK = "HashCheck"
    DECRYPT = "Decrypt"
    SUCCESS = "Success"


class TrialKind(enum.Enum):
    GENUINE = "Genuine"
    IMPOSTOR = "Impostor"


@dataclass(frozen=True)
class TrialOutcome:
    kind: TrialKind
    stage_reached: Stage
    succeeded: bool

    def __post_init__(self) -> None:
        if self.succeeded != (self.stage_reached is Stage.SUCCESS):
            raise ValueError("succeeded exactly when the Success stage is reached")


@dataclass(frozen=True)
class EvalReport:
    sigma: float
    trials: int
    frr: float
    frr_lo: float
    frr_hi: float
    far: float
    far_lo: float
    far_hi: float
    seed: int
    stage_counts: Mapping[str, int]


def wilson_interval(count: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion count/trials."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= count <= trials:
        raise ValueError("count must be within [0, trials]")
    p = count / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _subseed(seed: int, label: str) -> int:
    return int.from_bytes(expand_seed(seed, label, 8), "big")


def _eval_asp(seed: int) -> InProcessAsp:
    keys = generate_issuer_keys(_subseed(seed, "bbcreds/eval/issuer/v1"))
    return InProcessAsp(keys, AgePolicy(), now=_EVAL_CLOCK)


def _authenticate_outcome(kind: TrialKind, sample, record: DeviceRecord,
                          cfg: ProtocolConfig) -> TrialOutcome:
    try:
        device_authenticate(sample, record, cfg.liveness)
    except LivenessFailed:
        return TrialOutcome(kind, Stage.LIVENESS, False)
    except ExtractFailure:
        return TrialOutcome(kind, Stage.EXTRACT, False)
    except AuthFailure as failure:
        stage = (
            Stage.HASH_CHECK
            if failure.reason is FailureReason.HASH_MISMATCH
            else Stage.DECRYPT
        )
        return TrialOutcome(kind, stage, False)
    return TrialOutcome(kind, Stage.SUCCESS, True)


def frr_trial(
    cfg: ProtocolConfig,
    sigma: float,
    seed: int,
    index: int,
    asp: InProcessAsp | None = None,
) -> TrialOutcome:
    """One genuine trial: enroll identity ``seed + index``, then authenticate
    a fresh capture at the given noise level.

    The default ASP is rebuilt deterministically from the seed, so running
    trials individually, reordered, or through ``estimate_frr`` gives the
    same outcomes.
    """
    base = (seed + index) & _MASK64
    trial_cfg = replace(cfg, sigma=sigma)
    profile = new_identity(base, cfg.dim)
    record = device_enroll(
        profile,
        asp if asp is not None else _eval_asp(seed),
        trial_cfg,
        _subseed(base, "bbcreds/eval/enroll/v1"),
        evidence=AlwaysApproveEvidence(),
    )
    sample = sample_genuine(
        profile, NoiseModel(sigma), _subseed(base, "bbcreds/eval/auth/v1")
    )
    return _authenticate_outcome(TrialKind.GENUINE, sample, record, trial_cfg)


def far_trial(record: DeviceRecord, cfg: ProtocolConfig, seed: int, index: int) -> TrialOutcome:
    """One impostor trial against an already enrolled record."""
    sample = sample_impostor((seed + 1 + index) & _MASK64, cfg.dim)
    return _authenticate_outcome(TrialKind.IMPOSTOR, sample, record, cfg)


def _stage_tally(outcomes: Sequence[TrialOutcome]) -> dict[str, int]:
    counts = {stage.value: 0 for stage in Stage}
    for outcome in outcomes:
        counts[outcome.stage_reached.value] += 1
    return counts


def _frr_report(cfg: ProtocolConfig, sigma: float, trials: int, seed: int) -> EvalReport:
    if trials <= 0:
        raise ValueError("trials must be positive")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    asp = _eval_asp(seed)
    outcomes = [frr_trial(cfg, sigma, seed, i, asp=asp) for i in range(trials)]
    failures = sum(not o.succeeded for o in outcomes)
    lo, hi = wilson_interval(failures, trials)
    return EvalReport(
        sigma=sigma,
        trials=trials,
        frr=failures / trials,
        frr_lo=lo,
        frr_hi=hi,
        far=0.0,
        far_lo=0.0,
        far_hi=0.0,
        seed=seed,
        stage_counts=_stage_tally(outcomes),
    )


def _far_report(cfg: ProtocolConfig, trials: int, seed: int) -> EvalReport:
    if trials <= 0:
        raise ValueError("trials must be positive")
    profile = new_identity(seed, cfg.dim)
    record = device_enroll(
        profile,
        _eval_asp(seed),
        cfg,
        _subseed(seed, "bbcreds/eval/enroll/v1"),
        evidence=AlwaysApproveEvidence(),
    )
    outcomes = [far_trial(record, cfg, seed, i) for i in range(trials)]
    accepts = sum(o.succeeded for o in outcomes)
    lo, hi = wilson_interval(accepts, trials)
    return EvalReport(
        sigma=cfg.sigma,
        trials=trials,
        frr=0.0,
        frr_lo=0.0,
        frr_hi=0.0,
        far=accepts / trials,
        far_lo=lo,
        far_hi=hi,
        seed=seed,
        stage_counts=_stage_tally(outcomes),
    )


def estimate_frr(cfg: ProtocolConfig, sigma: float, trials: int, seed: int) -> EvalReport:
    """False rejection rate over fresh genuine identities at one noise level."""
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    return _frr_report(cfg, sigma, trials, seed)


def estimate_far(cfg: ProtocolConfig, trials: int, seed: int) -> EvalReport:
    """False acceptance rate of impostor captures against one enrolled record."""
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    return _far_report(cfg, trials, seed)


def sweep(
    cfg: ProtocolConfig,
    sigmas: Sequence[float],
    trials: int,
    seed: int,
    sink: IO[str],
) -> list[str]:
    """Run FRR and FAR at every noise level and write one CSV row each.

    Both rates use ``trials`` trials per row (the standalone estimators'
    minimum-trial floors do not apply here). Returns the data rows, header
    excluded; rerunning with the same arguments reproduces the output byte
    for byte.
    """
    if not sigmas:
        raise ValueError("sigmas must be nonempty")
    sink.write(CSV_HEADER + "\n")
    rows = []
    for sigma in sigmas:
        frr_report = _frr_report(cfg, sigma, trials, seed)
        far_report = _far_report(replace(cfg, sigma=sigma), trials, seed)
        row = (
            f"{sigma:g},{trials},"
            f"{frr_report.frr:.6f},{frr_report.frr_lo:.6f},{frr_report.frr_hi:.6f},"
            f"{far_report.far:.6f},{far_report.far_lo:.6f},{far_report.far_hi:.6f},"
            f"{seed}"
        )
        sink.write(row + "\n")
        rows.append(row)
    return rows
