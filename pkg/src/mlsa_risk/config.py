"""Experiment configuration read from INI files.

Numbers may be written as fractions (``1/32``, ``7/360``) or in scientific
notation.  A complete file looks like::

    [model]
    kind = option            ; option | swap
    alpha = 0.975
    delta = 0.5              ; swap keys: r s0 kappa sigma coupon_interval
                             ;            maturity horizon unit
    [experiment]
    algorithms = sa, nsa, mlsa
    targets = var, es
    epsilons = 1/32, 1/64, 1/128
    replications = 200
    seed = 12345
    init = truth             ; truth | zero | <xi>, <chi>
    beta = 1

    [mlsa]
    m = 2
    scenario = finite_moment ; finite_moment | gaussian | lipschitz
    p_star = 11
    calibration_var = 1
    calibration_es = 1

    [sa.var]                 ; likewise sa.es, nsa.var, nsa.es
    gamma1 = 1
    offset = 100

    [mlsa.var.1/32]          ; one section per (target, epsilon)
    h0 = 1/16
    gamma1 = 2
    offset = 2500

    [bias_study]
    h = 1/50, 1/100, 1/200
    iterations = 1000000
    replications = 200
    gamma1 = 0.1
    offset = 10000

Step schedules read ``gamma1``, ``beta`` (default: the experiment's) and
``offset`` (default 0).  The two bundled files ``option_study.cfg`` and
``swap_study.cfg`` can be loaded by name.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

from mlsa_risk.bench import ALGORITHMS, TARGETS, CellPlan, plan_cell
from mlsa_risk.engine import StepSchedule
from mlsa_risk.measures import RiskLevel
from mlsa_risk.models import LossModel, OptionModel, OptionParams, SwapModel, SwapParams
from mlsa_risk.samplers import BiasParam
from mlsa_risk.tuning import Scenario

__all__ = ["ConfigError", "ExperimentConfig", "BiasStudyConfig", "load_config",
           "parse_config", "bundled_config_names"]

_BUNDLED = ("option_study", "swap_study")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def parse_number(text: str) -> float:
    """Parse ``"1/32"``, ``"2.5e4"`` or ``"7"`` into a float."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _numbers(text: str) -> list[float]:
    return [parse_number(t) for t in text.split(",") if t.strip()]


def _words(text: str) -> list[str]:
    return [t.strip().lower() for t in text.split(",") if t.strip()]


def _bias(text: str) -> BiasParam:
    try:
        return BiasParam.from_h(parse_number(text))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class BiasStudyConfig:
    biases: tuple[BiasParam, ...]
    iterations: int
    replications: int
    sched: StepSchedule


@dataclass(frozen=True)
class ExperimentConfig:
    model: LossModel
    algorithms: tuple[str, ...]
    targets: tuple[str, ...]
    epsilons: tuple[float, ...]
    replications: int
    seed: int
    init: tuple[float, float]
    beta: float = 1.0
    m: int = 2
    scenario: Scenario | None = None
    calibration: dict = field(default_factory=lambda: {"var": 1.0, "es": 1.0})
    schedules: dict = field(default_factory=dict)
    mlsa_rows: dict = field(default_factory=dict)
    bias: BiasStudyConfig | None = None
    source: str = "<string>"

    def with_overrides(self, *, seed=None, algorithms=None, epsilons=None,
                       replications=None) -> "ExperimentConfig":
        """Copy with command-line overrides applied and re-validated."""
        cfg = replace(
            self,
            seed=self.seed if seed is None else int(seed),
            algorithms=self.algorithms if algorithms is None else tuple(algorithms),
            epsilons=self.epsilons if epsilons is None else tuple(epsilons),
            replications=self.replications if replications is None else int(replications),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.epsilons:
            raise ConfigError("the accuracy grid is empty")
        if any(not 0.0 < e < 1.0 for e in self.epsilons):
            raise ConfigError("every epsilon must lie in (0, 1)")
        if any(a <= b for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("the accuracy grid must be strictly decreasing")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
            for t in self.targets:
                if (a, t) not in self.schedules and a != "mlsa":
                    raise ConfigError(f"missing [{a}.{t}] schedule section")
        for t in self.targets:
            if t not in TARGETS:
                raise ConfigError(f"unknown target {t!r}")
        if "sa" in self.algorithms and not self.model.has_exact_loss:
            raise ConfigError("algorithm sa needs a model with a direct loss simulator")
        if "mlsa" in self.algorithms:
            if "var" in self.targets and self.scenario is None:
                raise ConfigError("MLSA VaR allocation needs a scenario in [mlsa]")
            for t in self.targets:
                for e in self.epsilons:
                    row = self.mlsa_rows.get((t, e))
                    if row is None:
                        raise ConfigError(f"missing MLSA row for target {t}, eps={e:g}")
                    if not row[0].h > e:
                        raise ConfigError(f"MLSA row {t}, eps={e:g} needs h0 > eps")

    def plan(self, algorithm: str, target: str, epsilon: float) -> CellPlan:
        """Tuned plan of one ``(algorithm, target, epsilon)`` cell."""
        if algorithm == "mlsa":
            try:
                h0, sched = self.mlsa_rows[(target, epsilon)]
            except KeyError:
                raise ConfigError(f"no MLSA row for target {target}, eps={epsilon:g}") from None
            return plan_cell("mlsa", target, epsilon, sched, beta=self.beta, h0=h0, m=self.m,
                             scenario=self.scenario, calibration=self.calibration[target])
        try:
            sched = self.schedules[(algorithm, target)]
        except KeyError:
            raise ConfigError(f"no [{algorithm}.{target}] schedule") from None
        return plan_cell(algorithm, target, epsilon, sched, beta=self.beta)


def _schedule(sec, beta: float) -> StepSchedule:
    try:
        return StepSchedule(parse_number(sec["gamma1"]),
                            parse_number(sec.get("beta", repr(beta))),
                            parse_number(sec.get("offset", "0")))
    except KeyError as exc:
        raise ConfigError(f"[{sec.name}] lacks key {exc.args[0]}") from None
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}]: {exc}") from None


def _model(sec) -> LossModel:
    kind = sec.get("kind", "option").strip().lower()
    level = RiskLevel(parse_number(sec["alpha"])) if "alpha" in sec else None
    if kind == "option":
        kw = {"delta": parse_number(sec["delta"])} if "delta" in sec else {}
        if level is not None:
            kw["level"] = level
        return OptionModel(OptionParams(**kw))
    if kind == "swap":
        keys = ("r", "s0", "kappa", "sigma", "coupon_interval", "maturity", "horizon", "unit")
        kw = {k: parse_number(sec[k]) for k in keys if k in sec}
        if level is not None:
            kw["level"] = level
        return SwapModel(SwapParams(**kw))
    raise ConfigError(f"unknown model kind {kind!r}")


def _init(text: str, model: LossModel) -> tuple[float, float]:
    text = text.strip().lower()
    if text == "zero":
        return (0.0, 0.0)
    if text == "truth":
        t = model.analytic_truth()
        return (t.xi, t.chi)
    vals = _numbers(text)
    if len(vals) != 2:
        raise ConfigError(f"init must be 'truth', 'zero' or 'xi, chi', got {text!r}")
    return (vals[0], vals[1])


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return _build(cp, source)
    except ConfigError:
        raise
    except (KeyError, ValueError, OverflowError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _build(cp: configparser.ConfigParser, source: str) -> ExperimentConfig:
    for name in ("model", "experiment"):
        if not cp.has_section(name):
            raise ConfigError(f"{source}: missing [{name}] section")
    model = _model(cp["model"])
    ex = cp["experiment"]
    beta = parse_number(ex.get("beta", "1"))
    schedules = {}
    for algo in ("sa", "nsa"):
        for t in TARGETS:
            name = f"{algo}.{t}"
            if cp.has_section(name):
                schedules[(algo, t)] = _schedule(cp[name], beta)

    m, scenario, calibration = 2, None, {"var": 1.0, "es": 1.0}
    if cp.has_section("mlsa"):
        ml = cp["mlsa"]
        m = int(parse_number(ml.get("m", "2")))
        kind = ml.get("scenario", "").strip().lower()
        if kind:
            p_star = parse_number(ml["p_star"]) if "p_star" in ml else None
            scenario = Scenario(kind, p_star)
        calibration = {t: parse_number(ml.get(f"calibration_{t}", "1")) for t in TARGETS}
        if min(calibration.values()) <= 0:
            raise ConfigError("calibration constants must be positive")
    rows = {}
    for name in cp.sections():
        parts = name.split(".", 2)
        if parts[0] == "mlsa" and len(parts) == 3:
            if parts[1] not in TARGETS:
                raise ConfigError(f"[{name}]: unknown target {parts[1]!r}")
            sec = cp[name]
            if "h0" not in sec:
                raise ConfigError(f"[{name}] lacks key h0")
            rows[(parts[1], parse_number(parts[2]))] = (_bias(sec["h0"]), _schedule(sec, beta))

    bias = None
    if cp.has_section("bias_study"):
        bs = cp["bias_study"]
        bias = BiasStudyConfig(tuple(_bias(h) for h in bs["h"].split(",") if h.strip()),
                               int(parse_number(bs["iterations"])),
                               int(parse_number(bs.get("replications", ex.get("replications", "200")))),
                               _schedule(bs, beta))

    cfg = ExperimentConfig(
        model=model,
        algorithms=tuple(_words(ex.get("algorithms", "sa, nsa, mlsa"))),
        targets=tuple(_words(ex.get("targets", "var, es"))),
        epsilons=tuple(_numbers(ex.get("epsilons", ""))),
        replications=int(parse_number(ex.get("replications", "200"))),
        seed=int(ex.get("seed", "0")),
        init=_init(ex.get("init", "zero"), model),
        beta=beta, m=m, scenario=scenario, calibration=calibration,
        schedules=schedules, mlsa_rows=rows, bias=bias, source=source,
    )
    cfg.validate()
    return cfg


def bundled_config_names() -> tuple[str, ...]:
    return _BUNDLED


def load_config(path_or_name: str | Path) -> ExperimentConfig:
    """Load a config file, or one of the bundled configs by name."""
    name = str(path_or_name)
    if name in _BUNDLED:
        text = resources.files("mlsa_risk").joinpath("configs", f"{name}.cfg").read_text()
        return parse_config(text, source=name)
    path = Path(name)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))
