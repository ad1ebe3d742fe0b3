"""Run configuration: key=value files, flag overrides, and manifest echo.

A configuration is a flat set of `key = value` lines ('#' starts a comment
line; blank lines are skipped).  Run-level keys are bare; hyperparameters
of the selected prior carry a `<prior>.` prefix (`mgp.nu1 = 3.0`).  Every
default is materialized at parse time, and the resolved configuration can
be echoed to a manifest whose re-parse reproduces it field for field.

Resolution order: built-in defaults, then the file, then explicit
overrides (command-line flags).  Unknown keys are rejected by name, and
invariant violations name the offending field.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .bench import DEFAULT_RUN_LENGTHS, PRIOR_NAMES, SimDesign, parse_designs
from .core import AdaptationSchedule, CorePriors
from .cusp import CuspHyper
from .dists import ParameterError
from .ibp import IbpHyper
from .mgp import MgpHyper

__all__ = [
    "CONFIG_SCHEMA",
    "ConfigError",
    "RunConfig",
    "read_key_values",
    "parse_config",
]

CONFIG_SCHEMA = "infactor-config-v1"

_AUTO = "auto"

MODES = ("fit", "bench")

# key -> (type tag, default).  _PRIOR_DEFAULT resolves against the chosen
# prior's run lengths; None defaults are mode-dependent and filled later.
_PRIOR_DEFAULT = object()

_RUN_KEYS: dict[str, tuple[str, object]] = {
    "mode": ("str", "bench"),
    "prior": ("str", None),
    "seed": ("int", 1234),
    "iterations": ("int", _PRIOR_DEFAULT),
    "burn_in": ("int", _PRIOR_DEFAULT),
    "chains": ("int", 1),
    "replicates": ("int", 10),
    "designs": ("str", None),
    "data": ("str", None),
    "out": ("str", "infactor_out"),
    "alpha0": ("float_or_auto", _AUTO),
    "alpha1": ("float_or_auto", _AUTO),
    "gate": ("int_or_auto", _AUTO),
    "initial_k": ("int_or_auto", _AUTO),
    "idio_shape": ("float", 1.0),
    "idio_scale": ("float", 0.25),
}

# prior hyperparameter keys, flattened; mgp shape priors split into
# shape/rate pairs so the file format stays scalar-valued
_HYPER_KEYS: dict[str, tuple[tuple[str, str], ...]] = {
    "mgp": (
        ("nu1", "float"),
        ("nu2", "float"),
        ("b1", "float"),
        ("b2", "float"),
        ("a1_shape", "float"),
        ("a1_rate", "float"),
        ("a2_shape", "float"),
        ("a2_rate", "float"),
        ("proposal_sd_a1", "float"),
        ("proposal_sd_a2", "float"),
        ("redundancy_threshold", "float"),
        ("redundancy_proportion", "float"),
    ),
    "cusp": (
        ("stick_alpha", "float"),
        ("theta_shape", "float"),
        ("theta_scale", "float"),
        ("spike_variance", "float"),
        ("slab_form", "str"),
    ),
    "ibp": (
        ("beta_shape", "float"),
        ("beta_rate", "float"),
        ("alpha_shape", "float"),
        ("alpha_rate", "float"),
        ("birth_tuning", "float"),
        ("prior_odds", "str"),
    ),
}

_HYPER_CLASSES = {"mgp": MgpHyper, "cusp": CuspHyper, "ibp": IbpHyper}


class ConfigError(ValueError):
    """Configuration file or flag rejected; the message names the cause."""


def _parse_typed(key: str, kind: str, raw):
    """Convert one raw value (string or already-typed) per its declared kind."""
    if kind.endswith("_or_auto") and isinstance(raw, str) and raw == _AUTO:
        return _AUTO
    base = kind.replace("_or_auto", "")
    try:
        if base == "int":
            if isinstance(raw, bool):
                raise ValueError
            if isinstance(raw, int):
                return raw
            return int(str(raw), 10)
        if base == "float":
            if isinstance(raw, bool):
                raise ValueError
            if isinstance(raw, (int, float)):
                return float(raw)
            return float(str(raw))
    except ValueError:
        expected = "an integer" if base == "int" else "a number"
        if kind.endswith("_or_auto"):
            expected += " or 'auto'"
        raise ConfigError(f"{key}: expected {expected}, got {raw!r}") from None
    return str(raw)


def read_key_values(path: str | Path) -> dict[str, str]:
    """Read a key=value file; '#' lines are comments, blanks skipped."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration (every default materialized)."""

    mode: str
    prior: str
    seed: int
    iterations: int
    burn_in: int
    chains: int
    replicates: int
    designs: str | None
    data: str | None
    out: str
    alpha0: float | None  # None: resolve from the data shape at run time
    alpha1: float | None
    gate: int
    initial_k: int | None
    idio_shape: float
    idio_scale: float
    hyper: MgpHyper | CuspHyper | IbpHyper

    # -- derived views -------------------------------------------------------

    def design_list(self) -> list[SimDesign]:
        if self.designs is None:
            raise ConfigError("designs: not set (fit-mode configuration)")
        return parse_designs(self.designs)

    def core_priors(self) -> CorePriors:
        return CorePriors(idio_shape=self.idio_shape, idio_scale=self.idio_scale)

    def sampler_overrides(self) -> dict:
        """Constructor overrides for make_sampler from the resolved config."""
        over: dict = {"hyper": self.hyper, "core_priors": self.core_priors()}
        if self.alpha0 is not None:
            over["schedule"] = AdaptationSchedule(
                alpha0=self.alpha0, alpha1=self.alpha1, burn_in_gate=self.gate
            )
        if self.initial_k is not None:
            key = "initial_h" if self.prior == "cusp" else "initial_k"
            over[key] = self.initial_k
        return over

    # -- manifest echo ---------------------------------------------------------

    def to_manifest(self, extra_comments: tuple[str, ...] = ()) -> str:
        """Key=value echo of the resolved config; re-parsing reproduces it.

        `extra_comments` (provenance: versions, wall time, host) are
        prepended as '#' lines, invisible to the parser.
        """

        def show(v):
            if v is None:
                return _AUTO
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [f"# schema={CONFIG_SCHEMA}"]
        lines += [f"# {c}" for c in extra_comments]
        for name in (
            "mode",
            "prior",
            "seed",
            "iterations",
            "burn_in",
            "chains",
            "replicates",
        ):
            lines.append(f"{name} = {show(getattr(self, name))}")
        if self.designs is not None:
            lines.append(f"designs = {self.designs}")
        if self.data is not None:
            lines.append(f"data = {self.data}")
        lines.append(f"out = {self.out}")
        for name in ("alpha0", "alpha1"):
            lines.append(f"{name} = {show(getattr(self, name))}")
        lines.append(f"gate = {self.gate}")
        lines.append(f"initial_k = {show(self.initial_k)}")
        lines.append(f"idio_shape = {show(self.idio_shape)}")
        lines.append(f"idio_scale = {show(self.idio_scale)}")
        for key, value in self._hyper_items():
            lines.append(f"{self.prior}.{key} = {show(value)}")
        return "\n".join(lines) + "\n"

    def _hyper_items(self) -> list[tuple[str, object]]:
        if self.prior == "mgp":
            h: MgpHyper = self.hyper
            return [
                ("nu1", h.nu1),
                ("nu2", h.nu2),
                ("b1", h.b1),
                ("b2", h.b2),
                ("a1_shape", h.a1_prior[0]),
                ("a1_rate", h.a1_prior[1]),
                ("a2_shape", h.a2_prior[0]),
                ("a2_rate", h.a2_prior[1]),
                ("proposal_sd_a1", h.proposal_sd_a1),
                ("proposal_sd_a2", h.proposal_sd_a2),
                ("redundancy_threshold", h.redundancy_threshold),
                ("redundancy_proportion", h.redundancy_proportion),
            ]
        return [(f.name, getattr(self.hyper, f.name)) for f in fields(self.hyper)]


def _build_hyper(prior: str, values: dict[str, object]):
    """Construct the prior's hyperparameter dataclass from flat key values."""
    try:
        if prior == "mgp":
            return MgpHyper(
                nu1=values["nu1"],
                nu2=values["nu2"],
                b1=values["b1"],
                b2=values["b2"],
                a1_prior=(values["a1_shape"], values["a1_rate"]),
                a2_prior=(values["a2_shape"], values["a2_rate"]),
                proposal_sd_a1=values["proposal_sd_a1"],
                proposal_sd_a2=values["proposal_sd_a2"],
                redundancy_threshold=values["redundancy_threshold"],
                redundancy_proportion=values["redundancy_proportion"],
            )
        return _HYPER_CLASSES[prior](**values)
    except ParameterError as exc:
        raise ConfigError(f"{prior} hyperparameters: {exc}") from exc


def _hyper_defaults(prior: str) -> dict[str, object]:
    cls = _HYPER_CLASSES[prior]
    base = cls()
    if prior == "mgp":
        return {
            "nu1": base.nu1,
            "nu2": base.nu2,
            "b1": base.b1,
            "b2": base.b2,
            "a1_shape": base.a1_prior[0],
            "a1_rate": base.a1_prior[1],
            "a2_shape": base.a2_prior[0],
            "a2_rate": base.a2_prior[1],
            "proposal_sd_a1": base.proposal_sd_a1,
            "proposal_sd_a2": base.proposal_sd_a2,
            "redundancy_threshold": base.redundancy_threshold,
            "redundancy_proportion": base.redundancy_proportion,
        }
    return {f.name: getattr(base, f.name) for f in fields(base)}


_DEFAULT_DESIGNS = "6x2,10x3,30x5"


def parse_config(
    path: str | Path | None = None,
    overrides: dict[str, object] | None = None,
) -> RunConfig:
    """Resolve a configuration from an optional file plus explicit overrides.

    Overrides (typically command-line flags) win over the file, which wins
    over built-in defaults.  Returns the fully materialized RunConfig.
    Raises ConfigError listing unknown keys or naming violated fields.
    """
    raw: dict[str, object] = {}
    if path is not None:
        raw.update(read_key_values(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    # the prior must resolve first: it scopes the hyperparameter namespace
    prior = raw.get("prior")
    if prior is None:
        raise ConfigError("prior: required (one of mgp, cusp, ibp)")
    prior = str(prior)
    if prior not in PRIOR_NAMES:
        raise ConfigError(f"prior: must be one of {', '.join(PRIOR_NAMES)}; got {prior!r}")

    hyper_kinds = dict(_HYPER_KEYS[prior])
    known = set(_RUN_KEYS) | {f"{prior}.{k}" for k in hyper_kinds}
    unknown = sorted(k for k in raw if k not in known)
    if unknown:
        raise ConfigError("unknown configuration keys: " + ", ".join(unknown))

    values: dict[str, object] = {}
    for key, (kind, default) in _RUN_KEYS.items():
        if key in raw:
            values[key] = _parse_typed(key, kind, raw[key])
        else:
            values[key] = default
    hyper_values: dict[str, object] = _hyper_defaults(prior)
    for key, kind in _HYPER_KEYS[prior]:
        dotted = f"{prior}.{key}"
        if dotted in raw:
            hyper_values[key] = _parse_typed(dotted, kind, raw[dotted])

    mode = str(values["mode"])
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {', '.join(MODES)}; got {mode!r}")

    # materialize run lengths from the prior's defaults
    default_iters, default_burn = DEFAULT_RUN_LENGTHS[prior]
    iterations = values["iterations"]
    burn_in = values["burn_in"]
    iterations = default_iters if iterations is _PRIOR_DEFAULT else iterations
    burn_in = default_burn if burn_in is _PRIOR_DEFAULT else burn_in

    # named-field invariants
    if iterations < 1:
        raise ConfigError(f"iterations: must be >= 1, got {iterations}")
    if burn_in < 0:
        raise ConfigError(f"burn_in: must be >= 0, got {burn_in}")
    if burn_in >= iterations:
        raise ConfigError(
            f"burn_in: must be smaller than iterations, got burn_in={burn_in} "
            f">= iterations={iterations}"
        )
    if values["chains"] < 1:
        raise ConfigError(f"chains: must be >= 1, got {values['chains']}")
    if values["replicates"] < 1:
        raise ConfigError(f"replicates: must be >= 1, got {values['replicates']}")
    if not 0 <= values["seed"] < 2**64:
        raise ConfigError("seed: must fit in an unsigned 64-bit integer")
    for name in ("idio_shape", "idio_scale"):
        if values[name] <= 0:
            raise ConfigError(f"{name}: must be > 0, got {values[name]}")

    # adaptation: alphas come as a pair or not at all; gate defaults to burn-in
    if prior == "ibp":
        for name in ("alpha0", "alpha1"):
            if values[name] != _AUTO:
                raise ConfigError(
                    f"{name}: not used by the ibp prior (the feature pool "
                    "resizes every sweep, not on a diminishing schedule)"
                )
    alpha0 = None if values["alpha0"] == _AUTO else values["alpha0"]
    alpha1 = None if values["alpha1"] == _AUTO else values["alpha1"]
    if (alpha0 is None) != (alpha1 is None):
        missing = "alpha1" if alpha1 is None else "alpha0"
        raise ConfigError(f"{missing}: set both alpha0 and alpha1 or neither")
    if alpha1 is not None and alpha1 > 0:
        raise ConfigError(f"alpha1: must be <= 0 so adaptation diminishes, got {alpha1}")
    gate = burn_in if values["gate"] == _AUTO else values["gate"]
    if gate < 0:
        raise ConfigError(f"gate: must be >= 0, got {gate}")
    initial_k = None if values["initial_k"] == _AUTO else values["initial_k"]
    if initial_k is not None and initial_k < 1:
        raise ConfigError(f"initial_k: must be >= 1, got {initial_k}")

    # cusp adaptation rates are shape-independent: materialize them
    if alpha0 is None and prior == "cusp":
        alpha0, alpha1 = -1.0, -5e-4

    designs = values["designs"]
    data = values["data"]
    if mode == "bench":
        if data is not None:
            raise ConfigError("data: only valid in fit mode")
        if designs is None:
            designs = _DEFAULT_DESIGNS
        try:
            parsed = parse_designs(str(designs))
        except ValueError as exc:
            raise ConfigError(f"designs: {exc}") from exc
        designs = ",".join(d.label for d in parsed)
        # uniform-regime design grids pin the mgp adaptation rates at parse time
        if alpha0 is None and prior == "mgp":
            regimes = {d.p < d.n_times for d in parsed}
            if regimes == {True}:
                alpha0, alpha1 = -0.5, -3e-4
            elif regimes == {False}:
                alpha0, alpha1 = -1.0, -5e-4
    else:
        if designs is not None:
            raise ConfigError("designs: only valid in bench mode")
        if data is None:
            raise ConfigError("data: required in fit mode")
        designs = None

    hyper = _build_hyper(prior, hyper_values)

    return RunConfig(
        mode=mode,
        prior=prior,
        seed=values["seed"],
        iterations=iterations,
        burn_in=burn_in,
        chains=values["chains"],
        replicates=values["replicates"],
        designs=designs,
        data=None if data is None else str(data),
        out=str(values["out"]),
        alpha0=alpha0,
        alpha1=alpha1,
        gate=gate,
        initial_k=initial_k,
        idio_shape=values["idio_shape"],
        idio_scale=values["idio_scale"],
        hyper=hyper,
    )
