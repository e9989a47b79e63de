"""Run configuration files: flat sections of key = value lines.

Schema (defaults in brackets; unknown sections or keys are hard errors):

* ``[oracle]`` -- exactly one source: ``testbed = codebook | quadratic |
  linear`` or ``command = <worker argv>``. Codebook keys: ``alphabet``
  [ACGT], ``length`` [6], ``cache`` [false]. Smooth keys: ``d``,
  ``target`` [zeros] / ``a`` [ones]. Command keys: ``d``, ``properties``,
  ``similarities``, ``cache`` [false].
* ``[objective]`` -- ``mode = property_constrained | similarity_constrained
  | loss_threshold``; constraint entries ``constraint.N = <name>
  <direction> <threshold>`` (property mode) or ``<name> <threshold>``
  (similarity mode); score entries ``score.N = <name> <coefficient>``;
  ``refs`` [the start sequence]; ``threshold`` (loss_threshold mode).
* ``[solver]`` -- ``optimizer`` [adam], ``alpha0`` [0.05], ``T`` [20],
  ``Q`` [50], ``beta`` [10.0], ``restarts`` [1],
  ``stop_on_first_success`` [false], ``seed`` [0], ``step_schedule``
  [constant], ``adam_epsilon`` [1e-8].
* ``[start]`` -- ``sequence = <symbols>`` or ``latent = zeros | ones |
  <whitespace-separated floats>``.
* ``[output]`` -- ``dir`` [out], ``dump_latents`` [true].
* ``[stability]`` -- ``starts`` [20], ``restarts_list``, ``q_list``.
* ``[landscape]`` -- ``mode`` [principal], ``resolution`` [41 41],
  ``x_range``, ``y_range`` (defaults per grid mode).
"""

import hashlib
import shlex
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .objective import (PROPERTY_CONSTRAINED, SIMILARITY_CONSTRAINED, Objective,
                        PropertyConstraint, ScoreTerm, SimilarityConstraint)
from .oracle import SubprocessOracle
from .testbed import (CodebookDecoder, LinearProblem, QuadraticProblem,
                      SmoothObjective, make_codebook_suite)
from .validation import as_latent

LOSS_THRESHOLD = "loss_threshold"

_ALLOWED = {
    "oracle": {"testbed", "command", "alphabet", "length", "cache", "d",
               "target", "a", "properties", "similarities"},
    "objective": {"mode", "refs", "threshold"},  # plus constraint.* / score.*
    "solver": {"optimizer", "alpha0", "T", "Q", "beta", "restarts",
               "stop_on_first_success", "seed", "step_schedule", "adam_epsilon"},
    "start": {"sequence", "latent"},
    "output": {"dir", "dump_latents"},
    "stability": {"starts", "restarts_list", "q_list"},
    "landscape": {"mode", "resolution", "x_range", "y_range"},
}


def _objective_key_ok(key):
    if key in _ALLOWED["objective"]:
        return True
    for prefix in ("constraint", "score"):
        if key == prefix:
            return True
        if key.startswith(prefix + "."):
            suffix = key[len(prefix) + 1:]
            return suffix.isdigit()
    return False


def parse_config_text(text, origin="<config>"):
    """Parse into {section: {key: (value, lineno)}}, rejecting unknown keys."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _ALLOWED:
                raise ConfigError(f"{origin}:{lineno}: unknown section [{name}]")
            current = sections.setdefault(name, {})
            continue
        if current is None:
            raise ConfigError(f"{origin}:{lineno}: key outside any [section]")
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        section = next(s for s, keys in sections.items() if keys is current)
        ok = _objective_key_ok(key) if section == "objective" else key in _ALLOWED[section]
        if not ok:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r} in [{section}]")
        if key in current:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        current[key] = (value, lineno)
    return sections


def _context(origin, section, key, lineno):
    return f"{origin}:{lineno}: [{section}] {key}"


class RunConfig:
    """Parsed and validated configuration, with canonical hashing."""

    def __init__(self, sections, origin="<config>"):
        self.sections = sections
        self.origin = origin

    @classmethod
    def from_file(cls, path):
        try:
            text = open(path, encoding="utf-8").read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls(parse_config_text(text, origin=str(path)), origin=str(path))

    # -- raw access ----------------------------------------------------------

    def get(self, section, key, default=None):
        entry = self.sections.get(section, {}).get(key)
        return default if entry is None else entry[0]

    def set(self, section, key, value):
        self.sections.setdefault(section, {})[key] = (str(value), 0)

    def drop(self, section, key):
        self.sections.get(section, {}).pop(key, None)

    def _lineno(self, section, key):
        entry = self.sections.get(section, {}).get(key)
        return entry[1] if entry else 0

    def _typed(self, section, key, convert, default, kind):
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return convert(value)
        except (ValueError, TypeError):
            ctx = _context(self.origin, section, key, self._lineno(section, key))
            raise ConfigError(f"{ctx}: expected {kind}, got {value!r}") from None

    def get_float(self, section, key, default=None):
        return self._typed(section, key, float, default, "a number")

    def get_int(self, section, key, default=None):
        return self._typed(section, key, int, default, "an integer")

    def get_bool(self, section, key, default=None):
        def convert(v):
            lowered = v.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(v)
        return self._typed(section, key, convert, default, "a boolean")

    def get_floats(self, section, key, default=None):
        return self._typed(section, key, lambda v: [float(f) for f in v.split()],
                           default, "whitespace-separated numbers")

    def get_ints(self, section, key, default=None):
        return self._typed(section, key, lambda v: [int(f) for f in v.split()],
                           default, "whitespace-separated integers")

    # -- canonical form --------------------------------------------------------

    def canonical_text(self):
        lines = []
        for section in sorted(self.sections):
            for key in sorted(self.sections[section]):
                lines.append(f"{section}.{key} = {self.sections[section][key][0]}")
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


@dataclass
class RunPlan:
    """Everything a command needs: suite, objective, solver kwargs, start."""

    objective: object
    suite: object
    suite_factory: object
    z0: np.ndarray
    solver_kwargs: dict
    seed: int
    out_dir: str
    dump_latents: bool
    config_hash: str
    start_sequence: str = None
    stability: dict = field(default_factory=dict)
    landscape: dict = field(default_factory=dict)


def _fail(cfg, section, key, message):
    ctx = _context(cfg.origin, section, key, cfg._lineno(section, key))
    raise ConfigError(f"{ctx}: {message}")


def _parse_entries(cfg, prefix):
    """Collect ``prefix`` / ``prefix.N`` values in ascending N order."""
    entries = []
    for key, (value, lineno) in cfg.sections.get("objective", {}).items():
        if key == prefix:
            entries.append((0, key, value, lineno))
        elif key.startswith(prefix + "."):
            entries.append((int(key.split(".", 1)[1]), key, value, lineno))
    return [(k, v, ln) for _, k, v, ln in sorted(entries)]


def _build_objective(cfg, default_refs):
    mode = cfg.get("objective", "mode")
    if mode is None:
        raise ConfigError(f"{cfg.origin}: [objective] mode is required")
    if mode == LOSS_THRESHOLD:
        return None  # assembled with the smooth problem later
    if mode not in (PROPERTY_CONSTRAINED, SIMILARITY_CONSTRAINED):
        _fail(cfg, "objective", "mode", f"unknown mode {mode!r}")

    constraints = []
    for key, value, lineno in _parse_entries(cfg, "constraint"):
        fields = value.split()
        try:
            if mode == PROPERTY_CONSTRAINED:
                if len(fields) != 3:
                    raise ValueError
                constraints.append(PropertyConstraint(
                    name=fields[0], direction=fields[1], threshold=float(fields[2])))
            else:
                if len(fields) != 2:
                    raise ValueError
                constraints.append(SimilarityConstraint(
                    name=fields[0], threshold=float(fields[1])))
        except ValueError:
            want = ("<name> <at-least|at-most> <threshold>"
                    if mode == PROPERTY_CONSTRAINED else "<name> <threshold>")
            raise ConfigError(
                f"{_context(cfg.origin, 'objective', key, lineno)}: "
                f"expected '{want}', got {value!r}") from None

    score_terms = []
    for key, value, lineno in _parse_entries(cfg, "score"):
        fields = value.split()
        try:
            if len(fields) != 2:
                raise ValueError
            score_terms.append(ScoreTerm(name=fields[0], coefficient=float(fields[1])))
        except ValueError:
            raise ConfigError(
                f"{_context(cfg.origin, 'objective', key, lineno)}: "
                f"expected '<name> <coefficient>', got {value!r}") from None

    refs = cfg.get("objective", "refs")
    refs = refs.split() if refs is not None else default_refs
    if not refs:
        _fail(cfg, "objective", "refs",
              "a reference set is required when the start is not a sequence")
    return Objective(mode=mode, constraints=constraints, score_terms=score_terms,
                     refs=refs)


def _smooth_problem(cfg):
    kind = cfg.get("oracle", "testbed")
    d = cfg.get_int("oracle", "d")
    if d is None or d < 1:
        _fail(cfg, "oracle", "d", "smooth problems need a positive dimension d")
    if kind == "quadratic":
        raw = cfg.get("oracle", "target", "zeros")
        target = (np.zeros(d) if raw == "zeros"
                  else np.ones(d) if raw == "ones"
                  else as_latent(cfg.get_floats("oracle", "target"), d, name="target"))
        return QuadraticProblem(target=target)
    raw = cfg.get("oracle", "a", "ones")
    a = (np.ones(d) if raw == "ones"
         else np.zeros(d) if raw == "zeros"
         else as_latent(cfg.get_floats("oracle", "a"), d, name="a"))
    return LinearProblem(a=a)


def _resolve_latent(cfg, dim):
    raw = cfg.get("start", "latent")
    if raw is None:
        _fail(cfg, "start", "latent",
              "this oracle cannot encode sequences; provide a latent start")
    if raw == "zeros":
        return np.zeros(dim)
    if raw == "ones":
        return np.ones(dim)
    return as_latent(cfg.get_floats("start", "latent"), dim, name="start latent")


def build_run_plan(cfg: RunConfig):
    """Validate the whole config and construct the run ingredients."""
    oracle_sec = cfg.sections.get("oracle", {})
    has_testbed = "testbed" in oracle_sec
    has_command = "command" in oracle_sec
    if has_testbed == has_command:
        raise ConfigError(
            f"{cfg.origin}: [oracle] needs exactly one of 'testbed' or 'command'")

    solver_kwargs = {
        "optimizer": cfg.get("solver", "optimizer", "adam"),
        "alpha0": cfg.get_float("solver", "alpha0", 0.05),
        "n_iter": cfg.get_int("solver", "T", 20),
        "n_queries": cfg.get_int("solver", "Q", 50),
        "beta": cfg.get_float("solver", "beta", 10.0),
        "restarts": cfg.get_int("solver", "restarts", 1),
        "stop_on_first_success": cfg.get_bool("solver", "stop_on_first_success", False),
        "seed": cfg.get_int("solver", "seed", 0),
        "step_schedule": cfg.get("solver", "step_schedule", "constant"),
        "adam_epsilon": cfg.get_float("solver", "adam_epsilon", 1e-8),
    }
    seed = solver_kwargs["seed"]

    mode = cfg.get("objective", "mode")
    testbed_kind = cfg.get("oracle", "testbed")
    start_sequence = cfg.get("start", "sequence")

    if mode == LOSS_THRESHOLD and testbed_kind not in ("quadratic", "linear"):
        _fail(cfg, "objective", "mode",
              f"mode = {LOSS_THRESHOLD} requires a quadratic or linear testbed")
    if testbed_kind in ("quadratic", "linear"):
        if mode != LOSS_THRESHOLD:
            _fail(cfg, "objective", "mode",
                  f"smooth testbeds use mode = {LOSS_THRESHOLD}")
        problem = _smooth_problem(cfg)
        objective = SmoothObjective(
            problem, success_loss=cfg.get_float("objective", "threshold"))
        d = cfg.get_int("oracle", "d")
        z0 = _resolve_latent(cfg, d)
        suite = None
        suite_factory = lambda: None
    else:
        objective = _build_objective(
            cfg, default_refs=[start_sequence] if start_sequence else None)
        cache = cfg.get_bool("oracle", "cache", False)
        start_encoder = None
        if has_command:
            command = shlex.split(cfg.get("oracle", "command"))
            if cfg.get("oracle", "alphabet") or testbed_kind == "codebook":
                # codebook geometry declared: dimension and the one-hot start
                # embedding are derivable locally even for external workers
                alphabet = cfg.get("oracle", "alphabet", "ACGT")
                length = cfg.get_int("oracle", "length", 6)
                d = len(alphabet) * length
                start_encoder = CodebookDecoder(alphabet=alphabet, length=length).encode
            else:
                d = cfg.get_int("oracle", "d")
                if d is None:
                    _fail(cfg, "oracle", "command",
                          "subprocess oracles need the latent dimension d")
            declared_props = cfg.get("oracle", "properties")
            declared_sims = cfg.get("oracle", "similarities")
            prop_names = (declared_props.split() if declared_props
                          else objective.property_names)
            sim_names = (declared_sims.split() if declared_sims
                         else objective.similarity_names)
            suite_factory = lambda: SubprocessOracle(
                command, dim=d, property_names=prop_names,
                similarity_names=sim_names, cache=cache)
        elif testbed_kind == "codebook":
            alphabet = cfg.get("oracle", "alphabet", "ACGT")
            length = cfg.get_int("oracle", "length", 6)
            suite_factory = lambda: make_codebook_suite(
                alphabet=alphabet, length=length,
                property_names=objective.property_names,
                similarity_names=objective.similarity_names, cache=cache)
        else:
            _fail(cfg, "oracle", "testbed", f"unknown testbed {testbed_kind!r}")
        suite = suite_factory()
        objective.check_resolvable(suite)
        if start_sequence is not None:
            if suite.has_encoder():
                z0 = suite.encode(start_sequence)
            elif start_encoder is not None:
                z0 = start_encoder(start_sequence)
            else:
                _fail(cfg, "start", "sequence",
                      "this oracle cannot encode sequences; provide a latent start")
        else:
            z0 = _resolve_latent(cfg, suite.dim)

    stability = {
        "starts": cfg.get_int("stability", "starts", 20),
        "restarts_list": cfg.get_ints("stability", "restarts_list"),
        "q_list": cfg.get_ints("stability", "q_list"),
    }
    landscape = {
        "mode": cfg.get("landscape", "mode", "principal"),
        "resolution": tuple(cfg.get_ints("landscape", "resolution", [41, 41])),
        "x_range": cfg.get_floats("landscape", "x_range"),
        "y_range": cfg.get_floats("landscape", "y_range"),
    }
    if landscape["mode"] not in ("principal", "random"):
        _fail(cfg, "landscape", "mode", f"unknown mode {landscape['mode']!r}")

    return RunPlan(
        objective=objective, suite=suite, suite_factory=suite_factory, z0=z0,
        solver_kwargs=solver_kwargs, seed=seed,
        out_dir=cfg.get("output", "dir", "out"),
        dump_latents=cfg.get_bool("output", "dump_latents", True),
        config_hash=cfg.config_hash(), start_sequence=start_sequence,
        stability=stability, landscape=landscape,
    )
