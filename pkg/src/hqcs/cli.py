"""Model files, run configuration and the end-to-end pipeline."""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import anharmonic, doktorov, focksim, oracle, sampling, spectrum
from .model import (Harmonic, ModelError, Morse, Polynomial, VibronicModel, DuschinskyMap, HarmonicPES,
                    convert_units, intermediate_pes, make_rotation, validate_model, UnknownUnit)
from .signs import check_sign_conditions, sign_rule_inapplicable_mass

log = logging.getLogger("hqcs")

MODES = ("hqcs", "oracle-sos", "oracle-tcf", "both")
THREADS_ENV = "HQCS_THREADS"
BUNDLED = ("morse2", "pyridine7")
CONVENTIONS = ("final_from_initial", "initial_from_final")


class ParseError(ValueError):
    """Malformed model file; the message names the line or the field."""


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# model files


def bundled_model_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ConfigError(f"no bundled model {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("hqcs") / "data" / f"{name}.json"))


def resolve_model_path(spec: str) -> Path:
    p = Path(spec)
    if not p.exists() and spec in BUNDLED:
        return bundled_model_path(spec)
    return p


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing field '{where}.{key}'" if where else f"missing field '{key}'")
    return obj[key]


def _quantity(obj, where: str, kind: str = "energy", many: bool = False):
    """Read ``{"units": u, "value": x}`` (or ``"values"``) and convert to atomic units."""
    if not isinstance(obj, dict):
        raise ParseError(f"field '{where}' must be an object with 'units' and a value")
    unit = _field(obj, "units", where)
    raw = _field(obj, "values" if many else "value", where)
    try:
        val = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field '{where}' holds non-numeric data") from None
    if many and val.ndim != 1:
        raise ParseError(f"field '{where}.values' must be a flat list")
    if not np.all(np.isfinite(val)):
        raise ParseError(f"field '{where}' holds non-finite numbers")
    if kind == "energy":
        try:
            val = convert_units(val, unit, "hartree")
        except UnknownUnit as exc:
            raise ParseError(f"field '{where}.units': {exc}") from None
    elif kind == "length":
        if str(unit).lower() not in ("au", "a.u."):
            raise ParseError(f"field '{where}.units' must be 'au' (mass-weighted atomic units)")
    elif kind == "angle":
        u = str(unit).lower()
        if u in ("deg", "degree", "degrees"):
            val = np.deg2rad(val)
        elif u not in ("rad", "radian", "radians"):
            raise ParseError(f"field '{where}.units' must be 'rad' or 'deg'")
    return val if many else float(val)


def _potential(obj: dict, where: str):
    kind = str(_field(obj, "type", where)).lower()
    if kind == "harmonic":
        return Harmonic(_quantity(_field(obj, "frequency", where), f"{where}.frequency"))
    if kind == "morse":
        depth = _quantity(_field(obj, "depth", where), f"{where}.depth")
        if "alpha" in obj:
            return Morse(depth, _quantity(obj["alpha"], f"{where}.alpha", kind="length"))
        return Morse.from_frequency(depth, _quantity(_field(obj, "frequency", where), f"{where}.frequency"))
    if kind == "polynomial":
        if "reduced" in obj:
            # V = omega * sum_j g_j x^j with x = sqrt(omega) q
            w = _quantity(_field(obj, "frequency", where), f"{where}.frequency")
            g = np.asarray(obj["reduced"], dtype=float)
            return Polynomial(tuple(w * gj * w ** (0.5 * j) for j, gj in enumerate(g, start=1)))
        coeffs = _quantity(_field(obj, "coefficients", where), f"{where}.coefficients", kind="length", many=True)
        return Polynomial(tuple(coeffs))
    raise ParseError(f"field '{where}.type': unknown potential type {kind!r}")


def model_from_dict(data: dict, theta: float | None = None) -> VibronicModel:
    if not isinstance(data, dict):
        raise ParseError("model file must hold a JSON object")
    w_i = _quantity(_field(_field(data, "initial", ""), "frequencies", "initial"), "initial.frequencies", many=True)
    pots_raw = _field(_field(data, "final", ""), "potentials", "final")
    if not isinstance(pots_raw, list):
        raise ParseError("field 'final.potentials' must be a list")
    pots = tuple(_potential(p, f"final.potentials[{k}]") for k, p in enumerate(pots_raw))
    w_f = np.array([p.harmonic_frequency for p in pots])
    n = len(w_i)

    dus = _field(data, "duschinsky", "")
    convention = dus.get("convention", "final_from_initial")
    if convention not in CONVENTIONS:
        raise ParseError(f"field 'duschinsky.convention' must be one of {CONVENTIONS}")
    if "matrix" in dus:
        try:
            S = np.asarray(dus["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise ParseError("field 'duschinsky.matrix' holds non-numeric data") from None
        if theta is not None:
            raise ConfigError("--theta needs a model whose rotation is given as 'rotations'")
    else:
        rots = []
        for k, r in enumerate(dus.get("rotations", [])):
            i, j = _field(r, "modes", f"duschinsky.rotations[{k}]")
            ang = theta if theta is not None else _quantity(
                _field(r, "angle", f"duschinsky.rotations[{k}]"), f"duschinsky.rotations[{k}].angle", kind="angle")
            rots.append(((int(i), int(j)), ang))
        try:
            S = make_rotation(n, rots)
        except ModelError as exc:
            raise ParseError(f"field 'duschinsky.rotations': {exc}") from None
    dq = _quantity(_field(dus, "displacement", "duschinsky"), "duschinsky.displacement", kind="length", many=True)
    dmap = DuschinskyMap(S, dq) if convention == "final_from_initial" else DuschinskyMap.from_inverse(S, dq)

    e_ad = _quantity(data["adiabatic_energy"], "adiabatic_energy") if "adiabatic_energy" in data else 0.0
    mu = float(data.get("transition_dipole", 1.0))
    model = VibronicModel(HarmonicPES(w_i), pots, w_f, dmap, e_ad, mu, str(data.get("name", "")))
    return validate_model(model)


def parse_model_file(path, theta: float | None = None) -> VibronicModel:
    """Read and validate a JSON model file.

    Every numeric block carries its own unit tag (``"cm-1"``, ``"eV"`` or
    ``"au"``).  ``duschinsky.convention`` states whether the matrix and
    displacement describe q_f = S q_i + dq (``final_from_initial``) or the
    inverse relation.
    """
    return model_from_dict(_load_json(path), theta)


def _load_json(path) -> dict:
    text = Path(path).read_text()
    if not text.strip():
        raise ParseError(f"{path}: empty model file")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    model: str
    d_max: int = 15
    omega_bs: int = 10_000
    omega_cs: int = 10_000
    bias: float = 1.0
    n_basis: int = anharmonic.DEFAULT_N_BASIS
    n_states: int = 15
    sigma: float = 1e-3
    seed: int | None = None
    weight_mode: str = "exact_probability"
    output: str = "hqcs_out"
    mode: str = "hqcs"
    theta: float | None = None
    workers: int = 1
    summation: str = "support"
    normalize_amplitudes: bool = False
    full_final_space: bool = False
    shift: float = 0.0
    absorption: bool = False
    grid_points: int = spectrum.DEFAULT_GRID_POINTS
    oracle_basis: int | None = None

    def __post_init__(self):
        for name in ("d_max", "omega_bs", "omega_cs", "n_basis", "n_states", "workers", "grid_points"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not self.bias >= 1:
            raise ConfigError(f"bias must be >= 1, got {self.bias}")
        if self.n_states > self.n_basis:
            raise ConfigError("n_states cannot exceed n_basis")
        if self.d_max >= self.n_basis:
            raise ConfigError("d_max must be below n_basis")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.weight_mode not in sampling.WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {sampling.WEIGHT_MODES}")
        if self.summation not in spectrum.SUMMATIONS:
            raise ConfigError(f"summation must be one of {spectrum.SUMMATIONS}")

    @classmethod
    def with_model_defaults(cls, model: str, **overrides) -> "RunConfig":
        """Fill unset fields from the model file's ``defaults`` block."""
        path = resolve_model_path(model)
        defaults = {}
        if path.exists():
            raw = _load_json(path).get("defaults", {})
            for k, v in raw.items():
                if k in ("sigma", "shift"):
                    v = _quantity(v, f"defaults.{k}")
                defaults[k] = v
        known = {f.name for f in dataclasses.fields(cls)}
        merged = {k: v for k, v in defaults.items() if k in known}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(model=model, **merged)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class RunResult:
    metadata: dict
    lines: spectrum.LineList | None = None
    hqcs: spectrum.SpectrumGrid | None = None
    oracles: dict = field(default_factory=dict)
    pairs: sampling.PairSet | None = None
    files: dict = field(default_factory=dict)


class _Timer:
    def __init__(self):
        self.stages = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = round(time.perf_counter() - self.t, 6)

        return _Ctx()


def run_pipeline(config: RunConfig, write: bool = True) -> RunResult:
    """Intermediate PES, Doktorov state, sampling, mode solves, pair sampling, spectrum."""
    timer = _Timer()
    path = resolve_model_path(config.model)
    with timer("parse"):
        model = parse_model_file(path, config.theta)
    n = model.n_modes
    if config.mode != "hqcs" and n > (2 if config.mode == "oracle-sos" else 3):
        raise ConfigError(f"oracle mode {config.mode!r} is limited to small models, this one has {n} modes")
    basis = focksim.FockBasis(n, config.d_max)  # memory guard fires here, before any allocation

    seed_seq = np.random.SeedSequence(config.seed)
    root = [int(x) for x in np.atleast_1d(seed_seq.entropy)]
    bs_seed, cs_seed = root + [0], root + [1]

    meta = {
        "model": model.name or str(path),
        "model_sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest(),
        "n_modes": n,
        "seed": seed_seq.entropy,
        "seeds": {"boson_sampling": bs_seed, "classical_sampling": cs_seed},
        "config": {k: v for k, v in dataclasses.asdict(config).items() if k != "output"},
    }
    result = RunResult(meta)
    out = Path(config.output)
    if write:
        out.mkdir(parents=True, exist_ok=True)

    grid = None
    if config.mode in ("hqcs", "both"):
        with timer("intermediate_pes"):
            omega_m = intermediate_pes(model).frequencies
            loose = check_sign_conditions(model.initial.frequencies, omega_m)
        with timer("doktorov"):
            params = doktorov.decompose(doktorov.build_dimensionless(
                model.initial.frequencies, omega_m, model.duschinsky.matrix, model.duschinsky.displacement))
        with timer("focksim_amplitudes"):
            table = focksim.doktorov_state(params, basis)
        with timer("focksim_sample"):
            configs = focksim.sample(table, config.omega_bs, bs_seed, workers=config.workers)
        with timer("anharmonic"):
            sols = anharmonic.solve_modes(model, omega_m, config.n_basis, config.n_states)
        dq = model.duschinsky.displacement
        with timer("sampling"):
            pairs = sampling.sample_pairs(configs, sols, sampling.CsConfig(
                config.omega_cs, config.bias, cs_seed, config.weight_mode), table)
            comp_raw = sampling.completeness(pairs, configs, table, dq, sols, normalize=False)
            comp_norm = sampling.completeness(pairs, configs, table, dq, sols, normalize=True)
        with timer("spectrum"):
            finals = spectrum.all_final_configs(sols) if config.full_final_space else None
            lines = spectrum.line_list(pairs, configs, table, dq, sols, model, summation=config.summation,
                                       normalize=config.normalize_amplitudes, absorption=config.absorption,
                                       final_configs=finals)
            hq = spectrum.broaden(lines, config.sigma, n_points=config.grid_points)
            grid = hq.energy
        meta.update({
            "work_cutoff": table.work_cutoff,
            "d_max": config.d_max,
            "norm_deficit": focksim.norm_deficit(table),
            "completeness": comp_raw,
            "completeness_normalized": comp_norm,
            **pairs.stats(),
            "distinct_boson_configs": len(configs),
            "n_lines": len(lines),
            "sign_rule_loose_modes": np.flatnonzero(loose).tolist(),
            "sign_rule_inapplicable_mass": sign_rule_inapplicable_mass(
                configs.configs, table.probabilities[configs.indices], model.initial.frequencies,
                omega_m, model.duschinsky.matrix),
            "squeezing": params.squeezing.tolist(),
        })
        result.lines, result.hqcs, result.pairs = lines, hq, pairs
        if write:
            result.files["spectrum"] = str(out / "spectrum.csv")
            hq.write_csv(result.files["spectrum"], normalize=True, shift=config.shift)
            result.files["pairs"] = str(out / "pairs.tsv")
            pairs.write(result.files["pairs"])

    if config.mode in ("oracle-sos", "both", "oracle-tcf"):
        kind = "sos" if config.mode == "oracle-sos" else "tcf"
        with timer(f"oracle_{kind}"):
            if kind == "sos":
                ref_lines = oracle.exact_spectrum_sos(model, config.oracle_basis, absorption=config.absorption)
                ref = spectrum.broaden(ref_lines, config.sigma, grid=grid, n_points=config.grid_points)
            else:
                ref = oracle.tcf_spectrum(model, config.sigma, n_basis=config.oracle_basis, grid=grid,
                                          absorption=config.absorption)
        result.oracles[kind] = ref
        if write:
            result.files[f"oracle_{kind}"] = str(out / f"spectrum_oracle_{kind}.csv")
            ref.write_csv(result.files[f"oracle_{kind}"], normalize=True, shift=config.shift)

    meta["shift_hartree"] = config.shift
    meta["sigma_hartree"] = config.sigma
    meta["stage_seconds"] = timer.stages
    meta["files"] = result.files
    if write:
        with open(out / "metadata.json", "w") as fh:
            json.dump(meta, fh, indent=2, default=_json_default)
    return result


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


# ---------------------------------------------------------------------------
# command line


def _energy_arg(text: str) -> float:
    """'1e-3' (hartree) or a value with a unit suffix, e.g. '219.5cm-1' or '0.1eV'."""
    t = text.strip()
    for unit in ("cm-1", "eV", "ev", "hartree", "au"):
        if t.endswith(unit):
            return float(convert_units(float(t[: -len(unit)]), unit, "hartree"))
    return float(t)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hqcs", description="Vibronic spectra by hybrid boson/classical sampling.")
    p.add_argument("model", help=f"model JSON file or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--d-max", type=int, help="per-mode quanta cutoff for the Fock simulator")
    p.add_argument("--omega-bs", type=int, help="number of boson-sampling draws")
    p.add_argument("--omega-cs", type=int, help="number of classical sampling loops")
    p.add_argument("--bias", type=float, help="bias k >= 1 for the v_f draws")
    p.add_argument("--n-basis", type=int, help="primitive basis size per mode")
    p.add_argument("--n-states", type=int, help="final eigenstates kept per mode")
    p.add_argument("--sigma", type=_energy_arg, help="Gaussian width (hartree, or with cm-1/eV suffix)")
    p.add_argument("--seed", type=int)
    p.add_argument("--weight-mode", choices=sampling.WEIGHT_MODES)
    p.add_argument("--output", "-o", help="output directory")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--theta", type=float, help="override every rotation angle of the model (rad)")
    p.add_argument("--workers", type=int, default=int(os.environ.get(THREADS_ENV, "1")),
                   help=f"threads for boson sampling (default from ${THREADS_ENV})")
    p.add_argument("--summation", choices=spectrum.SUMMATIONS)
    p.add_argument("--normalize-amplitudes", action="store_true", default=None)
    p.add_argument("--full-final-space", action="store_true", default=None)
    p.add_argument("--shift", type=_energy_arg, help="constant shift applied to the output energy axis")
    p.add_argument("--absorption", action="store_true", default=None)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--oracle-basis", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


EXIT_CODES = ((ConfigError, 2), (ParseError, 3), (ModelError, 4), (MemoryError, 5))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    opts = {k: v for k, v in vars(args).items() if k not in ("model", "verbose")}
    try:
        cfg = RunConfig.with_model_defaults(args.model, **opts)
        res = run_pipeline(cfg)
    except Exception as exc:  # map library errors onto exit codes
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                print(f"hqcs: {type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        raise
    meta = res.metadata
    if "completeness" in meta:
        log.info("completeness %.4f  M_m=%d M_f=%d M_pair=%d", meta["completeness"], meta["M_m"],
                 meta["M_f"], meta["M_pair"])
    for name, path in res.files.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
