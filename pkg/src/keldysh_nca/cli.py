"""Command-line front end: config parsing, dispatch, CSV/JSON emission.

Configuration files are flat ``key = value`` lines with dotted section
prefixes (a TOML-compatible subset); ``#`` starts a comment.  Unknown keys
are rejected by name.  Every CSV is written with 17 significant digits and
no timestamps, so identical configurations produce byte-identical files;
run metadata goes to a JSON sidecar.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bath import SpectralDensity, lamb_shift
from .errors import (
    KeldyshNcaError,
    NotConverged,
    ParseError,
    ValidationError,
)
from .keldysh import (
    SpectralFunction,
    circ_product,
    dyson,
    fdr_check,
    from_spectral,
    to_spectral,
)
from .nca import (
    ModelConfig,
    SolverConfig,
    born,
    g2,
    nca_solve,
    relative_l2_gap,
    retarded_compare,
    sum_rule,
)
from .numerics import FrequencyGrid, ThermalParams, coth_half
from .weakcorr import (
    LinearModeModel,
    SpinBosonModel,
    kms_check,
    mode_correlator,
    spin_correlator,
)

COMMANDS = ("weak-corr", "spin-corr", "lamb-shift", "greens", "fdr-check",
            "compare", "property-check")

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CHECK_FAILED = 3

# key -> (default, parser, validator message or None)
_SCHEMA = {
    "omega0": (1.0, float, lambda v: v > 0 or "must be > 0"),
    "beta": (1.0, float, lambda v: v > 0 or "must be > 0"),
    "eta": (-1, int, lambda v: v in (-1, 1) or "must be -1 or +1"),
    "lambda_sq": (0.02, float, lambda v: v >= 0 or "must be ≥ 0"),
    "linear_scale": (None, float, lambda v: v >= 0 or "must be ≥ 0"),
    "width_c": (0.5, float, lambda v: v > 0 or "must be > 0"),
    "bare_keldysh": ("zero", str,
                     lambda v: v in ("zero", "thermal") or "must be zero or thermal"),
    "coupling_norm": (1.0, float, lambda v: v > 0 or "must be > 0"),
    "sigma_spin_scale": (1.0, float, None),
    "j.kind": ("ohmic_lorentzian", str,
               lambda v: v in ("ohmic_lorentzian", "tabulated")
               or "must be ohmic_lorentzian or tabulated"),
    "j.amplitude": (math.pi, float, lambda v: v >= 0 or "must be ≥ 0"),
    "j.cutoff": (1.0, float, lambda v: v > 0 or "must be > 0"),
    "j.path": (None, str, None),
    "grid.omega_max": (20.0, float, lambda v: v > 0 or "must be > 0"),
    "grid.n_points": (4096, int,
                      lambda v: (v >= 16 and (v & (v - 1)) == 0)
                      or "must be a power of two ≥ 16"),
    "solver.mixing": (0.5, float, lambda v: 0 < v <= 1 or "must be in (0, 1]"),
    "solver.tol": (1e-8, float, lambda v: v > 0 or "must be > 0"),
    "solver.max_iter": (500, int, lambda v: v >= 1 or "must be ≥ 1"),
    "compare.born_internal": ("thermal", str,
                              lambda v: v in ("zero", "thermal")
                              or "must be zero or thermal"),
    "check.fdr_max": (1e-3, float, lambda v: v > 0 or "must be > 0"),
    "check.kms_max": (1e-9, float, lambda v: v > 0 or "must be > 0"),
    "out_dir": (".", str, None),
    "seed": (0, int, None),
}


@dataclass
class RunConfig:
    """Validated run parameters assembled from defaults, file and flags."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def model(self):
        return ModelConfig(
            omega0=self["omega0"],
            j=self.spectral_density(),
            tp=self.thermal(),
            lambda_sq=self["lambda_sq"],
            linear_scale=self["linear_scale"],
            bare_keldysh=self["bare_keldysh"],
            width_c=self["width_c"],
            coupling_norm=self["coupling_norm"],
        )

    def thermal(self):
        return ThermalParams(self["beta"], self["eta"])

    def grid(self):
        return FrequencyGrid(self["grid.omega_max"], self["grid.n_points"])

    def solver(self):
        return SolverConfig(mixing=self["solver.mixing"], tol=self["solver.tol"],
                            max_iter=self["solver.max_iter"])

    def spectral_density(self):
        if self["j.kind"] == "tabulated":
            if not self["j.path"]:
                raise ValidationError("j.path", "required for tabulated densities")
            return SpectralDensity.from_file(self["j.path"])
        return SpectralDensity.ohmic_lorentzian(self["j.amplitude"],
                                                self["j.cutoff"])


def default_config():
    return RunConfig(values={k: spec[0] for k, spec in _SCHEMA.items()})


def _coerce(key, raw, line_no):
    default, caster, validator = _SCHEMA[key]
    text = raw.strip()
    if caster is str:
        value = text.strip("\"'")
    else:
        try:
            value = caster(text) if caster is not float else float(text)
        except ValueError:
            raise ParseError(line_no, f"cannot parse value {text!r} for {key}")
        if caster is int and not float(text).is_integer():
            raise ParseError(line_no, f"expected an integer for {key}")
    if validator is not None:
        verdict = validator(value)
        if verdict is not True:
            raise ValidationError(key, verdict)
    return value


def parse_config(path):
    """Read a flat key = value file into a validated RunConfig.

    An empty file yields all defaults.  Unknown keys raise
    ValidationError naming the key; malformed lines raise ParseError with
    the line number.
    """
    cfg = default_config()
    text = Path(path).read_text()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(line_no, f"expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ValidationError(key, "unknown configuration key")
        cfg.values[key] = _coerce(key, raw, line_no)
    return cfg


def print_defaults(stream=sys.stdout):
    for key, (default, _, _) in _SCHEMA.items():
        if default is None:
            stream.write(f"# {key} =\n")
        else:
            stream.write(f"{key} = {default}\n")


def _write_csv(path, header, columns):
    data = np.column_stack(columns)
    if not np.all(np.isfinite(data)):
        raise KeldyshNcaError(f"non-finite value about to reach {path}")
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _params_dict(cfg):
    return {k: cfg.values[k] for k in sorted(cfg.values)
            if cfg.values[k] is not None}


def _greens_columns(g):
    return [g.grid.values, g.R.real, g.R.imag, g.A.real, g.A.imag,
            g.K.real, g.K.imag]


def _run_weak_corr(cfg, out, spin=False):
    grid = cfg.grid()
    tp = cfg.thermal()
    if spin:
        model = SpinBosonModel(cfg["omega0"], cfg.spectral_density(),
                               ThermalParams(cfg["beta"], -1),
                               sigma_scale=cfg["sigma_spin_scale"])
        lesser = spin_correlator(model, grid, "plus_minus")
        greater = spin_correlator(model, grid, "minus_plus")
        tp = model.tp
        stem = "spin_corr"
    else:
        model = LinearModeModel(cfg["omega0"], cfg.spectral_density(), tp)
        lesser = mode_correlator(model, grid, "lesser")
        greater = mode_correlator(model, grid, "greater")
        stem = "weak_corr"
    report = kms_check(lesser, greater, tp)
    for res, tag in ((lesser, "lesser"), (greater, "greater")):
        _write_csv(out / f"{stem}_{tag}.csv", "omega,S", [res.omega, res.spectrum])
        c = res.time_series
        _write_csv(out / f"{stem}_{tag}_time.csv", "tau,re_C,im_C",
                   [res.tau, c.real, c.imag])
    payload = {
        "command": "spin-corr" if spin else "weak-corr",
        "params": _params_dict(cfg),
        "kms": {"l_inf": report.l_inf, "l2": report.l2},
    }
    _write_json(out / f"{stem}_report.json", payload)
    ok = report.l_inf <= cfg["check.kms_max"]
    print(f"{stem}: KMS residual l_inf = {report.l_inf:.3e} "
          f"({'ok' if ok else 'ABOVE THRESHOLD'})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _run_lamb_shift(cfg, out):
    grid = cfg.grid()
    sig = lamb_shift(cfg.spectral_density(), grid)
    _write_csv(out / "lamb_shift.csv", "omega,sigma",
               [grid.values, sig.samples.real])
    _write_json(out / "lamb_shift_report.json",
                {"command": "lamb-shift", "params": _params_dict(cfg)})
    print(f"lamb-shift: wrote {grid.n_points} samples")
    return EXIT_OK


def _run_greens(cfg, out, method):
    grid = cfg.grid()
    m = cfg.model()
    trace = None
    if method == "born":
        g, sigma = born(m, grid)
    elif method == "g2":
        g, sigma = g2(m, grid)
    else:
        g, sigma, trace = nca_solve(m, grid, cfg.solver())
    report = fdr_check(g, m.tp)
    _write_csv(out / f"greens_{method}.csv",
               "omega,re_GR,im_GR,re_GA,im_GA,re_GK,im_GK",
               _greens_columns(g))
    payload = {
        "command": "greens",
        "params": _params_dict(cfg),
        "method": method,
        "fdr": report.to_json_dict(),
        "sum_rule": sum_rule(g),
    }
    if trace is not None:
        payload["trace"] = trace.to_json_dict()
    _write_json(out / f"greens_{method}_report.json", payload)
    print(f"greens[{method}]: FDR l_inf = {report.l_inf:.3e}"
          + (f", {trace.iterations} iterations" if trace else ""))
    return EXIT_OK


def _run_fdr_check(cfg, out):
    grid = cfg.grid()
    tp = cfg.thermal()
    w = grid.values
    gamma = 0.25
    rho = (gamma / np.pi) / ((w - cfg["omega0"]) ** 2 + gamma**2)
    rho = rho * w**2 / (w**2 + gamma**2)  # thermal spectra vanish at w = 0
    g = from_spectral(SpectralFunction(grid, rho / (np.sum(rho) * grid.delta)), tp)
    report = fdr_check(g, tp)
    payload = {
        "command": "fdr-check",
        "params": _params_dict(cfg),
        "fdr": report.to_json_dict(),
    }
    _write_json(out / "fdr_check_report.json", payload)
    ok = report.l_inf <= cfg["check.fdr_max"]
    print(f"fdr-check: residual l_inf = {report.l_inf:.3e} "
          f"({'ok' if ok else 'ABOVE THRESHOLD'})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _run_compare(cfg, out):
    grid = cfg.grid()
    m = cfg.model()
    result = retarded_compare(m, grid, cfg.solver(),
                              born_internal=cfg["compare.born_internal"])
    _write_csv(out / "compare.csv",
               "omega,re_GBR,im_GBR,re_G2R,im_G2R,re_GSCR,im_GSCR",
               [result.omega,
                result.born_R.real, result.born_R.imag,
                result.g2_R.real, result.g2_R.imag,
                result.nca_R.real, result.nca_R.imag])
    payload = {
        "command": "compare",
        "params": _params_dict(cfg),
        "gaps": {f"{a}-{b}": v for (a, b), v in result.gaps.items()},
        "fdr": {k: v.to_json_dict() for k, v in result.fdr.items()},
        "trace": result.trace.to_json_dict(),
    }
    _write_json(out / "compare_report.json", payload)
    print("compare: relative L2 gaps "
          + ", ".join(f"{a}-{b}: {v:.4f}" for (a, b), v in result.gaps.items()))
    return EXIT_OK


def _run_property_check(cfg, out):
    grid = cfg.grid()
    rng = np.random.default_rng(cfg["seed"])
    checks = []

    def record(name, worst, bound):
        ok = worst <= bound
        checks.append({"name": name, "worst": float(worst),
                       "bound": bound, "passed": bool(ok)})
        print(f"property-check: {name}: worst {worst:.3e} "
              f"({'ok' if ok else 'FAIL'})")

    w = grid.values

    def random_thermal(tp):
        rho = np.zeros_like(w)
        for _ in range(rng.integers(1, 4)):
            center = rng.uniform(-4.0, 4.0)
            width = rng.uniform(0.2, 1.0)
            rho += rng.uniform(0.2, 1.0) * width / (np.pi * ((w - center) ** 2
                                                             + width**2))
        rho *= w**2 / (w**2 + 0.25)  # stationary spectra vanish at w = 0
        rho /= np.sum(rho) * grid.delta
        return from_spectral(SpectralFunction(grid, rho), tp)

    worst_prod = worst_dyson = worst_coth = worst_ring = 0.0
    for _ in range(10):
        tp = ThermalParams(rng.uniform(0.5, 3.0), -1)
        factors = [random_thermal(tp) for _ in range(int(rng.integers(2, 4)))]
        sigma = circ_product(factors)
        worst_prod = max(worst_prod, fdr_check(sigma, tp).l_inf)

        base = random_thermal(tp)
        small = type(sigma)(grid=grid, R=0.05 * sigma.R, A=0.05 * sigma.A,
                            K=0.05 * sigma.K, domain="frequency", beta=tp.beta)
        worst_dyson = max(worst_dyson, fdr_check(dyson(base, small), tp).l_inf)

        x = rng.uniform(0.05, 2.0, size=3) * rng.choice([-1.0, 1.0], size=3)
        if abs(np.sum(x)) > 0.05:
            lhs = coth_half(2.0, np.sum(x))
            c = coth_half(2.0, x)
            num = c[0] * c[1] * c[2] + c[0] + c[1] + c[2]
            den = c[0] * c[1] + c[1] * c[2] + c[2] * c[0] + 1.0
            worst_coth = max(worst_coth, abs(lhs - num / den) / abs(lhs))

        gt = base.to_time_domain()
        i0 = grid.zero_index
        worst_ring = max(worst_ring, abs(gt.R[i0] + gt.A[i0]))

    record("product_fdr_closure", worst_prod, cfg["check.fdr_max"])
    record("dyson_fdr_preservation", worst_dyson, cfg["check.fdr_max"])
    record("coth_composition", worst_coth, 1e-12)
    record("ring_cancellation", worst_ring, 1e-10)

    payload = {
        "command": "property-check",
        "params": _params_dict(cfg),
        "seed": cfg["seed"],
        "checks": checks,
    }
    _write_json(out / "property_check_report.json", payload)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def run(command, cfg):
    """Execute one command; returns the process exit code."""
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if command == "weak-corr":
        return _run_weak_corr(cfg, out, spin=False)
    if command == "spin-corr":
        return _run_weak_corr(cfg, out, spin=True)
    if command == "lamb-shift":
        return _run_lamb_shift(cfg, out)
    if command == "greens":
        return _run_greens(cfg, out, cfg.values.get("method", "nca"))
    if command == "fdr-check":
        return _run_fdr_check(cfg, out)
    if command == "compare":
        return _run_compare(cfg, out)
    if command == "property-check":
        return _run_property_check(cfg, out)
    raise ValueError(f"unknown command {command!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="keldysh-nca",
        description="Steady-state Keldysh Green's functions, self-consistent "
                    "solvers and fluctuation-dissipation checks.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", help="key = value file")
    parser.add_argument("--lambda-sq", type=float, dest="lambda_sq")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--omega0", type=float)
    parser.add_argument("--method", choices=("born", "g2", "nca"))
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--print-defaults", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if "--print-defaults" in argv:
        print_defaults()
        return 0
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else default_config()
        overrides = {
            "lambda_sq": args.lambda_sq,
            "beta": args.beta,
            "omega0": args.omega0,
            "out_dir": args.out,
            "seed": args.seed,
        }
        for key, value in overrides.items():
            if value is not None:
                cfg.values[key] = value
        if args.method is not None:
            cfg.values["method"] = args.method
        code = run(args.command, cfg)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except KeldyshNcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
