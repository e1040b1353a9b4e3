"""Command-line front end: ``geophase simulate | sweep | decompose``.

Models are either the rotating field (``--omega0 --omega --theta``) or a
sampled-matrix JSON file (``--model-file``). Every run starts in eigenstate
``k`` of H at the first time of the model: for the rotating field level 0 is
the +omega0/2 state, for sampled models levels are in ascending energy order.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 invalid
model.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .decomposition import expand_state, expanded_overlap_argument, verify_reconstruction
from .errors import ConfigError, GeoPhaseError, NumericalError, OrthogonalEndpointsError
from .evolution import DEFAULT_TOL, TOL_RANGE, TimeGrid, evolve
from .hamiltonians import (
    DEFAULT_ADIABATIC_THRESHOLD,
    RotatingField,
    adiabatic_constraint_ratios,
    eigenframe_trajectory,
    load_sampled_json,
)
from .phase import (
    ORTHOGONALITY_THRESHOLD,
    PhaseTracker,
    adiabatic_phase_inputs,
    closed_form_adiabatic_phase,
    closed_form_exact_phase,
    delta_gamma_spin_estimate,
    drift_parameter,
    exact_phase_inputs,
    spin_drift_rate,
)

CROSS_CHECK_TOL = 1e-5
FORMATS = ("csv", "json")


def parse_theta(value):
    """Radians, or degrees written as ``"deg:<value>"``."""
    if isinstance(value, str):
        text = value.strip()
        try:
            if text.lower().startswith("deg:"):
                return math.radians(float(text[4:]))
            return float(text)
        except ValueError:
            raise ConfigError(f"cannot parse theta {value!r}; use radians or 'deg:<degrees>'") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"theta must be a number or 'deg:<degrees>', got {value!r}")
    return float(value)


@dataclass(frozen=True)
class RunConfig:
    omega0: Optional[float] = None
    omega: float = 1.0
    theta: Optional[float] = None
    model_file: Optional[str] = None
    k: int = 0
    tau: Optional[float] = None
    tau_start: Optional[float] = None
    tau_stop: Optional[float] = None
    tau_count: Optional[int] = None
    tol: float = DEFAULT_TOL
    threshold: float = DEFAULT_ADIABATIC_THRESHOLD
    format: Optional[str] = None
    out: Optional[str] = None

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        clean = {}
        for key, value in data.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            if value is not None:
                clean[name] = value
        try:
            for name in ("omega0", "omega", "tau", "tau_start", "tau_stop", "tol", "threshold"):
                if name in clean:
                    clean[name] = float(clean[name])
            for name in ("k", "tau_count"):
                if name in clean:
                    v = clean[name]
                    if isinstance(v, float) and not v.is_integer():
                        raise ValueError(f"{name} must be an integer")
                    clean[name] = int(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration value: {exc}") from None
        if "theta" in clean:
            clean["theta"] = parse_theta(clean["theta"])
        return cls(**clean)

    def check(self, sweep=False):
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not TOL_RANGE[0] <= self.tol <= TOL_RANGE[1]:
            raise ConfigError(f"tol must lie in [{TOL_RANGE[0]}, {TOL_RANGE[1]}], got {self.tol}")
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be positive, got {self.threshold}")
        if self.k < 0:
            raise ConfigError(f"level index k must be non-negative, got {self.k}")
        if self.model_file is None and (self.omega0 is None or self.theta is None):
            raise ConfigError("give --omega0 and --theta for the rotating field, or --model-file")
        if self.model_file is not None and (self.omega0 is not None or self.theta is not None):
            raise ConfigError("--model-file cannot be combined with rotating-field parameters")
        if sweep:
            if None in (self.tau_start, self.tau_stop, self.tau_count):
                raise ConfigError("a sweep needs --tau-start, --tau-stop and --tau-count")
            if self.tau_count < 2:
                raise ConfigError(f"tau-count must be at least 2, got {self.tau_count}")
            if not 0 < self.tau_start < self.tau_stop:
                raise ConfigError("a sweep needs 0 < tau-start < tau-stop")
        else:
            if self.tau is None:
                raise ConfigError("--tau is required")
            if not (math.isfinite(self.tau) and self.tau > 0):
                raise ConfigError(f"tau must be positive, got {self.tau}")
        return self

    def sweep_taus(self):
        return np.linspace(self.tau_start, self.tau_stop, self.tau_count)


def build_model(cfg):
    if cfg.model_file is not None:
        model = load_sampled_json(cfg.model_file)
    else:
        model = RotatingField(cfg.omega0, cfg.omega, cfg.theta)
    if cfg.k >= model.dim:
        raise ConfigError(f"level index {cfg.k} out of range for dimension {model.dim}")
    return model


def _start_time(model):
    return 0.0 if model.domain is None else float(model.domain[0])


@dataclass(frozen=True)
class ComparisonRow:
    tau: float
    gamma_exact_unwrapped: float
    gamma_exact_principal: float
    gamma_adiabatic_unwrapped: float
    gamma_adiabatic_principal: float
    delta_gamma_measured: float
    delta_gamma_predicted: Optional[float]
    overlap_magnitude: float
    max_constraint_ratio: float
    norm_drift: float


ROW_FIELDS = tuple(f.name for f in fields(ComparisonRow))


def _align_gauge(frames, previous_last):
    # make the first frame of a new segment continue the last of the previous
    ov = np.einsum("ma,ma->m", previous_last.conj(), frames.vectors[0])
    phases = np.broadcast_to(-np.angle(ov), (len(frames.times), frames.dim))
    return frames.regauged(phases)


def comparison_rows(model, k, taus, tol=DEFAULT_TOL):
    """Exact vs adiabatic phase at each ``tau`` (measured from the model's start time).

    One trajectory is integrated segment by segment through the increasing
    ``taus``; every row is a prefix of the same run, so both phases keep
    their branch from one row to the next.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
        raise ConfigError("tau values must be positive and strictly increasing")
    t0 = _start_time(model)
    spin = isinstance(model, RotatingField)
    exact, adiabatic = PhaseTracker(), PhaseTracker()
    psi = psi0 = ref = last_vectors = None
    t_prev = t0
    max_ratio = 0.0
    drift = 0.0
    rows = []
    for tau in taus:
        grid = TimeGrid.for_model(model, t_prev, t0 + tau)
        times = grid.output_times
        frames = eigenframe_trajectory(model, times)
        if last_vectors is not None and frames.derivatives is None:
            frames = _align_gauge(frames, last_vectors)
        if psi0 is None:
            psi = psi0 = np.array(frames.vectors[0, k])
            ref = psi0
        traj = evolve(model, psi, grid, tol)
        g_exact = exact.extend(times, *exact_phase_inputs(model, times, np.asarray(traj.states), psi0))
        g_adiabatic = adiabatic.extend(times, *adiabatic_phase_inputs(frames, k, ref))
        overlap = abs(np.vdot(psi0, traj.states[-1]))
        if overlap < ORTHOGONALITY_THRESHOLD:
            raise OrthogonalEndpointsError(
                f"|<psi(0)|psi(tau)>| = {overlap:.3e} at tau={tau:.17g}; the geometric phase is undefined")
        if abs(np.vdot(ref, frames.vectors[-1, k])) < ORTHOGONALITY_THRESHOLD:
            raise OrthogonalEndpointsError(f"|<E_k(0)|E_k(tau)>| vanishes at tau={tau:.17g}")
        ratios = adiabatic_constraint_ratios(model, k, times, frames)
        max_ratio = max(max_ratio, float(np.max(ratios)))
        drift = max(drift, traj.norm_drift)
        rows.append(ComparisonRow(
            tau=float(tau),
            gamma_exact_unwrapped=g_exact.unwrapped,
            gamma_exact_principal=g_exact.principal,
            gamma_adiabatic_unwrapped=g_adiabatic.unwrapped,
            gamma_adiabatic_principal=g_adiabatic.principal,
            delta_gamma_measured=g_exact.unwrapped - g_adiabatic.unwrapped,
            delta_gamma_predicted=delta_gamma_spin_estimate(model, tau) if spin else None,
            overlap_magnitude=float(overlap),
            max_constraint_ratio=max_ratio,
            norm_drift=drift,
        ))
        psi = np.array(traj.states[-1])
        last_vectors = np.array(frames.vectors[-1])
        t_prev = t0 + tau
    return rows


def spin_cross_check(model, k, rows):
    """Compare each row with the closed forms; raise if the exact phase is off by > 1e-5."""
    if k != 0:
        return None
    worst = 0.0
    for row in rows:
        cf = closed_form_exact_phase(model, row.tau)
        err = abs(row.gamma_exact_unwrapped - cf.unwrapped)
        if err > CROSS_CHECK_TOL:
            raise NumericalError(
                f"cross-check failed at tau={row.tau:.17g}: integrated exact phase "
                f"{row.gamma_exact_unwrapped:.12g} vs closed form {cf.unwrapped:.12g} (|diff| = {err:.3e})")
        worst = max(worst, err)
    return worst


def _base_summary(model, k, rows, threshold):
    max_ratio = rows[-1].max_constraint_ratio
    summary = {"k": k, "max_constraint_ratio": max_ratio, "threshold": threshold,
               "regime": "adiabatic" if max_ratio <= threshold else "non-adiabatic"}
    if isinstance(model, RotatingField):
        summary.update(omega0=model.omega0, omega=model.omega, theta=model.theta)
        check = spin_cross_check(model, k, rows)
        if check is not None:
            summary["closed_form_max_abs_error"] = check
    return summary


def cmd_simulate(cfg):
    cfg.check()
    model = build_model(cfg)
    rows = comparison_rows(model, cfg.k, [cfg.tau], cfg.tol)
    summary = _base_summary(model, cfg.k, rows, cfg.threshold)
    if isinstance(model, RotatingField) and cfg.k == 0:
        summary["closed_form_exact"] = closed_form_exact_phase(model, cfg.tau).unwrapped
        summary["closed_form_adiabatic"] = closed_form_adiabatic_phase(model, cfg.tau).unwrapped
    return rows, summary


def drift_fit(rows):
    """Least-squares line through (tau, delta_gamma_measured): (slope, intercept, max |residual|)."""
    tau = np.array([r.tau for r in rows])
    delta = np.array([r.delta_gamma_measured for r in rows])
    slope, intercept = np.polyfit(tau, delta, 1)
    resid = delta - (slope * tau + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


def cmd_sweep(cfg):
    cfg.check(sweep=True)
    model = build_model(cfg)
    rows = comparison_rows(model, cfg.k, cfg.sweep_taus(), cfg.tol)
    summary = _base_summary(model, cfg.k, rows, cfg.threshold)
    slope, intercept, resid = drift_fit(rows)
    summary.update(slope=slope, intercept=intercept, max_fit_residual=resid)
    if isinstance(model, RotatingField) and summary["regime"] == "adiabatic":
        s = drift_parameter(model)
        summary["predicted_slope"] = -s
        summary["slope_relative_deviation"] = abs(slope + s) / s if s > 0 else abs(slope)
        summary["mean_drift_rate"] = spin_drift_rate(model)
    return rows, summary


def cmd_decompose(cfg):
    cfg.check()
    model = build_model(cfg)
    t0 = _start_time(model)
    grid = TimeGrid.for_model(model, t0, t0 + cfg.tau)
    frames = eigenframe_trajectory(model, grid.output_times)
    traj = evolve(model, frames.vectors[0, cfg.k], grid, cfg.tol)
    report = verify_reconstruction(traj, frames, cfg.k, model)
    expansion = expand_state(traj, frames, cfg.k)
    rebuilt = expanded_overlap_argument(expansion, frames, report.delta_gamma)
    direct = float(np.angle(np.vdot(traj.states[0], traj.states[-1])))
    doc = {
        "tau": float(cfg.tau),
        "k": cfg.k,
        "gamma_exact": report.gamma_exact,
        "gamma_adiabatic": report.gamma_adiabatic,
        **report.delta_gamma.as_dict(),
        "reconstruction_residual": report.residual,
        "tolerance": report.tolerance,
        "pass": report.passed,
        "overlap_argument_error": abs(math.remainder(rebuilt - direct, 2 * math.pi)),
        "normalization_identity_residual": expansion.identity_residual(),
        "norm_drift": traj.norm_drift,
    }
    return doc


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render_rows(rows, summary, fmt):
    if fmt == "json":
        return json.dumps({"rows": [asdict(r) for r in rows], "summary": summary}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, name)) for name in ROW_FIELDS])
    for key, value in summary.items():
        buf.write(f"# {key}={_fmt(value)}\n")
    return buf.getvalue()


def render_report(doc, fmt):
    if fmt == "json":
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("quantity", "value"))
    for key, value in doc.items():
        writer.writerow((key, _fmt(value)))
    return buf.getvalue()


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="geophase", description="Exact and adiabatic geometric phases.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (("simulate", "one run, one tau"),
                            ("sweep", "one run reported at several tau"),
                            ("decompose", "split gamma_exact - gamma_adiabatic into its five terms")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with any of the options below; flags override it")
        p.add_argument("--omega0", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--theta", help="radians, or 'deg:<degrees>'")
        p.add_argument("--model-file", dest="model_file", help="sampled Hamiltonian JSON")
        p.add_argument("--k", type=int, help="reference level (default 0)")
        p.add_argument("--tau", type=float)
        p.add_argument("--tau-start", dest="tau_start", type=float)
        p.add_argument("--tau-stop", dest="tau_stop", type=float)
        p.add_argument("--tau-count", dest="tau_count", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--threshold", type=float, help="adiabaticity threshold on the constraint ratio")
        p.add_argument("--format", choices=FORMATS,
                       help="csv or json (default: json for decompose, csv otherwise)")
        p.add_argument("--out", help="output path (default stdout)")
    return parser


def load_config(args):
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("the config file must hold a JSON object")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    return RunConfig.from_mapping({**data, **flags})


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "decompose":
            doc = cmd_decompose(cfg)
            _emit(render_report(doc, cfg.format or "json"), cfg.out)
            if not doc["pass"]:
                print(f"geophase: reconstruction residual {doc['reconstruction_residual']:.3e} "
                      f"exceeds {doc['tolerance']:g}", file=sys.stderr)
                return NumericalError.exit_code
            return 0
        if args.command == "sweep":
            rows, summary = cmd_sweep(cfg)
        else:
            rows, summary = cmd_simulate(cfg)
        _emit(render_rows(rows, summary, cfg.format or "csv"), cfg.out)
        return 0
    except GeoPhaseError as exc:
        print(f"geophase: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
