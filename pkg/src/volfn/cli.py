"""Command-line interface: estimate, pca, simulate, mc, kernel-constants.

Conventions shared by every subcommand:

  * ``--config`` points at a TOML file; a flat table and/or a table named
    after the subcommand supply defaults, and explicit command-line flags
    always win.
  * exit codes: 0 success, 2 configuration/tuning error, 3 data error,
    4 numeric/degeneracy error (click's own usage failures also exit 2).
  * every run writes ``manifest.json`` into the output directory capturing
    the resolved configuration plus SHA-256 hashes of input and output
    files — no timestamps, so identical runs produce identical manifests.
  * one ``--seed`` feeds all randomness; ``--threads``/``--jobs`` change
    scheduling but not numbers.
"""
from __future__ import annotations

import functools
import hashlib
import json
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

import click
import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .errors import ConfigError, VolfnError
from .estimate import confidence_interval, estimate
from .functional import ClusterSpec, builtin
from .grid import load_csv, save_csv
from .kernel import constants, get_profile, profile_from_table
from .pca import realized_eigenvalues, realized_eigenvectors, window_spectra
from .sim import (
    FactorModelParams,
    McStudy,
    ScalarModelParams,
    bipower,
    run_mc,
    simulate_factor,
    simulate_scalar,
)
from .spot import TuningPlan, spot_series, validate_tuning

_TUNING_FLAGS = ("theta", "varrho", "kappa", "rho", "delta", "theta_prime", "nu_jump")


def _die_on_volfn_error(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VolfnError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _load_config(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from None
    merged = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    merged.update(raw.get(section, {}))
    return merged


def _merged(ctx: click.Context, config: dict, **flags):
    """Apply config as defaults for any flag not set on the command line."""
    out = dict(flags)
    for name, value in flags.items():
        src = ctx.get_parameter_source(name)
        if src is not None and src.name != "COMMANDLINE" and name in config:
            out[name] = config[name]
    unknown = set(config) - set(flags) - {"config"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return out


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(
    out_dir: Path, command: str, config: dict, inputs: list[Path],
    outputs: list[Path],
) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p.name): _sha256(p) for p in outputs},
        "version": __version__,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _coerce(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _fn_params(pairs: tuple[str, ...]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--fn-arg expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = _coerce(value.strip())
    return out


def _build_plan(mode, theta, varrho, kappa, rho, delta, theta_prime, nu_jump,
                relaxed, ctx) -> TuningPlan:
    canonical = {"hat": "hat", "rate-optimal": "hat", "tilde": "tilde",
                 "psd": "tilde"}.get(mode)
    if canonical is None:
        raise ConfigError(f"unknown mode {mode!r}")
    explicit_delta = ctx.get_parameter_source("delta")
    if canonical == "hat" and explicit_delta is not None and \
            explicit_delta.name == "COMMANDLINE":
        raise ConfigError(
            "--delta is a PSD-mode (tilde) parameter; it cannot be combined "
            "with --mode hat"
        )
    if canonical == "tilde" and relaxed:
        raise ConfigError(
            "--relaxed selects the widened rate-optimal (hat) tuning range; "
            "it cannot be combined with --mode tilde"
        )
    return TuningPlan(
        mode=canonical,
        theta=theta,
        varrho=varrho,
        kappa=kappa,
        rho=rho,
        delta=delta,
        theta_prime=theta_prime,
        nu_jump=nu_jump,
        relaxed=relaxed,
    )


def _tuning_options(fn):
    fn = click.option("--mode", default="hat", show_default=True,
                      help="hat/rate-optimal or tilde/psd")(fn)
    fn = click.option("--theta", type=float, default=1.0, show_default=True,
                      help="smoothing-window scale")(fn)
    fn = click.option("--varrho", type=float, default=1.0, show_default=True,
                      help="spot-window scale")(fn)
    fn = click.option("--kappa", type=float, default=None,
                      help="spot-window exponent (auto: range midpoint)")(fn)
    fn = click.option("--rho", type=float, default=None,
                      help="truncation exponent (auto: 0.47 or feasible)")(fn)
    fn = click.option("--delta", type=float, default=0.15, show_default=True,
                      help="PSD-mode rate sacrifice")(fn)
    fn = click.option("--theta-prime", type=float, default=None,
                      help="noise-window scale (default: theta)")(fn)
    fn = click.option("--nu-jump", type=float, default=0.0, show_default=True,
                      help="assumed jump-activity index")(fn)
    fn = click.option("--relaxed", is_flag=True,
                      help="widened hat tuning range (polynomial-growth g)")(fn)
    return fn


def _trunc_options(fn):
    fn = click.option("--alpha-mult", type=float, default=1.5,
                      show_default=True, help="threshold multiplier")(fn)
    fn = click.option("--trunc-mode", default="elementwise", show_default=True,
                      type=click.Choice(["elementwise", "global"]))(fn)
    fn = click.option("--no-truncation", is_flag=True,
                      help="disable jump truncation")(fn)
    fn = click.option("--sigma-bar", type=float, default=None,
                      help="override the bipower variance scale")(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="volfn")
def main() -> None:
    """Integrated volatility functionals from noisy high-frequency data."""


@main.command("estimate")
@click.option("--config", type=click.Path(), default=None,
              help="TOML config; flags win")
@click.option("--data", type=click.Path(), default=None,
              help="input CSV of log-prices (columns = assets)")
@click.option("--delta-n", type=float, default=None,
              help="sampling interval in days (e.g. 1/23400)")
@click.option("--raw-prices", is_flag=True, help="input is price levels")
@click.option("--functional", "functional_name", default="square",
              show_default=True, help="trace|entry|square|log|logdet|laplace|beta")
@click.option("--fn-arg", multiple=True, help="functional parameter key=value")
@_tuning_options
@_trunc_options
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--no-bias-correction", is_flag=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.pass_context
@_die_on_volfn_error
def estimate_cmd(ctx, config, data, delta_n, raw_prices, functional_name,
                 fn_arg, mode, theta, varrho, kappa, rho, delta, theta_prime,
                 nu_jump, relaxed, alpha_mult, trunc_mode, no_truncation,
                 sigma_bar, level, no_bias_correction, threads, out):
    """Estimate an integrated matrix functional from a log-price CSV."""
    cfg = _load_config(config, "estimate")
    v = _merged(
        ctx, cfg, data=data, delta_n=delta_n, raw_prices=raw_prices,
        functional_name=functional_name, fn_arg=fn_arg, mode=mode,
        theta=theta, varrho=varrho, kappa=kappa, rho=rho, delta=delta,
        theta_prime=theta_prime, nu_jump=nu_jump, relaxed=relaxed,
        alpha_mult=alpha_mult, trunc_mode=trunc_mode,
        no_truncation=no_truncation, sigma_bar=sigma_bar, level=level,
        no_bias_correction=no_bias_correction, threads=threads, out=out,
    )
    if v["data"] is None:
        raise ConfigError("--data is required (or set data in the config)")
    if v["delta_n"] is None:
        raise ConfigError("--delta-n is required (days per observation)")
    out_dir = Path(v["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = load_csv(v["data"], v["delta_n"], raw_prices=v["raw_prices"])
    g = builtin(v["functional_name"], grid.d, **_fn_params(tuple(v["fn_arg"])))
    plan = _build_plan(v["mode"], v["theta"], v["varrho"], v["kappa"],
                       v["rho"], v["delta"], v["theta_prime"], v["nu_jump"],
                       v["relaxed"], ctx)
    sig = v["sigma_bar"]
    est = estimate(
        grid, g, plan,
        level=v["level"],
        bias_correction=not v["no_bias_correction"],
        alpha_mult=v["alpha_mult"],
        trunc_mode=v["trunc_mode"],
        truncation=not v["no_truncation"],
        sigma_bar=None if sig is None else np.full(grid.d, sig),
        threads=v["threads"],
    )
    result_path = out_dir / "estimate.json"
    _write_json(result_path, est.to_json_dict())
    _write_manifest(out_dir, "estimate", _jsonable(v), [Path(v["data"])],
                    [result_path])
    for j, comp in enumerate(np.atleast_1d(est.value)):
        lo, hi = est.ci[j]
        click.echo(f"{g.name}[{j}] = {comp:.6g}  CI{v['level']:.0%} "
                   f"[{lo:.6g}, {hi:.6g}]")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(x) for k, x in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj


@main.command("pca")
@click.option("--config", type=click.Path(), default=None)
@click.option("--data", type=click.Path(), default=None)
@click.option("--delta-n", type=float, default=None)
@click.option("--raw-prices", is_flag=True)
@click.option("--clusters", default=None,
              help="comma-separated cluster sizes, e.g. 1,1,8")
@click.option("--eigenvector", "eigenvector_k", type=int, default=None,
              help="1-based eigenvector index to integrate")
@_tuning_options
@_trunc_options
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--no-bias-correction", is_flag=True)
@click.option("--dump-windows", is_flag=True, help="write per-window spectra")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.pass_context
@_die_on_volfn_error
def pca_cmd(ctx, config, data, delta_n, raw_prices, clusters, eigenvector_k,
            mode, theta, varrho, kappa, rho, delta, theta_prime, nu_jump,
            relaxed, alpha_mult, trunc_mode, no_truncation, sigma_bar, level,
            no_bias_correction, dump_windows, out):
    """Integrated eigenvalues/eigenvectors (PSD spot series only)."""
    cfg = _load_config(config, "pca")
    v = _merged(
        ctx, cfg, data=data, delta_n=delta_n, raw_prices=raw_prices,
        clusters=clusters, eigenvector_k=eigenvector_k, mode=mode,
        theta=theta, varrho=varrho, kappa=kappa, rho=rho, delta=delta,
        theta_prime=theta_prime, nu_jump=nu_jump, relaxed=relaxed,
        alpha_mult=alpha_mult, trunc_mode=trunc_mode,
        no_truncation=no_truncation, sigma_bar=sigma_bar, level=level,
        no_bias_correction=no_bias_correction, dump_windows=dump_windows,
        out=out,
    )
    mode_src = ctx.get_parameter_source("mode")
    if mode_src is not None and mode_src.name == "COMMANDLINE" and \
            v["mode"] in ("hat", "rate-optimal"):
        raise ConfigError("pca runs on the PSD spot series; --mode hat is invalid")
    if v["data"] is None or v["delta_n"] is None:
        raise ConfigError("--data and --delta-n are required")
    if v["clusters"] is None and v["eigenvector_k"] is None:
        raise ConfigError("pass --clusters SIZES and/or --eigenvector K")
    out_dir = Path(v["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = load_csv(v["data"], v["delta_n"], raw_prices=v["raw_prices"])
    plan = _build_plan("tilde", v["theta"], v["varrho"], v["kappa"], v["rho"],
                       v["delta"], v["theta_prime"], v["nu_jump"],
                       v["relaxed"], ctx)
    plan = validate_tuning(plan, grid.delta_n)
    sig = v["sigma_bar"]
    spot = spot_series(
        grid, plan, "tilde",
        alpha_mult=v["alpha_mult"],
        trunc_mode=v["trunc_mode"],
        truncation=not v["no_truncation"],
        sigma_bar=None if sig is None else np.full(grid.d, sig),
    )
    payload: dict = {"mode": "tilde", "n": grid.n, "delta_n": grid.delta_n,
                     "plan": {k: x for k, x in _jsonable(vars(plan)).items()
                              if x is not None}}
    outputs = []
    bias_on = not v["no_bias_correction"]
    if v["clusters"] is not None:
        sizes = tuple(int(s) for s in str(v["clusters"]).split(","))
        res = realized_eigenvalues(spot, ClusterSpec(sizes), plan,
                                   bias_correction=bias_on)
        ci = confidence_interval(res.eigenvalues, np.diag(res.avar_values),
                                 res.rate_scale, v["level"], "tilde")
        payload["eigenvalues"] = {
            "clusters": list(sizes),
            "value": res.eigenvalues.tolist(),
            "avar": res.avar_values.tolist(),
            "rate_scale": res.rate_scale,
            "ci": ci.tolist(),
            "excluded_windows": res.excluded,
        }
        for k, val in enumerate(res.eigenvalues):
            click.echo(f"lambda[{k + 1}] = {val:.6g}  CI{v['level']:.0%} "
                       f"[{ci[k, 0]:.6g}, {ci[k, 1]:.6g}]")
    if v["eigenvector_k"] is not None:
        k0 = int(v["eigenvector_k"]) - 1
        res = realized_eigenvectors(spot, k0, plan, bias_correction=bias_on)
        diag = np.diag(res.avar_vector)
        ci = confidence_interval(res.eigenvector, np.diag(diag),
                                 res.rate_scale, v["level"], "tilde")
        payload["eigenvector"] = {
            "k": int(v["eigenvector_k"]),
            "value": res.eigenvector.tolist(),
            "avar": res.avar_vector.tolist(),
            "rate_scale": res.rate_scale,
            "ci": ci.tolist(),
            "excluded_windows": res.excluded,
        }
        click.echo(f"q[{v['eigenvector_k']}] integrated, first entries "
                   f"{np.round(res.eigenvector[:3], 6).tolist()}")
    result_path = out_dir / "pca.json"
    _write_json(result_path, payload)
    outputs.append(result_path)
    if v["dump_windows"]:
        lams, qs = window_spectra(spot)
        win_path = out_dir / "windows.csv"
        d = lams.shape[1]
        header = ["window"] + [f"lambda_{j + 1}" for j in range(d)]
        cols = [np.arange(lams.shape[0], dtype=float), *lams.T]
        if v["eigenvector_k"] is not None:
            kq = int(v["eigenvector_k"]) - 1
            header += [f"q{kq + 1}_{j + 1}" for j in range(d)]
            cols += list(qs[:, :, kq].T)
        np.savetxt(win_path, np.column_stack(cols), delimiter=",",
                   header=",".join(header), comments="", fmt="%.17g")
        outputs.append(win_path)
    _write_manifest(out_dir, "pca", _jsonable(v), [Path(v["data"])], outputs)


@main.command("simulate")
@click.option("--config", type=click.Path(), default=None)
@click.option("--model", default="scalar", show_default=True,
              type=click.Choice(["scalar", "factor"]))
@click.option("--days", type=float, default=None,
              help="sample span in days (default 21)")
@click.option("--delta-n", type=float, default=None,
              help="default 1/23400 (scalar) or 1/22800 (factor)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--panel-dim", "-d", "panel_dim", type=int, default=30,
              show_default=True, help="factor model: panel size")
@click.option("--factors", "-r", type=int, default=3, show_default=True,
              help="factor model: factor count")
@click.option("--noise-sd", type=float, default=None,
              help="override observation-noise sd")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.pass_context
@_die_on_volfn_error
def simulate_cmd(ctx, config, model, days, delta_n, seed, panel_dim, factors,
                 noise_sd, out):
    """Simulate a model and write grid.csv + latent.csv."""
    cfg = _load_config(config, "simulate")
    v = _merged(ctx, cfg, model=model, days=days, delta_n=delta_n, seed=seed,
                panel_dim=panel_dim, factors=factors, noise_sd=noise_sd,
                out=out)
    out_dir = Path(v["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    days_eff = 21.0 if v["days"] is None else float(v["days"])
    grid_path = out_dir / "grid.csv"
    latent_path = out_dir / "latent.csv"
    if v["model"] == "scalar":
        dn = 1.0 / 23400 if v["delta_n"] is None else v["delta_n"]
        params = ScalarModelParams()
        if v["noise_sd"] is not None:
            params = dc_replace(params, noise_sd=v["noise_sd"])
        sim = simulate_scalar(params, dn, days_eff, seed=v["seed"])
        save_csv(sim.grid, grid_path)
        t = np.arange(sim.grid.n) * dn
        np.savetxt(latent_path, np.column_stack([t, sim.c_path, sim.x_path]),
                   delimiter=",", header="t,c,x", comments="", fmt="%.17g")
        click.echo(f"scalar path: n={sim.grid.n}, floor hits {sim.floor_hits}")
    else:
        dn = 1.0 / 22800 if v["delta_n"] is None else v["delta_n"]
        params = FactorModelParams.build(v["panel_dim"], v["factors"])
        if v["noise_sd"] is not None:
            params = dc_replace(params, noise_sd=v["noise_sd"])
        sim = simulate_factor(params, dn, days_eff, seed=v["seed"])
        save_csv(sim.grid, grid_path)
        n, d = sim.grid.n, sim.d
        lams = np.empty((n, d))
        chunk = 8192
        for start in range(0, n, chunk):
            block = sim.c_mats(start, min(start + chunk, n))
            lams[start:start + block.shape[0]] = np.linalg.eigvalsh(block)[:, ::-1]
        t = np.arange(n) * dn
        header = "t," + ",".join(f"lambda_{j + 1}" for j in range(d))
        np.savetxt(latent_path, np.column_stack([t, lams]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        click.echo(f"factor panel: n={n}, d={d}, floor hits {sim.floor_hits}")
    sig = bipower(load_csv(grid_path, dn))
    click.echo(f"bipower variance/day: {np.round(sig, 6).tolist()}")
    _write_manifest(out_dir, "simulate", _jsonable(v), [],
                    [grid_path, latent_path])


@main.command("mc")
@click.option("--config", type=click.Path(), required=True,
              help="TOML study spec")
@click.option("--reps", type=int, default=None, help="override replications")
@click.option("--seed", type=int, default=None, help="override master seed")
@click.option("--jobs", type=int, default=None, help="parallel workers")
@click.option("--plot-data", is_flag=True,
              help="write studentized-error density tables")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.pass_context
@_die_on_volfn_error
def mc_cmd(ctx, config, reps, seed, jobs, plot_data, out):
    """Run a replication study from a TOML spec; write records + summary."""
    with open(config, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {config}: {exc}") from None
    study = _study_from_config(raw, reps=reps, seed=seed, jobs=jobs)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_mc(study)
    records_path = out_dir / "records.csv"
    summary_path = out_dir / "summary.json"
    report.write_records_csv(records_path)
    _write_json(summary_path, report.to_json_dict())
    outputs = [records_path, summary_path]
    if plot_data:
        from scipy.stats import gaussian_kde, norm

        x = np.linspace(-4.0, 4.0, 257)
        ref = norm.pdf(x)
        for j, name in enumerate(report.component_names):
            sample = report.studentized[:, j]
            sample = sample[np.isfinite(sample)]
            dens = gaussian_kde(sample)(x) if sample.size > 1 else np.zeros_like(x)
            p = out_dir / f"plot_{name}.csv"
            np.savetxt(p, np.column_stack([x, dens, ref]), delimiter=",",
                       header="x,density,normal_density", comments="",
                       fmt="%.17g")
            outputs.append(p)
    for j, name in enumerate(report.component_names):
        click.echo(
            f"{name}: coverage {report.coverage[j]:.3f}, studentized mean "
            f"{report.stud_mean[j]:+.3f}, sd {report.stud_sd[j]:.3f}"
        )
    _write_manifest(out_dir, "mc", _jsonable({**raw, "reps": study.replications,
                                              "seed": study.master_seed,
                                              "jobs": study.n_jobs}),
                    [Path(config)], outputs)


def _study_from_config(raw: dict, reps=None, seed=None, jobs=None) -> McStudy:
    try:
        model = raw["model"]
        target = dict(raw["target"])
        plan_cfg = dict(raw.get("plan", {}))
    except KeyError as exc:
        raise ConfigError(f"mc config missing required key {exc}") from None
    relaxed = bool(plan_cfg.pop("relaxed", False))
    allowed = set(_TUNING_FLAGS) | {"mode"}
    unknown = set(plan_cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
    plan = TuningPlan(relaxed=relaxed, **plan_cfg)
    scalar_params = ScalarModelParams(**raw.get("scalar_params", {}))
    factor_params = None
    if model == "factor":
        fp = dict(raw.get("factor_params", {}))
        factor_params = FactorModelParams.build(**fp)
    sizes = raw.get("sample_sizes")
    return McStudy(
        model=model,
        plan=plan,
        target=target,
        replications=int(reps if reps is not None else raw.get("replications", 100)),
        master_seed=int(seed if seed is not None else raw.get("seed", 0)),
        days=float(raw.get("days", 5.0)),
        delta_n=float(raw.get("delta_n", 1.0 / 23400)),
        level=float(raw.get("level", 0.95)),
        alpha_mult=float(raw.get("alpha_mult", 1.5)),
        trunc_mode=raw.get("trunc_mode", "elementwise"),
        truncation=bool(raw.get("truncation", True)),
        bias_correction=bool(raw.get("bias_correction", True)),
        n_jobs=int(jobs if jobs is not None else raw.get("n_jobs", 1)),
        scalar_params=scalar_params,
        factor_params=factor_params,
        sample_sizes=tuple(sizes) if sizes else None,
    )


@main.command("kernel-constants")
@click.option("--kernel", default="minmax", show_default=True,
              help="registered profile name")
@click.option("--table", type=click.Path(), default=None,
              help="CSV profile table instead of a registered name")
@click.option("--mesh", type=int, default=2048, show_default=True)
@click.option("--rtol", type=float, default=1e-8, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="also write constants.json + manifest here")
@_die_on_volfn_error
def kernel_constants_cmd(kernel, table, mesh, rtol, out):
    """Print the smoothing-profile constants as JSON."""
    profile = profile_from_table(table) if table else get_profile(kernel)
    kc = constants(profile, mesh=mesh, rtol=rtol)
    payload = {"profile": profile.name, **kc.as_dict()}
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "constants.json"
        _write_json(path, payload)
        inputs = [Path(table)] if table else []
        _write_manifest(out_dir, "kernel-constants",
                        {"kernel": kernel, "table": table, "mesh": mesh,
                         "rtol": rtol}, inputs, [path])


if __name__ == "__main__":  # pragma: no cover
    main()
